//! Balancing-duration matrices over (training frequency x inference frequency).

use serde::{Deserialize, Serialize};

/// Mean and sample standard deviation of balancing durations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub mean_s: f64,
    pub std_s: f64,
    pub n: usize,
}

impl CellStats {
    /// `None` for an empty sample. The standard deviation uses `n - 1`.
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        let n = samples.len();
        if n == 0 {
            return None;
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self {
            mean_s: mean,
            std_s: std,
            n,
        })
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.std_s / (self.n as f64).sqrt()
        }
    }

    /// Statistics of the union of several samples.
    pub fn pool<'a>(cells: impl IntoIterator<Item = &'a CellStats>) -> Option<Self> {
        let (mut n, mut sum, mut sum_sq) = (0usize, 0.0, 0.0);
        for c in cells {
            n += c.n;
            sum += c.mean_s * c.n as f64;
            sum_sq += c.std_s.powi(2) * c.n.saturating_sub(1) as f64 + c.mean_s.powi(2) * c.n as f64;
        }
        if n == 0 {
            return None;
        }
        let mean = sum / n as f64;
        let var = if n > 1 {
            ((sum_sq - n as f64 * mean * mean) / (n - 1) as f64).max(0.0)
        } else {
            0.0
        };
        Some(Self {
            mean_s: mean,
            std_s: var.sqrt(),
            n,
        })
    }
}

/// Durations for one inference shot count. `cells[i][j]` is training
/// frequency `train_freqs[i]` evaluated at `inference_freqs[j]`; `None`
/// marks a cell with no data (e.g. a missing checkpoint).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationMatrix {
    pub shots: u64,
    pub train_freqs: Vec<f64>,
    pub inference_freqs: Vec<f64>,
    pub cells: Vec<Vec<Option<CellStats>>>,
}

impl DurationMatrix {
    pub fn empty(shots: u64, train_freqs: Vec<f64>, inference_freqs: Vec<f64>) -> Self {
        let cells = vec![vec![None; inference_freqs.len()]; train_freqs.len()];
        Self {
            shots,
            train_freqs,
            inference_freqs,
            cells,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.cells.iter().flatten().all(Option::is_none)
    }

    pub fn cell(&self, train_idx: usize, inf_idx: usize) -> Option<&CellStats> {
        self.cells.get(train_idx)?.get(inf_idx)?.as_ref()
    }

    pub fn index_of_inference(&self, freq: f64) -> Option<usize> {
        self.inference_freqs.iter().position(|&f| f == freq)
    }

    /// Pools one inference column over all training frequencies.
    pub fn pooled_inference_column(&self, inf_idx: usize) -> Option<CellStats> {
        CellStats::pool(self.cells.iter().filter_map(|row| row.get(inf_idx)?.as_ref()))
    }

    /// Row-by-row iteration: `(train_freq, inference_freq, cell)`.
    pub fn entries(&self) -> impl Iterator<Item = (f64, f64, Option<&CellStats>)> + '_ {
        self.train_freqs.iter().enumerate().flat_map(move |(i, &tf)| {
            self.inference_freqs
                .iter()
                .enumerate()
                .map(move |(j, &inf)| (tf, inf, self.cells[i][j].as_ref()))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_from_samples() {
        let c = CellStats::from_samples(&[2.0, 4.0, 6.0]).unwrap();
        assert_eq!(c.mean_s, 4.0);
        assert_eq!(c.std_s, 2.0);
        assert!(CellStats::from_samples(&[]).is_none());
        assert_eq!(CellStats::from_samples(&[3.0]).unwrap().std_s, 0.0);
    }

    #[test]
    fn pooling_matches_concatenation() {
        let a = [1.0, 2.5, 7.0];
        let b = [3.0, 10.0];
        let pooled = CellStats::pool(&[
            CellStats::from_samples(&a).unwrap(),
            CellStats::from_samples(&b).unwrap(),
        ])
        .unwrap();
        let all: Vec<f64> = a.iter().chain(&b).copied().collect();
        let direct = CellStats::from_samples(&all).unwrap();
        assert_eq!(pooled.n, 5);
        assert!((pooled.mean_s - direct.mean_s).abs() < 1e-12);
        assert!((pooled.std_s - direct.std_s).abs() < 1e-12);
    }
}

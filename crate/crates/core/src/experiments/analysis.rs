//! Trend and spread checks on duration matrices.

use serde::{Deserialize, Serialize};

use super::matrix::{CellStats, DurationMatrix};

/// A drop in mean duration from a lower to a higher inference frequency that
/// exceeds the pooled standard error of the two cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendViolation {
    pub shots: u64,
    pub train_freq: f64,
    pub lower_inf: f64,
    pub higher_inf: f64,
    pub drop_s: f64,
    pub pooled_se_s: f64,
}

pub fn pooled_std_error(a: &CellStats, b: &CellStats) -> f64 {
    (a.std_error().powi(2) + b.std_error().powi(2)).sqrt()
}

/// Checks that each row is non-decreasing in inference frequency, comparing every
/// ordered pair of present cells.
pub fn monotonicity_violations(matrix: &DurationMatrix) -> Vec<TrendViolation> {
    let mut order: Vec<usize> = (0..matrix.inference_freqs.len()).collect();
    order.sort_by(|&a, &b| matrix.inference_freqs[a].total_cmp(&matrix.inference_freqs[b]));

    let mut out = Vec::new();
    for (i, &tf) in matrix.train_freqs.iter().enumerate() {
        for (k, &lo) in order.iter().enumerate() {
            for &hi in &order[k + 1..] {
                let (Some(a), Some(b)) = (matrix.cell(i, lo), matrix.cell(i, hi)) else {
                    continue;
                };
                let drop = a.mean_s - b.mean_s;
                let se = pooled_std_error(a, b);
                if drop > se {
                    out.push(TrendViolation {
                        shots: matrix.shots,
                        train_freq: tf,
                        lower_inf: matrix.inference_freqs[lo],
                        higher_inf: matrix.inference_freqs[hi],
                        drop_s: drop,
                        pooled_se_s: se,
                    });
                }
            }
        }
    }
    out
}

fn spread(means: impl Iterator<Item = f64>) -> Option<f64> {
    let (lo, hi) = means.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| (lo.min(m), hi.max(m)));
    (lo <= hi).then_some(hi - lo)
}

/// Max minus min of the means across training frequencies at one inference frequency.
pub fn column_spread(matrix: &DurationMatrix, inf_idx: usize) -> Option<f64> {
    spread((0..matrix.train_freqs.len()).filter_map(|i| matrix.cell(i, inf_idx).map(|c| c.mean_s)))
}

/// Max minus min of the means across inference frequencies for one training frequency.
pub fn row_spread(matrix: &DurationMatrix, train_idx: usize) -> Option<f64> {
    spread((0..matrix.inference_freqs.len()).filter_map(|j| matrix.cell(train_idx, j).map(|c| c.mean_s)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadComparison {
    pub shots: u64,
    pub max_column_spread_s: f64,
    pub min_row_spread_s: f64,
}

impl SpreadComparison {
    /// Every column spread is below every row spread.
    pub fn train_freq_insensitive(&self) -> bool {
        self.max_column_spread_s < self.min_row_spread_s
    }
}

pub fn compare_spreads(matrix: &DurationMatrix) -> Option<SpreadComparison> {
    let max_col = (0..matrix.inference_freqs.len())
        .filter_map(|j| column_spread(matrix, j))
        .reduce(f64::max)?;
    let min_row = (0..matrix.train_freqs.len())
        .filter_map(|i| row_spread(matrix, i))
        .reduce(f64::min)?;
    Some(SpreadComparison {
        shots: matrix.shots,
        max_column_spread_s: max_col,
        min_row_spread_s: min_row,
    })
}

/// Lowest cell mean in the column of `inference_freq`, if any cell is present.
pub fn column_min_mean(matrix: &DurationMatrix, inference_freq: f64) -> Option<f64> {
    let j = matrix.index_of_inference(inference_freq)?;
    (0..matrix.train_freqs.len())
        .filter_map(|i| matrix.cell(i, j).map(|c| c.mean_s))
        .reduce(f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(mean_s: f64, std_s: f64) -> Option<CellStats> {
        Some(CellStats { mean_s, std_s, n: 4 })
    }

    fn matrix(rows: Vec<Vec<Option<CellStats>>>) -> DurationMatrix {
        let mut m = DurationMatrix::empty(128, vec![20.0, 50.0], vec![20.0, 50.0, 100.0]);
        m.cells = rows;
        m
    }

    #[test]
    fn drops_within_standard_error_are_tolerated() {
        // se of each cell = 1.0 / 2, pooled = 0.707
        let m = matrix(vec![
            vec![cell(3.0, 1.0), cell(2.5, 1.0), cell(9.0, 1.0)],
            vec![cell(4.0, 1.0), cell(3.0, 1.0), None],
        ]);
        let v = monotonicity_violations(&m);
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].train_freq, v[0].lower_inf, v[0].higher_inf), (50.0, 20.0, 50.0));
        assert!((v[0].pooled_se_s - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn spreads() {
        let m = matrix(vec![
            vec![cell(1.0, 0.0), cell(5.0, 0.0), cell(10.0, 0.0)],
            vec![cell(2.0, 0.0), cell(4.0, 0.0), cell(9.5, 0.0)],
        ]);
        assert_eq!(column_spread(&m, 0), Some(1.0));
        assert_eq!(row_spread(&m, 1), Some(7.5));
        let cmp = compare_spreads(&m).unwrap();
        assert_eq!((cmp.max_column_spread_s, cmp.min_row_spread_s), (1.0, 7.5));
        assert!(cmp.train_freq_insensitive());
        assert_eq!(column_min_mean(&m, 100.0), Some(9.5));
        assert_eq!(column_min_mean(&m, 33.0), None);
    }

    #[test]
    fn empty_matrix_has_no_spread() {
        let m = DurationMatrix::empty(128, vec![20.0], vec![20.0]);
        assert!(compare_spreads(&m).is_none());
        assert!(monotonicity_violations(&m).is_empty());
    }
}

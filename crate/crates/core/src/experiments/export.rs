//! CSV and JSON emission of matrices and reports.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::baseline::BaselineReport;
use super::matrix::DurationMatrix;
use super::ExperimentError;

pub const MATRIX_CSV_HEADER: [&str; 6] = ["train_freq_hz", "inf_freq_hz", "shots", "mean_s", "std_s", "n"];
pub const BASELINE_CSV_HEADER: [&str; 4] = ["variant", "seed", "episodes_to_solve", "episodes_run"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

impl FromStr for ExportFormat {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(ExperimentError::Config(format!("unknown export format `{other}`"))),
        }
    }
}

fn csv_err(e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Csv(e.to_string())
}

/// One row per (train, inference, shots) triple; absent cells leave the
/// statistics blank with `n = 0`.
pub fn write_matrices_csv<W: Write>(matrices: &[DurationMatrix], writer: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(MATRIX_CSV_HEADER).map_err(csv_err)?;
    for m in matrices {
        for (tf, inf, cell) in m.entries() {
            let (mean, std, n) = match cell {
                Some(c) => (c.mean_s.to_string(), c.std_s.to_string(), c.n),
                None => (String::new(), String::new(), 0),
            };
            w.write_record([
                tf.to_string(),
                inf.to_string(),
                m.shots.to_string(),
                mean,
                std,
                n.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|source| ExperimentError::Io {
        path: "<csv writer>".into(),
        source,
    })
}

pub fn write_baseline_csv<W: Write>(report: &BaselineReport, writer: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(BASELINE_CSV_HEADER).map_err(csv_err)?;
    for v in &report.variants {
        for r in &v.runs {
            let solved = r.episodes_to_solve.map(|e| e.to_string()).unwrap_or_default();
            w.write_record([
                v.variant.name().to_owned(),
                r.seed.to_string(),
                solved,
                r.episodes_run.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|source| ExperimentError::Io {
        path: "<csv writer>".into(),
        source,
    })
}

fn create(path: &Path) -> Result<fs::File, ExperimentError> {
    let io = |source| ExperimentError::Io {
        path: path.to_owned(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    fs::File::create(path).map_err(io)
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<(), ExperimentError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| ExperimentError::Json(e.to_string()))?;
    create(path)?
        .write_all(text.as_bytes())
        .map_err(|source| ExperimentError::Io {
            path: path.to_owned(),
            source,
        })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ExperimentError> {
    let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| ExperimentError::Json(format!("{}: {e}", path.display())))
}

pub fn export_matrices(matrices: &[DurationMatrix], path: &Path, format: ExportFormat) -> Result<(), ExperimentError> {
    match format {
        ExportFormat::Csv => write_matrices_csv(matrices, create(path)?),
        ExportFormat::Json => write_json(matrices, path),
    }
}

pub fn export_baseline(report: &BaselineReport, path: &Path, format: ExportFormat) -> Result<(), ExperimentError> {
    match format {
        ExportFormat::Csv => write_baseline_csv(report, create(path)?),
        ExportFormat::Json => write_json(report, path),
    }
}

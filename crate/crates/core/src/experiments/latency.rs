//! Latency report: fitted timing, predicted vs observed rates, feasibility.

use std::io::Read;

use serde::{Deserialize, Serialize};

use super::matrix::DurationMatrix;
use super::ExperimentError;
use crate::hardware::{
    feasibility_report, fit_timing, ExecutionPath, FeasibilityReport, LatencyModel, RateObservation, TimingParams,
    REFERENCE_RATES,
};

/// Iteration rates at one shot count for both execution paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub shots: u64,
    pub standard_stack: f64,
    pub low_level: f64,
}

pub fn reference_rates() -> Vec<RateRow> {
    REFERENCE_RATES
        .iter()
        .map(|&(shots, standard_stack, low_level)| RateRow {
            shots,
            standard_stack,
            low_level,
        })
        .collect()
}

/// Reads `shots,standard_stack,low_level` rows (with header).
pub fn parse_rates_csv<R: Read>(reader: R) -> Result<Vec<RateRow>, ExperimentError> {
    let rows = csv::Reader::from_reader(reader)
        .deserialize()
        .collect::<Result<Vec<RateRow>, _>>()
        .map_err(|e| ExperimentError::Csv(e.to_string()))?;
    if rows.is_empty() {
        return Err(ExperimentError::Csv("no rate rows".into()));
    }
    if let Some(bad) = rows.iter().find(|r| !(r.standard_stack > 0.0 && r.low_level > 0.0)) {
        return Err(ExperimentError::Csv(format!(
            "non-positive rate at {} shots",
            bad.shots
        )));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub shots: u64,
    pub observed_standard_hz: f64,
    pub predicted_standard_hz: f64,
    pub observed_low_level_hz: f64,
    pub predicted_low_level_hz: f64,
    /// Observed low-level rate over observed standard-stack rate.
    pub speedup: f64,
}

impl LatencyRow {
    pub fn low_level_rel_error(&self) -> f64 {
        (self.predicted_low_level_hz - self.observed_low_level_hz).abs() / self.observed_low_level_hz
    }

    pub fn standard_rel_error(&self) -> f64 {
        (self.predicted_standard_hz - self.observed_standard_hz).abs() / self.observed_standard_hz
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub model: LatencyModel,
    /// Reset wait + pulses + readout of the low-level path, seconds.
    pub low_level_floor_s: f64,
    pub rows: Vec<LatencyRow>,
    pub feasibility: Option<FeasibilityReport>,
}

fn observations(rates: &[RateRow], path: ExecutionPath) -> Vec<RateObservation> {
    rates
        .iter()
        .map(|r| RateObservation {
            shots: r.shots,
            rate_hz: match path {
                ExecutionPath::StandardStack => r.standard_stack,
                ExecutionPath::LowLevel => r.low_level,
            },
        })
        .collect()
}

/// Fits both paths and, when matrices are given, joins them with the low-level timing.
pub fn latency_report(
    rates: &[RateRow],
    matrices: Option<&[DurationMatrix]>,
) -> Result<LatencyReport, ExperimentError> {
    let model = LatencyModel {
        standard_stack: fit_timing(
            &observations(rates, ExecutionPath::StandardStack),
            TimingParams::default(),
        )?,
        low_level: fit_timing(
            &observations(rates, ExecutionPath::LowLevel),
            TimingParams::optimized_reset(),
        )?,
    };
    let rows = rates
        .iter()
        .map(|r| {
            Ok(LatencyRow {
                shots: r.shots,
                observed_standard_hz: r.standard_stack,
                predicted_standard_hz: model
                    .iteration_time(r.shots, ExecutionPath::StandardStack)?
                    .iteration_rate_hz,
                observed_low_level_hz: r.low_level,
                predicted_low_level_hz: model
                    .iteration_time(r.shots, ExecutionPath::LowLevel)?
                    .iteration_rate_hz,
                speedup: r.low_level / r.standard_stack,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let feasibility = matrices
        .map(|m| feasibility_report(m, &model.low_level, ExecutionPath::LowLevel))
        .transpose()?;
    Ok(LatencyReport {
        low_level_floor_s: model.low_level.physical_per_shot_s(),
        model,
        rows,
        feasibility,
    })
}

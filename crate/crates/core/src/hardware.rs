//! Pulse-level compilation of the circuit to phased-RX (PRX) drive pulses and
//! a linear execution-latency model for two execution paths.
//!
//! `PRX(phase, angle) = exp(-i (X cos(phase) + Y sin(phase)) angle / 2)`.
//! Z rotations are virtual: they shift the phase of later pulses and leave
//! a final Z rotation that a Z-basis measurement cannot see.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiments::matrix::DurationMatrix;
use crate::quantum::{expectation_z, Amplitudes, CircuitInput, Unitary2};

/// Drive pulse length on the reference device.
pub const PULSE_DURATION_NS: f64 = 120.0;

#[derive(Debug, Error, PartialEq)]
pub enum HardwareError {
    #[error("shot count must be at least 1")]
    ZeroShots,
    #[error("need observations at two or more distinct shot counts")]
    DegenerateDesign,
    #[error("observed rate must be positive and finite, got {0}")]
    InvalidRate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrxPulse {
    /// Drive-axis angle in the XY plane (rad).
    pub phase: f64,
    /// Rotation angle (rad).
    pub angle: f64,
    pub duration_ns: f64,
}

impl PrxPulse {
    pub fn new(phase: f64, angle: f64) -> Self {
        Self {
            phase,
            angle,
            duration_ns: PULSE_DURATION_NS,
        }
    }
}

pub fn prx_unitary(pulse: &PrxPulse) -> Unitary2 {
    let (s, c) = (pulse.angle / 2.0).sin_cos();
    let (sp, cp) = pulse.phase.sin_cos();
    // cos(a/2) I - i sin(a/2) (cos(p) X + sin(p) Y)
    let diag = Complex64::new(c, 0.0);
    let upper = Complex64::new(-s * sp, -s * cp);
    let lower = Complex64::new(s * sp, -s * cp);
    Unitary2([[diag, upper], [lower, diag]])
}

/// Three pulses in the order they are played.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence(pub [PrxPulse; 3]);

impl PulseSequence {
    pub fn pulses(&self) -> &[PrxPulse; 3] {
        &self.0
    }

    pub fn duration_ns(&self) -> f64 {
        self.0.iter().map(|p| p.duration_ns).sum()
    }

    /// Product of the pulse unitaries, last-played pulse leftmost.
    pub fn unitary(&self) -> Unitary2 {
        self.0.iter().fold(Unitary2::identity(), |acc, p| prx_unitary(p) * acc)
    }
}

/// Compiles the circuit to `PRX(pi/2, pi/2)`, `PRX(pi/2 - b1, b2)`,
/// `PRX(-b1 - b3, theta)` written as (phase, angle), played in that order.
///
/// The first pulse is `Ry(pi/2)`, which takes `|0>` to `|+>` like the
/// Hadamard. The encoding Z rotations are absorbed into the phases of the
/// later pulses.
pub fn compile_to_prx(input: &CircuitInput) -> PulseSequence {
    let b = &input.angles;
    PulseSequence([
        PrxPulse::new(FRAC_PI_2, FRAC_PI_2),
        PrxPulse::new(FRAC_PI_2 - b.beta1, b.beta2),
        PrxPulse::new(-b.beta1 - b.beta3, input.theta),
    ])
}

/// `|<Z>_pulses - <Z>_circuit|` starting from `|0>`.
pub fn verify_equivalence(input: &CircuitInput) -> f64 {
    let pulsed = compile_to_prx(input).unitary().apply(&Amplitudes::zero());
    (pulsed.expectation_z() - expectation_z(input)).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionPath {
    /// Circuits submitted through the vendor software stack (recompiles per parameter change).
    StandardStack,
    /// Command-table driven electronics; only waveforms are re-uploaded.
    LowLevel,
}

impl fmt::Display for ExecutionPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExecutionPath::StandardStack => f.write_str("standard_stack"),
            ExecutionPath::LowLevel => f.write_str("low_level"),
        }
    }
}

/// Per-shot and fixed per-iteration execution times for one execution path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingParams {
    pub reset_wait_us: f64,
    pub readout_us: f64,
    pub pulse_ns: f64,
    pub pulses_per_shot: u32,
    /// Fixed cost of one policy evaluation (upload, trigger, fetch), seconds.
    pub fixed_overhead_s: f64,
    /// Measured per-shot time; overrides the physical sum when present.
    pub fitted_per_shot_s: Option<f64>,
}

impl Default for TimingParams {
    fn default() -> Self {
        Self {
            reset_wait_us: 398.0,
            readout_us: 1.0,
            pulse_ns: PULSE_DURATION_NS,
            pulses_per_shot: 3,
            fixed_overhead_s: 0.0,
            fitted_per_shot_s: None,
        }
    }
}

impl TimingParams {
    /// Reset wait tuned down to 220 us.
    pub fn optimized_reset() -> Self {
        Self {
            reset_wait_us: 220.0,
            ..Self::default()
        }
    }

    /// Reset wait, drive pulses and readout of one shot, in seconds.
    pub fn physical_per_shot_s(&self) -> f64 {
        (self.reset_wait_us + self.readout_us) * 1e-6 + self.pulses_per_shot as f64 * self.pulse_ns * 1e-9
    }

    pub fn per_shot_s(&self) -> f64 {
        self.fitted_per_shot_s.unwrap_or_else(|| self.physical_per_shot_s())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyEstimate {
    pub iteration_time_s: f64,
    pub iteration_rate_hz: f64,
    /// One circuit evaluation per control step.
    pub max_control_freq_hz: f64,
}

pub fn iteration_time(n_shots: u64, timing: &TimingParams) -> Result<LatencyEstimate, HardwareError> {
    if n_shots == 0 {
        return Err(HardwareError::ZeroShots);
    }
    let t = timing.fixed_overhead_s + n_shots as f64 * timing.per_shot_s();
    Ok(LatencyEstimate {
        iteration_time_s: t,
        iteration_rate_hz: 1.0 / t,
        max_control_freq_hz: 1.0 / t,
    })
}

/// Timing for both execution paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub standard_stack: TimingParams,
    pub low_level: TimingParams,
}

impl LatencyModel {
    pub fn timing(&self, path: ExecutionPath) -> &TimingParams {
        match path {
            ExecutionPath::StandardStack => &self.standard_stack,
            ExecutionPath::LowLevel => &self.low_level,
        }
    }

    pub fn iteration_time(&self, n_shots: u64, path: ExecutionPath) -> Result<LatencyEstimate, HardwareError> {
        iteration_time(n_shots, self.timing(path))
    }
}

/// Measured iteration rate at a shot count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateObservation {
    pub shots: u64,
    pub rate_hz: f64,
}

/// Iteration rates measured on the reference device: (shots, standard stack, low level).
pub const REFERENCE_RATES: [(u64, f64, f64); 4] = [
    (128, 0.144, 6.23),
    (256, 0.143, 5.62),
    (512, 0.142, 4.28),
    (1024, 0.144, 2.71),
];

pub fn reference_observations(path: ExecutionPath) -> Vec<RateObservation> {
    REFERENCE_RATES
        .iter()
        .map(|&(shots, std, low)| RateObservation {
            shots,
            rate_hz: match path {
                ExecutionPath::StandardStack => std,
                ExecutionPath::LowLevel => low,
            },
        })
        .collect()
}

/// Ordinary least-squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
}

pub fn least_squares(points: &[(f64, f64)]) -> Result<LinearFit, HardwareError> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return Err(HardwareError::DegenerateDesign);
    }
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    if sxx <= f64::EPSILON * mean_x.abs().max(1.0) {
        return Err(HardwareError::DegenerateDesign);
    }
    let slope = sxy / sxx;
    Ok(LinearFit {
        intercept: mean_y - slope * mean_x,
        slope,
    })
}

/// Fits `iteration_time = fixed + per_shot * shots` to observed rates.
///
/// The slope is constrained to be nonnegative: if the unconstrained fit
/// comes out negative, the time is modeled as constant at its mean.
/// Physical fields are taken from `base`.
pub fn fit_timing(observations: &[RateObservation], base: TimingParams) -> Result<TimingParams, HardwareError> {
    let mut points = Vec::with_capacity(observations.len());
    for obs in observations {
        if !(obs.rate_hz.is_finite() && obs.rate_hz > 0.0) {
            return Err(HardwareError::InvalidRate(obs.rate_hz));
        }
        points.push((obs.shots as f64, 1.0 / obs.rate_hz));
    }
    let mut fit = least_squares(&points)?;
    if fit.slope < 0.0 {
        fit = LinearFit {
            intercept: points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64,
            slope: 0.0,
        };
    }
    Ok(TimingParams {
        fixed_overhead_s: fit.intercept,
        fitted_per_shot_s: Some(fit.slope),
        ..base
    })
}

/// Fits both paths to the reference measurements.
pub fn reference_latency_model() -> LatencyModel {
    let fit = |path, base| fit_timing(&reference_observations(path), base).expect("reference data is well-posed");
    LatencyModel {
        standard_stack: fit(ExecutionPath::StandardStack, TimingParams::default()),
        low_level: fit(ExecutionPath::LowLevel, TimingParams::optimized_reset()),
    }
}

/// Mean duration an operating point needs to count as balancing.
pub const FEASIBLE_DURATION_S: f64 = 9.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub inference_freq_hz: f64,
    pub shots: u64,
    pub max_control_freq_hz: f64,
    pub latency_feasible: bool,
    /// Mean duration pooled over training frequencies; absent if no data.
    pub mean_duration_s: Option<f64>,
    pub performance_feasible: bool,
    pub jointly_feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub path: ExecutionPath,
    pub duration_threshold_s: f64,
    pub points: Vec<OperatingPoint>,
}

impl FeasibilityReport {
    pub fn feasible_points(&self) -> impl Iterator<Item = &OperatingPoint> {
        self.points.iter().filter(|p| p.jointly_feasible)
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Joins duration matrices (one per shot count) with the latency of `path`.
pub fn feasibility_report(
    matrices: &[DurationMatrix],
    timing: &TimingParams,
    path: ExecutionPath,
) -> Result<FeasibilityReport, HardwareError> {
    let mut points = Vec::new();
    for matrix in matrices {
        let latency = iteration_time(matrix.shots, timing)?;
        for (j, &inf_freq) in matrix.inference_freqs.iter().enumerate() {
            let mean = matrix.pooled_inference_column(j).map(|c| c.mean_s);
            let latency_feasible = latency.max_control_freq_hz >= inf_freq;
            let performance_feasible = mean.is_some_and(|m| m >= FEASIBLE_DURATION_S);
            points.push(OperatingPoint {
                inference_freq_hz: inf_freq,
                shots: matrix.shots,
                max_control_freq_hz: latency.max_control_freq_hz,
                latency_feasible,
                mean_duration_s: mean,
                performance_feasible,
                jointly_feasible: latency_feasible && performance_feasible,
            });
        }
    }
    Ok(FeasibilityReport {
        path,
        duration_threshold_s: FEASIBLE_DURATION_S,
        points,
    })
}

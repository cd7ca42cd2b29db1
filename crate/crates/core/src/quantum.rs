//! Single-qubit circuit `Rx(theta) Rz(b3) Ry(b2) Rz(b1) H |0>` measured in Z.
//!
//! Gate conventions: `Rz(l) = diag(e^{-il/2}, e^{il/2})`,
//! `Ry(l) = exp(-i l Y / 2)`, `Rx(l) = exp(-i l X / 2)`.
//!
//! Finite-shot estimates are drawn as one binomial per circuit execution on
//! the noisy 0-outcome probability. Gate noise is single-qubit depolarizing,
//! which only shrinks the Bloch vector, and readout noise is an asymmetric
//! bit flip; both are exact as a classical mixture for a Z measurement.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};
use std::ops::Mul;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::ReducedState;

#[derive(Debug, Error, PartialEq)]
pub enum QuantumError {
    #[error("shot count must be at least 1")]
    ZeroShots,
    #[error("{name} must be a probability in [0, 1], got {value}")]
    InvalidProbability { name: &'static str, value: f64 },
}

/// A 2x2 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary2(pub [[Complex64; 2]; 2]);

impl Unitary2 {
    pub fn identity() -> Self {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        Unitary2([[o, z], [z, o]])
    }

    pub fn hadamard() -> Self {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Unitary2([[h, h], [h, -h]])
    }

    pub fn rx(angle: f64) -> Self {
        let (s, c) = (angle / 2.0).sin_cos();
        let (c, ms) = (Complex64::new(c, 0.0), Complex64::new(0.0, -s));
        Unitary2([[c, ms], [ms, c]])
    }

    pub fn ry(angle: f64) -> Self {
        let (s, c) = (angle / 2.0).sin_cos();
        let (c, s) = (Complex64::new(c, 0.0), Complex64::new(s, 0.0));
        Unitary2([[c, -s], [s, c]])
    }

    pub fn rz(angle: f64) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Unitary2([
            [Complex64::from_polar(1.0, -angle / 2.0), z],
            [z, Complex64::from_polar(1.0, angle / 2.0)],
        ])
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Unitary2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn apply(&self, state: &Amplitudes) -> Amplitudes {
        let m = &self.0;
        Amplitudes {
            a0: m[0][0] * state.a0 + m[0][1] * state.a1,
            a1: m[1][0] * state.a0 + m[1][1] * state.a1,
        }
    }

    /// Largest entrywise deviation from another matrix.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut d: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                d = d.max((self.0[r][c] - other.0[r][c]).norm());
            }
        }
        d
    }
}

impl Mul for Unitary2 {
    type Output = Unitary2;

    fn mul(self, rhs: Unitary2) -> Unitary2 {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        Unitary2(out)
    }
}

/// Single-qubit pure state `a0 |0> + a1 |1>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Amplitudes {
    pub a0: Complex64,
    pub a1: Complex64,
}

impl Amplitudes {
    pub fn zero() -> Self {
        Self {
            a0: Complex64::new(1.0, 0.0),
            a1: Complex64::new(0.0, 0.0),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a0.norm_sqr() + self.a1.norm_sqr()
    }

    pub fn expectation_z(&self) -> f64 {
        self.a0.norm_sqr() - self.a1.norm_sqr()
    }
}

/// Encoding angles produced from a reduced observation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EncodingAngles {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
}

impl EncodingAngles {
    pub const fn new(beta1: f64, beta2: f64, beta3: f64) -> Self {
        Self { beta1, beta2, beta3 }
    }
}

/// Element-wise arctan: `x_dot -> beta1`, `phi -> beta2`, `phi_dot -> beta3`.
pub fn encode_features(obs: &ReducedState) -> EncodingAngles {
    EncodingAngles::new(obs.x_dot.atan(), obs.phi.atan(), obs.phi_dot.atan())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CircuitInput {
    pub angles: EncodingAngles,
    /// Trainable rotation angle.
    pub theta: f64,
}

impl CircuitInput {
    pub const fn new(beta1: f64, beta2: f64, beta3: f64, theta: f64) -> Self {
        Self {
            angles: EncodingAngles::new(beta1, beta2, beta3),
            theta,
        }
    }

    pub fn with_theta(self, theta: f64) -> Self {
        Self { theta, ..self }
    }
}

/// The full circuit unitary, built gate by gate.
pub fn circuit_unitary(input: &CircuitInput) -> Unitary2 {
    let b = &input.angles;
    Unitary2::rx(input.theta)
        * Unitary2::rz(b.beta3)
        * Unitary2::ry(b.beta2)
        * Unitary2::rz(b.beta1)
        * Unitary2::hadamard()
}

pub fn statevector(input: &CircuitInput) -> Amplitudes {
    circuit_unitary(input).apply(&Amplitudes::zero())
}

/// `<Z>` of the circuit output, closed form.
pub fn expectation_z(input: &CircuitInput) -> f64 {
    let b = &input.angles;
    let (s1, c1) = b.beta1.sin_cos();
    let (s2, c2) = b.beta2.sin_cos();
    let (s3, c3) = b.beta3.sin_cos();
    let (st, ct) = input.theta.sin_cos();
    (c1 * c2 * s3 + s1 * c3) * st - c1 * s2 * ct
}

/// Readout and gate noise for a finite-shot backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// P(read 1 | prepared 0).
    pub eps01: f64,
    /// P(read 0 | prepared 1).
    pub eps10: f64,
    /// Depolarizing probability per physical gate.
    pub gate_depol: f64,
    /// Physical gates the depolarizing channel is applied for.
    #[serde(default = "default_depol_gates")]
    pub depol_gates: u32,
}

fn default_depol_gates() -> u32 {
    3
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self::ideal()
    }
}

impl NoiseParams {
    pub const fn ideal() -> Self {
        Self {
            eps01: 0.0,
            eps10: 0.0,
            gate_depol: 0.0,
            depol_gates: 3,
        }
    }

    /// Emulated device: readout errors 2.95 % / 6.15 %, and a per-gate
    /// depolarizing rate from a 99.76 % randomized-benchmarking fidelity.
    pub fn emulated_device() -> Self {
        Self {
            eps01: 0.0295,
            eps10: 0.0615,
            gate_depol: 2.0 * (1.0 - 0.9976),
            depol_gates: 3,
        }
    }

    pub fn validate(&self) -> Result<(), QuantumError> {
        for (name, value) in [
            ("eps01", self.eps01),
            ("eps10", self.eps10),
            ("gate_depol", self.gate_depol),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(QuantumError::InvalidProbability { name, value });
            }
        }
        Ok(())
    }

    pub fn readout_fidelity(&self) -> f64 {
        1.0 - (self.eps01 + self.eps10) / 2.0
    }

    pub fn is_ideal(&self) -> bool {
        self.eps01 == 0.0 && self.eps10 == 0.0 && self.gate_depol == 0.0
    }

    /// Probability of reporting outcome 0 for a circuit with ideal `<Z> = z`.
    pub fn reported_zero_probability(&self, z: f64) -> f64 {
        let z = z * (1.0 - self.gate_depol).powi(self.depol_gates as i32);
        let p0 = (1.0 + z) / 2.0;
        (p0 * (1.0 - self.eps01) + (1.0 - p0) * self.eps10).clamp(0.0, 1.0)
    }

    /// `E[estimate_z]` under this noise for ideal `<Z> = z`.
    pub fn expected_estimate(&self, z: f64) -> f64 {
        2.0 * self.reported_zero_probability(z) - 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ShotCounts {
    pub n0: u64,
    pub n1: u64,
}

impl ShotCounts {
    pub fn total(&self) -> u64 {
        self.n0 + self.n1
    }
}

/// Samples `n_shots` Z-basis outcomes of a circuit with ideal expectation `z`.
pub fn sample_counts_for_expectation<R: Rng + ?Sized>(
    z: f64,
    n_shots: u64,
    noise: &NoiseParams,
    rng: &mut R,
) -> Result<ShotCounts, QuantumError> {
    if n_shots == 0 {
        return Err(QuantumError::ZeroShots);
    }
    let p0 = noise.reported_zero_probability(z);
    let n0 = Binomial::new(n_shots, p0)
        .map_err(|_| QuantumError::InvalidProbability { name: "p0", value: p0 })?
        .sample(rng);
    Ok(ShotCounts { n0, n1: n_shots - n0 })
}

pub fn sample_counts<R: Rng + ?Sized>(
    input: &CircuitInput,
    n_shots: u64,
    noise: &NoiseParams,
    rng: &mut R,
) -> Result<ShotCounts, QuantumError> {
    sample_counts_for_expectation(expectation_z(input), n_shots, noise, rng)
}

/// Empirical `<Z>`; returns 0 for an empty record.
pub fn estimate_z(counts: &ShotCounts) -> f64 {
    let total = counts.total();
    if total == 0 {
        return 0.0;
    }
    2.0 * counts.n0 as f64 / total as f64 - 1.0
}

/// How circuit expectation values are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Evaluator {
    Analytic,
    Sampled { shots: u64, noise: NoiseParams },
}

impl Evaluator {
    pub fn evaluate<R: Rng + ?Sized>(&self, input: &CircuitInput, rng: &mut R) -> Result<f64, QuantumError> {
        match self {
            Evaluator::Analytic => Ok(expectation_z(input)),
            Evaluator::Sampled { shots, noise } => sample_counts(input, *shots, noise, rng).map(|c| estimate_z(&c)),
        }
    }
}

/// `d<Z>/dtheta` by the two-term shift rule. Sampled evaluators draw the two
/// shifted circuits independently.
pub fn parameter_shift_grad<R: Rng + ?Sized>(
    input: &CircuitInput,
    evaluator: &Evaluator,
    rng: &mut R,
) -> Result<f64, QuantumError> {
    let plus = evaluator.evaluate(&input.with_theta(input.theta + FRAC_PI_2), rng)?;
    let minus = evaluator.evaluate(&input.with_theta(input.theta - FRAC_PI_2), rng)?;
    Ok(0.5 * (plus - minus))
}

//! CartPole physics with a configurable control frequency.
//!
//! The equations of motion and constants are the classic-control CartPole
//! ones (explicit Euler, position updated with the pre-step velocity). The
//! episode always lasts a fixed amount of simulated time, so the step budget
//! scales with the control frequency.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("control frequency must be positive and finite, got {0}")]
    InvalidFrequency(f64),
    #[error("episode duration must be positive and finite, got {0}")]
    InvalidDuration(f64),
    #[error("episode already finished; call reset before stepping")]
    EpisodeFinished,
}

/// Full physical state of the cart-pole.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CartState {
    /// Cart position (m).
    pub x: f64,
    /// Cart velocity (m/s).
    pub x_dot: f64,
    /// Pole angle from vertical (rad), positive leaning right.
    pub phi: f64,
    /// Pole angular velocity (rad/s).
    pub phi_dot: f64,
}

impl CartState {
    pub const fn new(x: f64, x_dot: f64, phi: f64, phi_dot: f64) -> Self {
        Self { x, x_dot, phi, phi_dot }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.x_dot.is_finite() && self.phi.is_finite() && self.phi_dot.is_finite()
    }
}

impl std::ops::Neg for CartState {
    type Output = CartState;

    fn neg(self) -> CartState {
        CartState::new(-self.x, -self.x_dot, -self.phi, -self.phi_dot)
    }
}

/// The observation agents see: the cart position is dropped.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReducedState {
    pub x_dot: f64,
    pub phi: f64,
    pub phi_dot: f64,
}

impl ReducedState {
    pub const fn new(x_dot: f64, phi: f64, phi_dot: f64) -> Self {
        Self { x_dot, phi, phi_dot }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x_dot, self.phi, self.phi_dot]
    }
}

pub fn reduced_observation(state: &CartState) -> ReducedState {
    ReducedState::new(state.x_dot, state.phi, state.phi_dot)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Left,
    Right,
}

impl Action {
    /// Index into the policy's probability vector.
    pub const fn index(self) -> usize {
        match self {
            Action::Left => 0,
            Action::Right => 1,
        }
    }

    pub fn from_index(index: usize) -> Self {
        if index == 0 {
            Action::Left
        } else {
            Action::Right
        }
    }

    pub const fn mirrored(self) -> Self {
        match self {
            Action::Left => Action::Right,
            Action::Right => Action::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsParams {
    pub gravity: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    /// Half of the pole length (m).
    pub half_pole_length: f64,
    pub force_mag: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self {
            gravity: 9.8,
            cart_mass: 1.0,
            pole_mass: 0.1,
            half_pole_length: 0.5,
            force_mag: 10.0,
        }
    }
}

impl PhysicsParams {
    /// Cart and pole accelerations `(x_ddot, phi_ddot)` under the given force.
    pub fn accelerations(&self, state: &CartState, force: f64) -> (f64, f64) {
        let total_mass = self.cart_mass + self.pole_mass;
        let pole_mass_length = self.pole_mass * self.half_pole_length;
        let (sin_phi, cos_phi) = state.phi.sin_cos();

        let temp = (force + pole_mass_length * state.phi_dot * state.phi_dot * sin_phi) / total_mass;
        let phi_acc = (self.gravity * sin_phi - cos_phi * temp)
            / (self.half_pole_length * (4.0 / 3.0 - self.pole_mass * cos_phi * cos_phi / total_mass));
        let x_acc = temp - pole_mass_length * phi_acc * cos_phi / total_mass;
        (x_acc, phi_acc)
    }

    /// One explicit Euler step of length `dt`.
    pub fn integrate(&self, state: &CartState, action: Action, dt: f64) -> CartState {
        let force = match action {
            Action::Right => self.force_mag,
            Action::Left => -self.force_mag,
        };
        let (x_acc, phi_acc) = self.accelerations(state, force);
        CartState {
            x: state.x + dt * state.x_dot,
            x_dot: state.x_dot + dt * x_acc,
            phi: state.phi + dt * state.phi_dot,
            phi_dot: state.phi_dot + dt * phi_acc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    /// Control frequency (Hz); one action per `1 / control_freq` seconds.
    pub control_freq: f64,
    /// Simulated episode length (s).
    pub episode_duration: f64,
    pub x_limit: f64,
    pub phi_limit: f64,
    /// Reward is only paid while `|phi| <= reward_band`.
    pub reward_band: f64,
    pub physics: PhysicsParams,
}

impl EnvConfig {
    pub fn new(control_freq: f64) -> Result<Self, EnvError> {
        Self::with_duration(control_freq, 10.0)
    }

    pub fn with_duration(control_freq: f64, episode_duration: f64) -> Result<Self, EnvError> {
        if !(control_freq.is_finite() && control_freq > 0.0) {
            return Err(EnvError::InvalidFrequency(control_freq));
        }
        if !(episode_duration.is_finite() && episode_duration > 0.0) {
            return Err(EnvError::InvalidDuration(episode_duration));
        }
        Ok(Self {
            control_freq,
            episode_duration,
            x_limit: 2.4,
            phi_limit: 0.418,
            reward_band: 0.2,
            physics: PhysicsParams::default(),
        })
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.control_freq
    }

    pub fn max_steps(&self) -> usize {
        (self.episode_duration * self.control_freq).round() as usize
    }

    /// Highest achievable return: every step in the reward band.
    pub fn max_return(&self) -> f64 {
        self.max_steps() as f64
    }

    pub fn out_of_bounds(&self, state: &CartState) -> bool {
        state.x.abs() > self.x_limit || state.phi.abs() > self.phi_limit
    }

    pub fn reward(&self, state: &CartState) -> f64 {
        if state.phi.abs() <= self.reward_band {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub next_state: CartState,
    pub reward: f64,
    /// A bound was violated; no bootstrapping past this step.
    pub terminated: bool,
    /// The time limit was reached with the pole still up.
    pub truncated: bool,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

/// Draws each state component uniformly from `[-0.05, 0.05)`.
pub fn reset<R: Rng + ?Sized>(rng: &mut R) -> CartState {
    let mut draw = || rng.random_range(-0.05..0.05);
    CartState {
        x: draw(),
        x_dot: draw(),
        phi: draw(),
        phi_dot: draw(),
    }
}

/// A single CartPole episode: current state plus step accounting.
#[derive(Debug, Clone)]
pub struct CartPole {
    config: EnvConfig,
    state: CartState,
    steps: usize,
    finished: bool,
}

impl CartPole {
    pub fn new(config: EnvConfig, initial: CartState) -> Self {
        Self {
            config,
            state: initial,
            steps: 0,
            finished: false,
        }
    }

    pub fn reset<R: Rng + ?Sized>(config: EnvConfig, rng: &mut R) -> Self {
        Self::new(config, reset(rng))
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &CartState {
        &self.state
    }

    pub fn observation(&self) -> ReducedState {
        reduced_observation(&self.state)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult, EnvError> {
        if self.finished {
            return Err(EnvError::EpisodeFinished);
        }
        let next = self.config.physics.integrate(&self.state, action, self.config.dt());
        self.state = next;
        self.steps += 1;

        let terminated = self.config.out_of_bounds(&next);
        let truncated = !terminated && self.steps >= self.config.max_steps();
        self.finished = terminated || truncated;
        Ok(StepResult {
            next_state: next,
            reward: self.config.reward(&next),
            terminated,
            truncated,
        })
    }
}

//! Hybrid single-qubit / classical actor-critic agents for CartPole, with
//! finite-shot circuit evaluation, frequency and shot-budget sweeps, and a
//! pulse-level latency model for QPU inference.

pub mod agents;
pub mod dynamics;
pub mod experiments;
pub mod hardware;
pub mod neural;
pub mod quantum;
pub mod training;

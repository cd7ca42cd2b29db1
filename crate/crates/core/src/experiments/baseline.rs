//! Classical vs hybrid sample-efficiency ensembles.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BaselineConfig, Variant};
use super::ExperimentError;
use crate::agents::Backend;
use crate::training::{save_checkpoint, train_agent, AgentKind, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub episodes_to_solve: Option<usize>,
    pub episodes_run: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub runs: Vec<SeedOutcome>,
    pub solved: usize,
    pub unsolved: usize,
    /// Mean and sample std of episodes-to-solve over the solved runs.
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl VariantSummary {
    fn new(variant: Variant, mut runs: Vec<SeedOutcome>) -> Self {
        runs.sort_by_key(|r| r.seed);
        let solved: Vec<f64> = runs
            .iter()
            .filter_map(|r| r.episodes_to_solve)
            .map(|e| e as f64)
            .collect();
        let (mean, std) = match solved.len() {
            0 => (None, None),
            n => {
                let mean = solved.iter().sum::<f64>() / n as f64;
                let var = if n > 1 {
                    solved.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64
                } else {
                    0.0
                };
                (Some(mean), Some(var.sqrt()))
            }
        };
        Self {
            variant,
            solved: solved.len(),
            unsolved: runs.len() - solved.len(),
            runs,
            mean,
            std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub control_freq: f64,
    pub episode_cap: usize,
    pub variants: Vec<VariantSummary>,
}

impl BaselineReport {
    pub fn variant(&self, variant: Variant) -> Option<&VariantSummary> {
        self.variants.iter().find(|v| v.variant == variant)
    }
}

/// Agent family and training setup of one baseline run.
pub fn variant_setup(config: &BaselineConfig, variant: Variant, seed: u64) -> (AgentKind, TrainConfig) {
    let (kind, lr, backend) = match variant {
        Variant::Classical => (AgentKind::Classical, config.classical_lr, Backend::Analytic),
        Variant::HybridAnalytic => (AgentKind::Hybrid, config.hybrid_lr, Backend::Analytic),
        Variant::HybridShot => (
            AgentKind::Hybrid,
            config.hybrid_lr,
            Backend::Sampled {
                shots: config.train_shots,
            },
        ),
    };
    let train = TrainConfig {
        gamma: config.gamma,
        lr_actor: lr.actor,
        lr_critic: lr.critic,
        episodes: config.episode_cap,
        control_freq: config.control_freq,
        backend,
        seed,
        stop_on_success: true,
        ..TrainConfig::default()
    };
    (kind, train)
}

/// Trains every (variant, seed) pair. With `out` set, checkpoints are written to
/// `out/<variant>/seed_<seed>.json`.
pub fn run_baseline(config: &BaselineConfig, out: Option<&Path>) -> Result<BaselineReport, ExperimentError> {
    let units: Vec<(Variant, u64)> = config
        .variants
        .iter()
        .flat_map(|&v| (0..config.seeds).map(move |i| (v, config.base_seed + i)))
        .collect();

    let outcomes = units
        .par_iter()
        .map(|&(variant, seed)| {
            let (kind, train) = variant_setup(config, variant, seed);
            let mut agent = kind.init(seed);
            let (summary, checkpoint) = train_agent(&mut agent, &train)?;
            if let Some(dir) = out {
                let path = dir.join(variant.name()).join(format!("seed_{seed}.json"));
                save_checkpoint(&path, &checkpoint)?;
            }
            log::info!(
                "{} seed {seed}: solved at {:?} after {:.1}s",
                variant.name(),
                summary.episodes_to_solve,
                summary.wall_time_s
            );
            Ok((
                variant,
                SeedOutcome {
                    seed,
                    episodes_to_solve: summary.episodes_to_solve,
                    episodes_run: summary.returns.len(),
                    wall_time_s: summary.wall_time_s,
                },
            ))
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;

    let variants = config
        .variants
        .iter()
        .map(|&v| {
            let runs = outcomes
                .iter()
                .filter(|(w, _)| *w == v)
                .map(|(_, o)| o.clone())
                .collect();
            VariantSummary::new(v, runs)
        })
        .collect();
    Ok(BaselineReport {
        control_freq: config.control_freq,
        episode_cap: config.episode_cap,
        variants,
    })
}

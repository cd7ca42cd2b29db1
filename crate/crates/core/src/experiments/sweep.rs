//! Train-frequency sweep and the train x inference duration matrices.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::SweepConfig;
use super::matrix::{CellStats, DurationMatrix};
use super::ExperimentError;
use crate::agents::{Agent, Backend};
use crate::dynamics::EnvConfig;
use crate::training::{evaluate, load_checkpoint, save_checkpoint, train_agent, AgentKind, RngStreams, TrainConfig};

/// Directory-safe frequency label: `33` or `12p5`.
pub fn freq_label(freq: f64) -> String {
    if freq.fract() == 0.0 {
        format!("{freq:.0}")
    } else {
        freq.to_string().replace('.', "p")
    }
}

/// `root/train_<f>hz/seed_<seed>.json`
pub fn checkpoint_path(root: &Path, train_freq: f64, seed: u64) -> PathBuf {
    root.join(format!("train_{}hz", freq_label(train_freq)))
        .join(format!("seed_{seed}.json"))
}

pub fn seeds(config: &SweepConfig) -> impl Iterator<Item = u64> + '_ {
    (0..config.seeds).map(move |i| config.base_seed + i)
}

pub fn train_config(config: &SweepConfig, train_freq: f64, seed: u64) -> TrainConfig {
    TrainConfig {
        gamma: config.gamma,
        lr_actor: config.lr.actor,
        lr_critic: config.lr.critic,
        episodes: config.episodes,
        control_freq: train_freq,
        episode_duration: config.episode_duration,
        backend: Backend::Sampled {
            shots: config.train_shots,
        },
        seed,
        stop_on_success: false,
        ..TrainConfig::default()
    }
}

/// A hybrid agent trained for one (frequency, seed) unit.
#[derive(Debug, Clone)]
pub struct TrainedAgent {
    pub train_freq: f64,
    pub seed: u64,
    pub agent: Agent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub train_freq: f64,
    pub seed: u64,
    pub path: PathBuf,
    pub episodes_to_solve: Option<usize>,
    /// Set when training or writing the checkpoint failed.
    pub error: Option<String>,
}

/// Trains all units in memory.
pub fn train_agents(config: &SweepConfig) -> Result<Vec<TrainedAgent>, ExperimentError> {
    let units = units(config);
    units
        .par_iter()
        .map(|&(train_freq, seed)| {
            let mut agent = AgentKind::Hybrid.init(seed);
            train_agent(&mut agent, &train_config(config, train_freq, seed))?;
            Ok(TrainedAgent {
                train_freq,
                seed,
                agent,
            })
        })
        .collect()
}

/// Trains all units and writes one checkpoint per unit under `root`.
/// Failures are recorded per run; the remaining runs still complete.
pub fn run_train_sweep(config: &SweepConfig, root: &Path) -> Vec<SweepRun> {
    units(config)
        .par_iter()
        .map(|&(train_freq, seed)| {
            let path = checkpoint_path(root, train_freq, seed);
            let mut agent = AgentKind::Hybrid.init(seed);
            let result = train_agent(&mut agent, &train_config(config, train_freq, seed))
                .map_err(ExperimentError::from)
                .and_then(|(summary, checkpoint)| {
                    save_checkpoint(&path, &checkpoint)?;
                    Ok(summary.episodes_to_solve)
                });
            if let Err(e) = &result {
                log::error!("train {train_freq} Hz seed {seed}: {e}");
            }
            SweepRun {
                train_freq,
                seed,
                episodes_to_solve: result.as_ref().ok().copied().flatten(),
                error: result.err().map(|e| e.to_string()),
                path,
            }
        })
        .collect()
}

/// Loads every checkpoint of the sweep layout. Missing or unreadable files are
/// skipped with a warning; their cells end up absent.
pub fn load_agents(config: &SweepConfig, root: &Path) -> Vec<TrainedAgent> {
    units(config)
        .into_iter()
        .filter_map(|(train_freq, seed)| {
            let path = checkpoint_path(root, train_freq, seed);
            match load_checkpoint(&path) {
                Ok(ckpt) => Some(TrainedAgent {
                    train_freq,
                    seed,
                    agent: ckpt.agent,
                }),
                Err(e) => {
                    log::warn!("skipping {}: {e}", path.display());
                    None
                }
            }
        })
        .collect()
}

/// Balancing durations (seconds) of one agent at one inference setting.
pub fn eval_durations(
    config: &SweepConfig,
    trained: &TrainedAgent,
    inference_freq: f64,
    shots: u64,
) -> Result<Vec<f64>, ExperimentError> {
    let env =
        EnvConfig::with_duration(inference_freq, config.episode_duration).map_err(crate::training::TrainError::from)?;
    let backend = Backend::SampledNoisy {
        shots,
        noise: config.noise,
    };
    let label = format!("eval/{}/{shots}", freq_label(inference_freq));
    let mut streams = RngStreams::labelled(trained.seed, &label);
    let trajectories = evaluate(
        &trained.agent,
        &env,
        &backend,
        config.selection,
        config.eval_episodes,
        &mut streams,
    )?;
    Ok(trajectories.iter().map(|t| t.len() as f64 / inference_freq).collect())
}

/// One matrix per inference shot count, cells pooled over seeds x episodes.
pub fn eval_matrices(config: &SweepConfig, agents: &[TrainedAgent]) -> Result<Vec<DurationMatrix>, ExperimentError> {
    if config.eval_episodes == 0 {
        log::warn!("eval_episodes = 0: every matrix cell will be absent");
    }
    let jobs: Vec<(usize, u64, f64)> = agents
        .iter()
        .enumerate()
        .flat_map(|(a, _)| {
            config
                .inference_shots
                .iter()
                .flat_map(move |&shots| config.inference_freqs.iter().map(move |&inf| (a, shots, inf)))
        })
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(a, shots, inf)| Ok((a, shots, inf, eval_durations(config, &agents[a], inf, shots)?)))
        .collect::<Result<Vec<_>, ExperimentError>>()?;

    let matrices = config
        .inference_shots
        .iter()
        .map(|&shots| {
            let mut matrix = DurationMatrix::empty(shots, config.train_freqs.clone(), config.inference_freqs.clone());
            for (i, &tf) in config.train_freqs.iter().enumerate() {
                for (j, &inf) in config.inference_freqs.iter().enumerate() {
                    let samples: Vec<f64> = results
                        .iter()
                        .filter(|(a, s, f, _)| *s == shots && *f == inf && agents[*a].train_freq == tf)
                        .flat_map(|(_, _, _, d)| d.iter().copied())
                        .collect();
                    matrix.cells[i][j] = CellStats::from_samples(&samples);
                }
            }
            matrix
        })
        .collect();
    Ok(matrices)
}

fn units(config: &SweepConfig) -> Vec<(f64, u64)> {
    config
        .train_freqs
        .iter()
        .flat_map(|&f| seeds(config).map(move |s| (f, s)))
        .collect()
}

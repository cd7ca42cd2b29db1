//! Episodic actor-critic training: rollout, discounted returns, per-episode
//! updates, the success criterion, and JSON checkpoints.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{ActionSelection, Agent, AgentError, Backend, ClassicalActorCritic, HybridActorCritic, Transition};
use crate::dynamics::{CartPole, EnvConfig, EnvError, ReducedState};
use crate::neural::{MlpRecord, NeuralError};
use crate::quantum::NoiseParams;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("invalid training config: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed checkpoint: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    Version { found: u64, expected: u32 },
    #[error("checkpoint has no version field")]
    MissingVersion,
    #[error("checkpoint parameters are inconsistent: {0}")]
    Shape(#[from] NeuralError),
    #[error("checkpoint mixes agent families: {0}")]
    Family(&'static str),
}

/// Independent random streams for one run, keyed by `(seed, label)`.
///
/// Each label selects its own ChaCha stream, so e.g. changing how many
/// shots are drawn never shifts the environment's initial states.
pub fn stream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(label.as_bytes()));
    rng
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[derive(Debug, Clone)]
pub struct RngStreams {
    pub env: ChaCha8Rng,
    pub policy: ChaCha8Rng,
    pub shots: ChaCha8Rng,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        Self::labelled(seed, "")
    }

    /// Streams namespaced under `prefix`, e.g. for evaluation runs.
    pub fn labelled(seed: u64, prefix: &str) -> Self {
        Self {
            env: stream(seed, &format!("{prefix}env")),
            policy: stream(seed, &format!("{prefix}policy")),
            shots: stream(seed, &format!("{prefix}shots")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Classical,
    Hybrid,
}

impl AgentKind {
    /// Fresh agent with parameters drawn from the run's `init` stream.
    pub fn init(self, seed: u64) -> Agent {
        let mut rng = stream(seed, "init");
        match self {
            AgentKind::Classical => Agent::classical(&mut rng),
            AgentKind::Hybrid => Agent::hybrid(&mut rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub gamma: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    /// Episode cap.
    pub episodes: usize,
    pub control_freq: f64,
    pub episode_duration: f64,
    pub backend: Backend,
    pub seed: u64,
    pub success_window: usize,
    /// Stop as soon as the success criterion fires.
    pub stop_on_success: bool,
    pub huber_delta: f64,
    pub selection: ActionSelection,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lr_actor: 0.05,
            lr_critic: 0.05,
            episodes: 500,
            control_freq: 50.0,
            episode_duration: 10.0,
            backend: Backend::Analytic,
            seed: 0,
            success_window: 100,
            stop_on_success: true,
            huber_delta: 1.0,
            selection: ActionSelection::Sample,
        }
    }
}

impl TrainConfig {
    pub fn env_config(&self) -> Result<EnvConfig, EnvError> {
        EnvConfig::with_duration(self.control_freq, self.episode_duration)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(TrainError::Config(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if self.episodes == 0 {
            return Err(TrainError::Config("episodes must be at least 1".into()));
        }
        if self.success_window == 0 {
            return Err(TrainError::Config("success window must be at least 1".into()));
        }
        if !(self.huber_delta.is_finite() && self.huber_delta > 0.0) {
            return Err(TrainError::Config(format!(
                "huber delta must be positive, got {}",
                self.huber_delta
            )));
        }
        self.backend.validate().map_err(AgentError::from)?;
        self.env_config()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    /// Ended at the time limit rather than on a bound violation.
    pub truncated: bool,
    /// Observation after the last step (bootstrap state when truncated).
    pub final_observation: ReducedState,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn episode_return(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.reward).collect()
    }

    pub fn dones(&self) -> Vec<bool> {
        self.transitions.iter().map(|t| t.done).collect()
    }
}

/// Rolls out one episode from a fresh reset.
pub fn run_episode(
    agent: &Agent,
    env_config: &EnvConfig,
    backend: &Backend,
    selection: ActionSelection,
    streams: &mut RngStreams,
) -> Result<Trajectory, TrainError> {
    let mut env = CartPole::reset(*env_config, &mut streams.env);
    let mut transitions = Vec::with_capacity(env_config.max_steps());
    loop {
        let observation = env.observation();
        let (action, out) = agent.act(
            &observation,
            backend,
            selection,
            &mut streams.shots,
            &mut streams.policy,
        )?;
        let step = env.step(action)?;
        transitions.push(Transition {
            observation,
            action,
            reward: step.reward,
            action_probs: out.action_probs,
            value: out.value,
            log_prob: out.log_prob,
            done: step.terminated,
            cache: out.cache,
        });
        if step.done() {
            return Ok(Trajectory {
                transitions,
                truncated: step.truncated,
                final_observation: env.observation(),
            });
        }
    }
}

/// Backward recursion `R_k = r_k + gamma R_{k+1} (1 - d_k)` seeded with
/// `R_T = bootstrap_value`.
pub fn compute_returns(
    rewards: &[f64],
    dones: &[bool],
    gamma: f64,
    bootstrap_value: f64,
) -> Result<Vec<f64>, AgentError> {
    if rewards.is_empty() {
        return Err(AgentError::EmptyTrajectory);
    }
    if rewards.len() != dones.len() {
        return Err(AgentError::ReturnsLength {
            steps: rewards.len(),
            returns: dones.len(),
        });
    }
    let mut returns = vec![0.0; rewards.len()];
    let mut next = bootstrap_value;
    for k in (0..rewards.len()).rev() {
        let mask = if dones[k] { 0.0 } else { 1.0 };
        next = rewards[k] + gamma * next * mask;
        returns[k] = next;
    }
    Ok(returns)
}

/// True iff the trailing `window` returns all average `max_return`.
pub fn check_success(returns: &[f64], window: usize, max_return: f64) -> bool {
    if window == 0 || returns.len() < window {
        return false;
    }
    let tail = &returns[returns.len() - window..];
    tail.iter().sum::<f64>() / window as f64 >= max_return
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub returns: Vec<f64>,
    /// Steps survived per episode.
    pub steps: Vec<usize>,
    /// Episodes trained when the success criterion first held.
    pub episodes_to_solve: Option<usize>,
    pub wall_time_s: f64,
}

impl RunSummary {
    /// Equality ignoring wall time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        self.returns == other.returns && self.steps == other.steps && self.episodes_to_solve == other.episodes_to_solve
    }
}

pub fn train_agent(agent: &mut Agent, config: &TrainConfig) -> Result<(RunSummary, Checkpoint), TrainError> {
    train_agent_with(agent, config, |_, _| {})
}

/// As [`train_agent`], calling `on_episode(index, return)` after each episode.
pub fn train_agent_with(
    agent: &mut Agent,
    config: &TrainConfig,
    mut on_episode: impl FnMut(usize, f64),
) -> Result<(RunSummary, Checkpoint), TrainError> {
    config.validate()?;
    let env_config = config.env_config()?;
    let mut streams = RngStreams::new(config.seed);
    let mut optimizers = agent.optimizers(config.lr_actor, config.lr_critic);
    let started = Instant::now();

    let mut returns = Vec::new();
    let mut steps = Vec::new();
    let mut solved_at = None;

    for episode in 0..config.episodes {
        let traj = run_episode(agent, &env_config, &config.backend, config.selection, &mut streams)?;
        let bootstrap = if traj.truncated {
            agent.critic_value(&traj.final_observation, &config.backend, &mut streams.shots)?
        } else {
            0.0
        };
        let discounted = compute_returns(&traj.rewards(), &traj.dones(), config.gamma, bootstrap)?;
        agent.episode_update(
            &traj.transitions,
            &discounted,
            &mut optimizers,
            &config.backend,
            config.huber_delta,
            &mut streams.shots,
        )?;

        let ret = traj.episode_return();
        returns.push(ret);
        steps.push(traj.len());
        on_episode(episode, ret);

        if solved_at.is_none() && check_success(&returns, config.success_window, env_config.max_return()) {
            solved_at = Some(episode + 1);
            if config.stop_on_success {
                break;
            }
        }
    }

    let summary = RunSummary {
        episodes_to_solve: solved_at,
        wall_time_s: started.elapsed().as_secs_f64(),
        returns,
        steps,
    };
    let checkpoint = Checkpoint {
        meta: CheckpointMeta::from_config(config, summary.returns.len(), solved_at),
        agent: agent.clone(),
    };
    Ok((summary, checkpoint))
}

/// Average over `episodes` rollouts without parameter updates.
pub fn evaluate(
    agent: &Agent,
    env_config: &EnvConfig,
    backend: &Backend,
    selection: ActionSelection,
    episodes: usize,
    streams: &mut RngStreams,
) -> Result<Vec<Trajectory>, TrainError> {
    (0..episodes)
        .map(|_| run_episode(agent, env_config, backend, selection, streams))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub control_freq_hz: f64,
    pub backend: String,
    pub shots: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseParams>,
    pub gamma: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub episodes_trained: usize,
    pub solved_at: Option<usize>,
}

impl CheckpointMeta {
    pub fn from_config(config: &TrainConfig, episodes_trained: usize, solved_at: Option<usize>) -> Self {
        Self {
            seed: config.seed,
            control_freq_hz: config.control_freq,
            backend: config.backend.name().to_string(),
            shots: config.backend.shots(),
            noise: match config.backend {
                Backend::SampledNoisy { noise, .. } => Some(noise),
                _ => None,
            },
            gamma: config.gamma,
            lr_actor: config.lr_actor,
            lr_critic: config.lr_critic,
            episodes_trained,
            solved_at,
        }
    }
}

/// Trained parameters plus the settings that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub agent: Agent,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointRecord {
    version: u32,
    meta: CheckpointMeta,
    actor: MlpRecord,
    critic: MlpRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta_actor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta_critic: Option<f64>,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String, CheckpointError> {
        let (actor, critic, theta_actor, theta_critic) = match &self.agent {
            Agent::Classical(n) => ((&n.actor).into(), (&n.critic).into(), None, None),
            Agent::Hybrid(n) => (
                (&n.actor_head).into(),
                (&n.critic_head).into(),
                Some(n.theta_actor),
                Some(n.theta_critic),
            ),
        };
        let record = CheckpointRecord {
            version: CHECKPOINT_VERSION,
            meta: self.meta.clone(),
            actor,
            critic,
            theta_actor,
            theta_critic,
        };
        Ok(serde_json::to_string_pretty(&record)?)
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value
            .get("version")
            .and_then(serde_json::Value::as_u64)
            .ok_or(CheckpointError::MissingVersion)?;
        if found != CHECKPOINT_VERSION as u64 {
            return Err(CheckpointError::Version {
                found,
                expected: CHECKPOINT_VERSION,
            });
        }
        let record: CheckpointRecord = serde_json::from_value(value)?;
        let actor = record.actor.try_into()?;
        let critic = record.critic.try_into()?;
        let agent = match (record.theta_actor, record.theta_critic) {
            (None, None) => Agent::Classical(ClassicalActorCritic { actor, critic }),
            (Some(theta_actor), Some(theta_critic)) => Agent::Hybrid(HybridActorCritic {
                theta_actor,
                theta_critic,
                actor_head: actor,
                critic_head: critic,
            }),
            _ => return Err(CheckpointError::Family("only one circuit angle present")),
        };
        Ok(Checkpoint {
            meta: record.meta,
            agent,
        })
    }

    /// Backend recorded in the metadata, if recognizable.
    pub fn backend(&self) -> Option<Backend> {
        match (self.meta.backend.as_str(), self.meta.shots) {
            ("analytic", _) => Some(Backend::Analytic),
            ("sampled", Some(shots)) => Some(Backend::Sampled { shots }),
            ("sampled_noisy", Some(shots)) => Some(Backend::SampledNoisy {
                shots,
                noise: self.meta.noise.unwrap_or_else(NoiseParams::emulated_device),
            }),
            _ => None,
        }
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<(), CheckpointError> {
    let io = |source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(io)?;
        }
    }
    fs::write(path, checkpoint.to_json()?).map_err(io)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let text = fs::read_to_string(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Checkpoint::from_json(&text)
}

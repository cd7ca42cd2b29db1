//! Classical and single-qubit hybrid actor-critic agents.
//!
//! Both families expose the same act / value / update surface. The hybrid
//! agent evaluates one circuit per head, copies the scalar into all
//! [`HEAD_WIDTH`] head inputs, and trains its circuit angles by chaining the
//! head's input gradient (summed over the copies) with the shift-rule
//! derivative of the circuit.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{Action, ReducedState};
use crate::neural::{huber, huber_grad, softmax_logprob, AdamState, ForwardCache, Gradients, Mlp, NeuralError};
use crate::quantum::{
    encode_features, parameter_shift_grad, CircuitInput, EncodingAngles, Evaluator, NoiseParams, QuantumError,
};

/// Number of copies of the circuit output fed to each hybrid head.
pub const HEAD_WIDTH: usize = 32;
pub const CLASSICAL_HIDDEN: [usize; 2] = [128, 256];

#[derive(Debug, Error, PartialEq)]
pub enum AgentError {
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error("cannot update from an empty trajectory")]
    EmptyTrajectory,
    #[error("got {returns} returns for {steps} steps")]
    ReturnsLength { steps: usize, returns: usize },
    #[error("step cache does not belong to this agent family")]
    CacheMismatch,
    #[error("optimizer sized for {expected} parameters, agent has {got}")]
    OptimizerShape { expected: usize, got: usize },
}

/// How the hybrid agent's circuits are evaluated. Ignored by classical agents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Backend {
    Analytic,
    Sampled { shots: u64 },
    SampledNoisy { shots: u64, noise: NoiseParams },
}

impl Backend {
    pub fn evaluator(&self) -> Evaluator {
        match *self {
            Backend::Analytic => Evaluator::Analytic,
            Backend::Sampled { shots } => Evaluator::Sampled {
                shots,
                noise: NoiseParams::ideal(),
            },
            Backend::SampledNoisy { shots, noise } => Evaluator::Sampled { shots, noise },
        }
    }

    pub fn shots(&self) -> Option<u64> {
        match *self {
            Backend::Analytic => None,
            Backend::Sampled { shots } | Backend::SampledNoisy { shots, .. } => Some(shots),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Backend::Analytic => "analytic",
            Backend::Sampled { .. } => "sampled",
            Backend::SampledNoisy { .. } => "sampled_noisy",
        }
    }

    pub fn validate(&self) -> Result<(), QuantumError> {
        match self {
            Backend::Analytic => Ok(()),
            Backend::Sampled { shots } if *shots == 0 => Err(QuantumError::ZeroShots),
            Backend::Sampled { .. } => Ok(()),
            Backend::SampledNoisy { shots, .. } if *shots == 0 => Err(QuantumError::ZeroShots),
            Backend::SampledNoisy { noise, .. } => noise.validate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSelection {
    #[default]
    Sample,
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalActorCritic {
    pub actor: Mlp,
    pub critic: Mlp,
}

impl ClassicalActorCritic {
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let [h1, h2] = CLASSICAL_HIDDEN;
        Self {
            actor: Mlp::uniform(&[3, h1, h2, 2], rng),
            critic: Mlp::uniform(&[3, h1, h2, 1], rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridActorCritic {
    pub theta_actor: f64,
    pub theta_critic: f64,
    pub actor_head: Mlp,
    pub critic_head: Mlp,
}

impl HybridActorCritic {
    /// Circuit angles uniform in `[-pi, pi)`, heads with uniform fan-in init.
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let theta_actor = rng.random_range(-PI..PI);
        let theta_critic = rng.random_range(-PI..PI);
        Self {
            theta_actor,
            theta_critic,
            actor_head: Mlp::uniform(&[HEAD_WIDTH, HEAD_WIDTH, 2], rng),
            critic_head: Mlp::uniform(&[HEAD_WIDTH, HEAD_WIDTH, 1], rng),
        }
    }

    /// All head parameters zero.
    pub fn zeroed(theta_actor: f64, theta_critic: f64) -> Self {
        Self {
            theta_actor,
            theta_critic,
            actor_head: Mlp::zeros(&[HEAD_WIDTH, HEAD_WIDTH, 2]),
            critic_head: Mlp::zeros(&[HEAD_WIDTH, HEAD_WIDTH, 1]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Agent {
    Classical(ClassicalActorCritic),
    Hybrid(HybridActorCritic),
}

/// What the backward pass needs from one forward step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepCache {
    Classical {
        actor: ForwardCache,
        critic: ForwardCache,
    },
    Hybrid {
        angles: EncodingAngles,
        /// Circuit outputs as seen by the heads (sampled when the backend samples).
        f_actor: f64,
        f_critic: f64,
        actor: ForwardCache,
        critic: ForwardCache,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub action_probs: [f64; 2],
    pub value: f64,
    pub log_prob: f64,
    pub cache: StepCache,
}

/// One environment step as the update sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: ReducedState,
    pub action: Action,
    pub reward: f64,
    pub action_probs: [f64; 2],
    pub value: f64,
    pub log_prob: f64,
    /// Bound violation on this step (no bootstrapping through it).
    pub done: bool,
    pub cache: StepCache,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentOptimizers {
    pub actor: AdamState,
    pub critic: AdamState,
}

/// Episode gradients in the layout of [`Agent::actor_params`] / [`Agent::critic_params`].
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeGradients {
    pub actor: Vec<f64>,
    pub critic: Vec<f64>,
    pub actor_loss: f64,
    pub critic_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub mean_advantage: f64,
}

fn two_probs(logits: &[f64], action: usize) -> ([f64; 2], f64) {
    let (p, lp) = softmax_logprob(logits, action);
    ([p[0], p[1]], lp)
}

impl Agent {
    pub fn classical<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Agent::Classical(ClassicalActorCritic::new(rng))
    }

    pub fn hybrid<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Agent::Hybrid(HybridActorCritic::new(rng))
    }

    pub fn is_hybrid(&self) -> bool {
        matches!(self, Agent::Hybrid(_))
    }

    pub fn optimizers(&self, lr_actor: f64, lr_critic: f64) -> AgentOptimizers {
        AgentOptimizers {
            actor: AdamState::new(self.actor_params().len(), lr_actor),
            critic: AdamState::new(self.critic_params().len(), lr_critic),
        }
    }

    /// Forward pass: action probabilities, value and the backward cache.
    /// `log_prob` in the returned output refers to action 0 until an action is chosen.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        obs: &ReducedState,
        backend: &Backend,
        shot_rng: &mut R,
    ) -> Result<PolicyOutput, AgentError> {
        match self {
            Agent::Classical(net) => {
                let x = obs.to_array();
                let (logits, actor) = net.actor.forward(&x)?;
                let (v, critic) = net.critic.forward(&x)?;
                let (action_probs, log_prob) = two_probs(&logits, 0);
                Ok(PolicyOutput {
                    action_probs,
                    value: v[0],
                    log_prob,
                    cache: StepCache::Classical { actor, critic },
                })
            }
            Agent::Hybrid(net) => {
                let angles = encode_features(obs);
                let evaluator = backend.evaluator();
                let f_actor = evaluator.evaluate(
                    &CircuitInput {
                        angles,
                        theta: net.theta_actor,
                    },
                    shot_rng,
                )?;
                let f_critic = evaluator.evaluate(
                    &CircuitInput {
                        angles,
                        theta: net.theta_critic,
                    },
                    shot_rng,
                )?;
                let (logits, actor) = net.actor_head.forward(&[f_actor; HEAD_WIDTH])?;
                let (v, critic) = net.critic_head.forward(&[f_critic; HEAD_WIDTH])?;
                let (action_probs, log_prob) = two_probs(&logits, 0);
                Ok(PolicyOutput {
                    action_probs,
                    value: v[0],
                    log_prob,
                    cache: StepCache::Hybrid {
                        angles,
                        f_actor,
                        f_critic,
                        actor,
                        critic,
                    },
                })
            }
        }
    }

    /// Chooses an action: a categorical draw from the policy, or its argmax.
    pub fn act<S: Rng + ?Sized, P: Rng + ?Sized>(
        &self,
        obs: &ReducedState,
        backend: &Backend,
        selection: ActionSelection,
        shot_rng: &mut S,
        policy_rng: &mut P,
    ) -> Result<(Action, PolicyOutput), AgentError> {
        let mut out = self.forward(obs, backend, shot_rng)?;
        let p_right = out.action_probs[1];
        let action = match selection {
            ActionSelection::Sample => {
                if policy_rng.random::<f64>() < p_right {
                    Action::Right
                } else {
                    Action::Left
                }
            }
            ActionSelection::Greedy => {
                if p_right > 0.5 {
                    Action::Right
                } else {
                    Action::Left
                }
            }
        };
        out.log_prob = out.action_probs[action.index()].ln();
        Ok((action, out))
    }

    pub fn critic_value<R: Rng + ?Sized>(
        &self,
        obs: &ReducedState,
        backend: &Backend,
        shot_rng: &mut R,
    ) -> Result<f64, AgentError> {
        match self {
            Agent::Classical(net) => Ok(net.critic.forward(&obs.to_array())?.0[0]),
            Agent::Hybrid(net) => {
                let input = CircuitInput {
                    angles: encode_features(obs),
                    theta: net.theta_critic,
                };
                let f = backend.evaluator().evaluate(&input, shot_rng)?;
                Ok(net.critic_head.forward(&[f; HEAD_WIDTH])?.0[0])
            }
        }
    }

    /// Actor parameters; for the hybrid agent the head followed by `theta_actor`.
    pub fn actor_params(&self) -> Vec<f64> {
        match self {
            Agent::Classical(net) => net.actor.flat_params(),
            Agent::Hybrid(net) => {
                let mut p = net.actor_head.flat_params();
                p.push(net.theta_actor);
                p
            }
        }
    }

    pub fn critic_params(&self) -> Vec<f64> {
        match self {
            Agent::Classical(net) => net.critic.flat_params(),
            Agent::Hybrid(net) => {
                let mut p = net.critic_head.flat_params();
                p.push(net.theta_critic);
                p
            }
        }
    }

    pub fn set_actor_params(&mut self, params: &[f64]) -> Result<(), AgentError> {
        match self {
            Agent::Classical(net) => net.actor.set_flat_params(params)?,
            Agent::Hybrid(net) => {
                let (theta, head) = split_theta(params, net.actor_head.num_params())?;
                net.actor_head.set_flat_params(head)?;
                net.theta_actor = theta;
            }
        }
        Ok(())
    }

    pub fn set_critic_params(&mut self, params: &[f64]) -> Result<(), AgentError> {
        match self {
            Agent::Classical(net) => net.critic.set_flat_params(params)?,
            Agent::Hybrid(net) => {
                let (theta, head) = split_theta(params, net.critic_head.num_params())?;
                net.critic_head.set_flat_params(head)?;
                net.theta_critic = theta;
            }
        }
        Ok(())
    }

    /// Gradients of the episode losses
    /// `L_actor = -(1/T) sum A_k log pi(a_k|s_k)` and
    /// `L_critic = (1/T) sum huber(R_k - v_k)`, with `A_k = R_k - v_k` held fixed.
    ///
    /// Circuit angles get `dL/df * df/dtheta` per visited state, with
    /// `df/dtheta` from the shift rule on `backend`.
    pub fn episode_gradients<R: Rng + ?Sized>(
        &self,
        transitions: &[Transition],
        returns: &[f64],
        backend: &Backend,
        huber_delta: f64,
        shot_rng: &mut R,
    ) -> Result<EpisodeGradients, AgentError> {
        if transitions.is_empty() {
            return Err(AgentError::EmptyTrajectory);
        }
        if transitions.len() != returns.len() {
            return Err(AgentError::ReturnsLength {
                steps: transitions.len(),
                returns: returns.len(),
            });
        }
        let inv_t = 1.0 / transitions.len() as f64;
        let (actor_net, critic_net) = match self {
            Agent::Classical(n) => (&n.actor, &n.critic),
            Agent::Hybrid(n) => (&n.actor_head, &n.critic_head),
        };
        let mut actor_acc = Gradients::zeros_like(actor_net);
        let mut critic_acc = Gradients::zeros_like(critic_net);
        let mut theta_actor_grad = 0.0;
        let mut theta_critic_grad = 0.0;
        let mut actor_loss = 0.0;
        let mut critic_loss = 0.0;
        let evaluator = backend.evaluator();

        for (tr, &ret) in transitions.iter().zip(returns) {
            let advantage = ret - tr.value;
            actor_loss -= inv_t * advantage * tr.log_prob;
            critic_loss += inv_t * huber(advantage, huber_delta);

            // d(-A log p_a)/d logits = -A (onehot(a) - p)
            let a = tr.action.index();
            let logit_grad: Vec<f64> = (0..2)
                .map(|i| {
                    let onehot = if i == a { 1.0 } else { 0.0 };
                    -inv_t * advantage * (onehot - tr.action_probs[i])
                })
                .collect();
            let value_grad = [-inv_t * huber_grad(advantage, huber_delta)];

            match (&tr.cache, self) {
                (StepCache::Classical { actor, critic }, Agent::Classical(net)) => {
                    net.actor.backward_into(actor, &logit_grad, &mut actor_acc)?;
                    net.critic.backward_into(critic, &value_grad, &mut critic_acc)?;
                }
                (
                    StepCache::Hybrid {
                        angles, actor, critic, ..
                    },
                    Agent::Hybrid(net),
                ) => {
                    net.actor_head.backward_into(actor, &logit_grad, &mut actor_acc)?;
                    let dl_df: f64 = actor_acc.input.iter().sum();
                    let input = CircuitInput {
                        angles: *angles,
                        theta: net.theta_actor,
                    };
                    theta_actor_grad += dl_df * parameter_shift_grad(&input, &evaluator, shot_rng)?;

                    net.critic_head.backward_into(critic, &value_grad, &mut critic_acc)?;
                    let dl_df: f64 = critic_acc.input.iter().sum();
                    let input = CircuitInput {
                        angles: *angles,
                        theta: net.theta_critic,
                    };
                    theta_critic_grad += dl_df * parameter_shift_grad(&input, &evaluator, shot_rng)?;
                }
                _ => return Err(AgentError::CacheMismatch),
            }
        }

        let mut actor = actor_acc.flat_params();
        let mut critic = critic_acc.flat_params();
        if self.is_hybrid() {
            actor.push(theta_actor_grad);
            critic.push(theta_critic_grad);
        }
        Ok(EpisodeGradients {
            actor,
            critic,
            actor_loss,
            critic_loss,
        })
    }

    /// One Adam step per network from a whole episode.
    pub fn episode_update<R: Rng + ?Sized>(
        &mut self,
        transitions: &[Transition],
        returns: &[f64],
        optimizers: &mut AgentOptimizers,
        backend: &Backend,
        huber_delta: f64,
        shot_rng: &mut R,
    ) -> Result<LossReport, AgentError> {
        let grads = self.episode_gradients(transitions, returns, backend, huber_delta, shot_rng)?;

        let mut actor = self.actor_params();
        if optimizers.actor.len() != actor.len() {
            return Err(AgentError::OptimizerShape {
                expected: optimizers.actor.len(),
                got: actor.len(),
            });
        }
        optimizers.actor.step(&mut actor, &grads.actor)?;
        self.set_actor_params(&actor)?;

        let mut critic = self.critic_params();
        if optimizers.critic.len() != critic.len() {
            return Err(AgentError::OptimizerShape {
                expected: optimizers.critic.len(),
                got: critic.len(),
            });
        }
        optimizers.critic.step(&mut critic, &grads.critic)?;
        self.set_critic_params(&critic)?;

        let mean_advantage =
            transitions.iter().zip(returns).map(|(t, r)| r - t.value).sum::<f64>() / transitions.len() as f64;
        Ok(LossReport {
            actor_loss: grads.actor_loss,
            critic_loss: grads.critic_loss,
            mean_advantage,
        })
    }
}

fn split_theta(params: &[f64], head_len: usize) -> Result<(f64, &[f64]), AgentError> {
    if params.len() != head_len + 1 {
        return Err(NeuralError::Dimension {
            expected: head_len + 1,
            got: params.len(),
        }
        .into());
    }
    Ok((params[head_len], &params[..head_len]))
}

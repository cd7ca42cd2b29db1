//! JSON experiment configuration with dotted-path overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ExperimentError;
use crate::agents::ActionSelection;
use crate::quantum::NoiseParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningRates {
    pub actor: f64,
    pub critic: f64,
}

impl LearningRates {
    pub const fn both(lr: f64) -> Self {
        Self { actor: lr, critic: lr }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Classical,
    HybridAnalytic,
    HybridShot,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Classical, Variant::HybridAnalytic, Variant::HybridShot];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Classical => "classical",
            Variant::HybridAnalytic => "hybrid-analytic",
            Variant::HybridShot => "hybrid-shot",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub variants: Vec<Variant>,
    pub seeds: u64,
    /// Run `i` uses seed `base_seed + i`.
    pub base_seed: u64,
    pub control_freq: f64,
    pub episode_cap: usize,
    /// Shots per circuit evaluation for the `hybrid-shot` variant.
    pub train_shots: u64,
    pub gamma: f64,
    pub classical_lr: LearningRates,
    pub hybrid_lr: LearningRates,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            variants: Variant::ALL.to_vec(),
            seeds: 10,
            base_seed: 0,
            control_freq: 50.0,
            episode_cap: 1500,
            train_shots: 1024,
            gamma: 0.99,
            classical_lr: LearningRates::both(0.01),
            hybrid_lr: LearningRates::both(0.02),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub train_freqs: Vec<f64>,
    pub train_shots: u64,
    pub seeds: u64,
    pub base_seed: u64,
    pub episodes: usize,
    pub episode_duration: f64,
    pub gamma: f64,
    pub lr: LearningRates,
    pub inference_freqs: Vec<f64>,
    pub inference_shots: Vec<u64>,
    pub eval_episodes: usize,
    pub noise: NoiseParams,
    pub selection: ActionSelection,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let grid = vec![20.0, 25.0, 33.0, 50.0, 100.0];
        Self {
            train_freqs: grid.clone(),
            train_shots: 4096,
            seeds: 3,
            base_seed: 0,
            episodes: 500,
            episode_duration: 10.0,
            gamma: 0.99,
            lr: LearningRates::both(0.05),
            inference_freqs: grid,
            inference_shots: vec![128, 256, 512, 1024],
            eval_episodes: 10,
            noise: NoiseParams::emulated_device(),
            selection: ActionSelection::Sample,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyConfig {
    /// CSV with columns `shots,standard_stack,low_level` replacing the built-in rates.
    pub rates_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub baseline: BaselineConfig,
    pub sweep: SweepConfig,
    pub latency: LatencyConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let config: Self = serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Applies `key=value` where `key` is a dotted path such as
    /// `sweep.lr.actor`. The value is parsed as JSON, falling back to a bare string.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ExperimentError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| ExperimentError::Config(format!("override `{assignment}` is not of the form key=value")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));

        let mut tree = serde_json::to_value(&*self).map_err(|e| ExperimentError::Config(e.to_string()))?;
        let mut node = &mut tree;
        for part in key.split('.') {
            node = node
                .get_mut(part)
                .ok_or_else(|| ExperimentError::Config(format!("unknown config key `{key}`")))?;
        }
        *node = value;
        let updated: Self = serde_json::from_value(tree)
            .map_err(|e| ExperimentError::Config(format!("override `{assignment}`: {e}")))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let fail = |msg: &str| Err(ExperimentError::Config(msg.to_owned()));
        let b = &self.baseline;
        if b.variants.is_empty() {
            return fail("baseline.variants is empty");
        }
        if b.episode_cap == 0 {
            return fail("baseline.episode_cap must be at least 1");
        }
        let s = &self.sweep;
        if s.train_freqs.is_empty() || s.inference_freqs.is_empty() || s.inference_shots.is_empty() {
            return fail("sweep grids must be nonempty");
        }
        if s.episodes == 0 {
            return fail("sweep.episodes must be at least 1");
        }
        if s.inference_shots.contains(&0) || s.train_shots == 0 || b.train_shots == 0 {
            return fail("shot counts must be positive");
        }
        s.noise.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        Ok(())
    }

    /// Overrides the seed count of both ensembles.
    pub fn set_seeds(&mut self, seeds: u64) {
        self.baseline.seeds = seeds;
        self.sweep.seeds = seeds;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_json() {
        let config = ExperimentConfig::default();
        let text = serde_json::to_string(&config).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), config);
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), config);
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let config = ExperimentConfig::from_json(r#"{"sweep": {"seeds": 10, "train_freqs": [50]}}"#).unwrap();
        assert_eq!(config.sweep.seeds, 10);
        assert_eq!(config.sweep.train_freqs, vec![50.0]);
        assert_eq!(config.sweep.train_shots, 4096);
        assert_eq!(config.baseline, BaselineConfig::default());
    }

    #[test]
    fn overrides_follow_dotted_paths() {
        let mut config = ExperimentConfig::default();
        config.apply_override("sweep.lr.actor=0.1").unwrap();
        config.apply_override("baseline.variants=[\"classical\"]").unwrap();
        config.apply_override("sweep.selection=greedy").unwrap();
        assert_eq!(config.sweep.lr.actor, 0.1);
        assert_eq!(config.baseline.variants, vec![Variant::Classical]);
        assert_eq!(config.sweep.selection, ActionSelection::Greedy);
    }

    #[test]
    fn bad_overrides_are_rejected() {
        let mut config = ExperimentConfig::default();
        assert!(config.apply_override("sweep.nope=1").is_err());
        assert!(config.apply_override("sweep.seeds").is_err());
        assert!(config.apply_override("sweep.seeds=-3").is_err());
        assert!(config.apply_override("sweep.train_freqs=[]").is_err());
        assert_eq!(config, ExperimentConfig::default());
    }

    #[test]
    fn unknown_fields_are_errors() {
        assert!(ExperimentConfig::from_json(r#"{"sweep": {"seed": 3}}"#).is_err());
    }
}

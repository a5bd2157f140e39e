use serde::{Deserialize, Serialize};

use crate::diffusion::{DataConfig, DenoiserConfig, Guidance, ScheduleConfig};
use crate::error::{Error, Result};
use crate::nn::Activation;
use crate::pen::PenConfig;
use crate::rewards::{default_specs, RewardRegistry, RewardSpec};

/// Fine-tuning regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Pareto-masked multi-reward updates of both models.
    Parrot,
    /// Fixed-weight scalarization on every sample, no mask.
    WeightedSum,
    /// Scalarization with a one-hot weight on reward `k` (1-based).
    SingleReward(usize),
    /// Pareto updates with the expansion policy frozen.
    T2iOnly,
    /// Pareto updates with the diffusion model frozen.
    PenOnly,
    /// Expansion policy first against the frozen diffusion model, then the
    /// diffusion model against the frozen policy; E split evenly.
    NoJoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub time_dim: usize,
    pub cond_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub embed_init_std: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let d = DenoiserConfig::default();
        Self {
            time_dim: d.time_dim,
            cond_dim: d.cond_dim,
            hidden: d.hidden,
            activation: d.activation,
            embed_init_std: d.embed_init_std,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Probability of replacing the condition by null.
    pub cond_dropout: f64,
    /// Held-out pairs for loss reporting.
    pub holdout: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 128,
            lr: 1e-3,
            cond_dropout: 0.1,
            holdout: 2048,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Sampler {
    /// Deterministic DDIM (η = 0) over `steps` timesteps.
    Ddim { steps: usize },
    /// Stochastic ancestral sampling averaged over `repeats` draws per seed.
    Ancestral { repeats: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Samples per condition token.
    pub samples_per_condition: usize,
    pub sampler: Sampler,
    pub guidance: Guidance,
    /// Reward identifiers prepended at inference (1-based).
    pub prefs: Vec<usize>,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            samples_per_condition: 64,
            sampler: Sampler::Ddim { steps: 20 },
            guidance: Guidance::Cfg { w: 5.0 },
            prefs: vec![1, 2, 3, 4],
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenTrainConfig {
    pub lr: f64,
    /// Subtract the batch-mean reward before the expansion-policy update.
    pub baseline: bool,
    /// Dominated samples contribute zero reward to the expansion policy.
    pub nondominated_only: bool,
    /// Orient updates to increase reward (false flips the sign).
    pub ascend: bool,
}

impl Default for PenTrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-2,
            baseline: true,
            nondominated_only: true,
            ascend: true,
        }
    }
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    /// E.
    pub iterations: usize,
    /// N, samples per reward-conditioned batch.
    pub batch_size: usize,
    pub seed: u64,
    /// Scalarization weights, `weighted_sum` mode only.
    pub weights: Option<Vec<f64>>,
    /// One non-dominated set over all K batches instead of one per batch.
    pub pooled_pareto: bool,
    /// Guidance used for training rollouts.
    pub rollout_guidance: Guidance,
    /// Diffusion-model learning rate during fine-tuning.
    pub lr: f64,
    /// Global-norm clip applied to each model's gradient before a step.
    pub grad_clip: f64,
    pub pen_train: PenTrainConfig,
    pub pretrain: PretrainConfig,
    pub eval: EvalConfig,
    pub model: ModelConfig,
    pub schedule: ScheduleConfig,
    pub data: DataConfig,
    pub pen: PenConfig,
    pub rewards: Vec<RewardSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Parrot,
            iterations: 300,
            batch_size: 64,
            seed: 7,
            weights: None,
            pooled_pareto: false,
            rollout_guidance: Guidance::Conditional,
            lr: 1e-4,
            grad_clip: 0.1,
            pen_train: PenTrainConfig::default(),
            pretrain: PretrainConfig::default(),
            eval: EvalConfig::default(),
            model: ModelConfig::default(),
            schedule: ScheduleConfig::default(),
            data: DataConfig::default(),
            pen: PenConfig::default(),
            rewards: default_specs(),
        }
    }
}

impl RunConfig {
    /// K.
    pub fn n_rewards(&self) -> usize {
        self.rewards.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.n_rewards();
        if k == 0 {
            return Err(Error::Config("rewards: need at least one reward".into()));
        }
        self.data.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.mode == Mode::Parrot && self.batch_size < 2 {
            return Err(Error::Config("batch_size must be >= 2 in parrot mode".into()));
        }
        match (&self.mode, &self.weights) {
            (Mode::WeightedSum, None) => {
                return Err(Error::Config("weights: required in weighted_sum mode".into()))
            }
            (Mode::WeightedSum, Some(w)) => {
                if w.len() != k {
                    return Err(Error::Config(format!("weights: expected {k} entries, got {}", w.len())));
                }
                if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return Err(Error::Config("weights: entries must be finite and >= 0".into()));
                }
                let sum: f64 = w.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::Config(format!("weights: must sum to 1, got {sum}")));
                }
            }
            (_, Some(_)) => {
                return Err(Error::Config("weights: only allowed in weighted_sum mode".into()))
            }
            _ => {}
        }
        if let Mode::SingleReward(r) = self.mode {
            if r == 0 || r > k {
                return Err(Error::Config(format!("mode: single_reward {r} outside 1..={k}")));
            }
        }
        if let Some(p) = self.eval.prefs.iter().find(|&&p| p == 0 || p > k) {
            return Err(Error::Config(format!("eval.prefs: identifier {p} outside 1..={k}")));
        }
        if self.pen.n_conditions != self.data.n_conditions {
            return Err(Error::Config(
                "pen.n_conditions must equal data.n_conditions".into(),
            ));
        }
        if !(self.grad_clip > 0.0) || !(self.lr > 0.0) || !(self.pen_train.lr > 0.0) {
            return Err(Error::Config("learning rates and grad_clip must be > 0".into()));
        }
        if self.model.time_dim % 2 != 0 {
            return Err(Error::Config("model.time_dim must be even".into()));
        }
        if let Sampler::Ddim { steps } = self.eval.sampler {
            if steps == 0 || steps > self.schedule.steps {
                return Err(Error::Config(format!(
                    "eval.sampler: ddim steps {steps} outside 1..={}",
                    self.schedule.steps
                )));
            }
        }
        if let Sampler::Ancestral { repeats: 0 } = self.eval.sampler {
            return Err(Error::Config("eval.sampler: repeats must be >= 1".into()));
        }
        self.schedule
            .build()
            .map_err(|e| Error::Config(format!("schedule: {e}")))?;
        Ok(())
    }

    pub fn denoiser_config(&self) -> DenoiserConfig {
        DenoiserConfig {
            time_dim: self.model.time_dim,
            cond_dim: self.model.cond_dim,
            hidden: self.model.hidden.clone(),
            activation: self.model.activation,
            n_conditions: self.data.n_conditions,
            expansion_slots: self.pen.slots,
            expansion_vocab: self.pen.vocab,
            n_rewards: self.n_rewards(),
            embed_init_std: self.model.embed_init_std,
        }
    }

    pub fn registry(&self) -> Result<RewardRegistry> {
        RewardRegistry::new(self.rewards.clone(), self.data.centers())
    }

    /// Per-reward scalarization weights for scalarizing modes.
    pub fn scalar_weights(&self) -> Option<Vec<f64>> {
        match self.mode {
            Mode::WeightedSum => self.weights.clone(),
            Mode::SingleReward(r) => {
                let mut w = vec![0.0; self.n_rewards()];
                w[r - 1] = 1.0;
                Some(w)
            }
            _ => None,
        }
    }
}

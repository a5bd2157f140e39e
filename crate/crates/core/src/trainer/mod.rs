//! Fine-tuning loop: reward-conditioned rollouts, Pareto-masked or
//! scalarized policy-gradient updates of the diffusion model, and joint
//! updates of the expansion policy.

pub mod config;
pub mod metrics;
pub mod policy;
pub mod pretrain;
pub mod seeds;

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use config::{EvalConfig, Mode, ModelConfig, PenTrainConfig, PretrainConfig, RunConfig, Sampler};
pub use metrics::{csv_header, csv_rows, BatchMetrics, IterationMetrics};
pub use policy::{
    guidance_conditions, pareto_weights, pen_gradient, per_batch_selection, pooled_selection,
    scalarize, scalarized_weights, t2i_gradient, BatchSelection, Rollout,
};
pub use pretrain::{denoising_loss, holdout_set, pretrain, zero_predictor_loss, NoisePair, PretrainReport};
pub use seeds::derive_seed;

use crate::diffusion::{ddim_sample, sample_trajectory, Denoiser, DiffusionSchedule};
use crate::error::{Error, Result};
use crate::nn::{checkpoint, Adam, AdamConfig, Grads, ParamStore};
use crate::pareto::RewardVector;
use crate::pen::{prepend_reward_tokens, PenPolicy};
use crate::rewards::RewardRegistry;
use seeds::stream;

/// How each batch turns rewards into per-sample weights.
#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    /// Non-dominated samples get `r_k / n(P)`, the rest zero.
    Pareto,
    /// Every sample gets `Σ_k w_k r_k / N`.
    Scalarized(Vec<f64>),
}

/// Which models an iteration updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpdateScope {
    pub t2i: bool,
    pub pen: bool,
}

impl UpdateScope {
    pub const BOTH: Self = Self { t2i: true, pen: true };
    pub const T2I: Self = Self { t2i: true, pen: false };
    pub const PEN: Self = Self { t2i: false, pen: true };
}

/// Rollouts and selections of one iteration, before any update.
#[derive(Debug, Clone)]
pub struct IterationBatch {
    pub condition: usize,
    /// `batches[k-1]` was sampled with reward identifier k prepended.
    pub batches: Vec<Vec<Rollout>>,
    pub selections: Vec<BatchSelection>,
}

impl IterationBatch {
    pub fn rewards(&self, k: usize) -> Vec<RewardVector> {
        self.batches[k - 1].iter().map(|r| r.rewards.clone()).collect()
    }
}

/// Diffusion model θ, expansion policy φ and their optimizers.
pub struct Trainer {
    config: RunConfig,
    sched: DiffusionSchedule,
    registry: RewardRegistry,
    denoiser: Denoiser,
    pen: PenPolicy,
    theta: ParamStore,
    phi: ParamStore,
    theta_opt: Adam,
    phi_opt: Adam,
    iteration: usize,
}

impl Trainer {
    /// Fresh models initialised from the run seed.
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[stream::INIT]));
        let (denoiser, theta) = Denoiser::init(config.denoiser_config(), &mut rng)?;
        let (pen, phi) = PenPolicy::init(config.pen)?;
        Self::assemble(config, denoiser, theta, pen, phi)
    }

    /// Models restored from parameter stores (e.g. loaded checkpoints).
    pub fn from_params(config: RunConfig, theta: ParamStore, phi: ParamStore) -> Result<Self> {
        config.validate()?;
        let denoiser = Denoiser::bind(&theta, config.denoiser_config())?;
        let pen = PenPolicy::bind(&phi, config.pen)?;
        Self::assemble(config, denoiser, theta, pen, phi)
    }

    fn assemble(
        config: RunConfig,
        denoiser: Denoiser,
        theta: ParamStore,
        pen: PenPolicy,
        phi: ParamStore,
    ) -> Result<Self> {
        Ok(Self {
            sched: config.schedule.build()?,
            registry: config.registry()?,
            theta_opt: Adam::new(AdamConfig::with_lr(config.lr)),
            phi_opt: Adam::new(AdamConfig::with_lr(config.pen_train.lr)),
            config,
            denoiser,
            pen,
            theta,
            phi,
            iteration: 0,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn schedule(&self) -> &DiffusionSchedule {
        &self.sched
    }

    pub fn registry(&self) -> &RewardRegistry {
        &self.registry
    }

    pub fn denoiser(&self) -> &Denoiser {
        &self.denoiser
    }

    pub fn pen(&self) -> &PenPolicy {
        &self.pen
    }

    pub fn theta(&self) -> &ParamStore {
        &self.theta
    }

    pub fn phi(&self) -> &ParamStore {
        &self.phi
    }

    pub fn theta_mut(&mut self) -> &mut ParamStore {
        &mut self.theta
    }

    pub fn phi_mut(&mut self) -> &mut ParamStore {
        &mut self.phi
    }

    /// Fine-tuning iterations completed so far.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Denoising pretraining of θ with the configured settings.
    pub fn pretrain(&mut self, eval_every: usize) -> Result<PretrainReport> {
        pretrain(
            &self.denoiser,
            &mut self.theta,
            &self.sched,
            &self.config.data,
            &self.config.pretrain,
            self.config.seed,
            eval_every,
        )
    }

    /// Samples the shared condition for iteration `e` and rolls out K
    /// reward-conditioned batches of N from the current parameters.
    pub fn sample_iteration(&self, e: usize) -> Result<IterationBatch> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.config.seed, &[stream::ITERATION, e as u64]));
        let condition = rng.random_range(0..self.config.data.n_conditions);
        let batches = (1..=self.registry.len())
            .map(|k| self.rollout_batch(e, condition, k))
            .collect::<Result<Vec<_>>>()?;
        let rewards: Vec<Vec<RewardVector>> = batches
            .iter()
            .map(|b| b.iter().map(|r| r.rewards.clone()).collect())
            .collect();
        let selections = if self.config.pooled_pareto {
            pooled_selection(&rewards)?
        } else {
            per_batch_selection(&rewards)?
        };
        Ok(IterationBatch {
            condition,
            batches,
            selections,
        })
    }

    fn rollout_batch(&self, e: usize, c: usize, k: usize) -> Result<Vec<Rollout>> {
        let n_rewards = self.registry.len();
        let guidance = self.config.rollout_guidance;
        (0..self.config.batch_size)
            .into_par_iter()
            .map(|i| {
                let seed = derive_seed(
                    self.config.seed,
                    &[stream::ROLLOUT, e as u64, k as u64, i as u64],
                );
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let (bundle, pen_log_prob) = self.pen.expand(&self.phi, c, &mut rng)?;
                let bundle = prepend_reward_tokens(&bundle, &[k], n_rewards)?;
                let (main, second) = guidance_conditions(&bundle, guidance);
                let trajectory = sample_trajectory(
                    &self.denoiser,
                    &self.theta,
                    &main,
                    second.as_ref(),
                    guidance,
                    &self.sched,
                    rng.random(),
                )?;
                let rewards = self.registry.eval_vector(trajectory.x0(), c)?;
                Ok(Rollout {
                    bundle,
                    pen_log_prob,
                    trajectory,
                    rewards,
                })
            })
            .collect()
    }

    /// Per-sample weights of batch `k` (1-based) under `selection`.
    pub fn sample_weights(batch: &IterationBatch, selection: &Selection, k: usize) -> Vec<f64> {
        let rewards = batch.rewards(k);
        match selection {
            Selection::Pareto => pareto_weights(&rewards, &batch.selections[k - 1], k),
            Selection::Scalarized(w) => scalarized_weights(&rewards, w),
        }
    }

    /// Diffusion-model loss gradient of one iteration, summed over batches.
    pub fn t2i_update_gradient(&self, batch: &IterationBatch, selection: &Selection) -> Result<Grads> {
        let mut total = Grads::zeros_like(&self.theta);
        for k in 1..=batch.batches.len() {
            let trajs: Vec<_> = batch.batches[k - 1].iter().map(|r| &r.trajectory).collect();
            let weights = Self::sample_weights(batch, selection, k);
            total.add_assign(&t2i_gradient(&self.denoiser, &self.theta, &self.sched, &trajs, &weights)?);
        }
        Ok(total)
    }

    /// Rewards fed to the expansion policy for batch `k`.
    pub fn pen_rewards(&self, batch: &IterationBatch, selection: &Selection, k: usize) -> Vec<f64> {
        let rollouts = &batch.batches[k - 1];
        match selection {
            Selection::Pareto => rollouts
                .iter()
                .zip(&batch.selections[k - 1].selected)
                .map(|(r, &s)| {
                    if s || !self.config.pen_train.nondominated_only {
                        r.rewards.get(k - 1)
                    } else {
                        0.0
                    }
                })
                .collect(),
            Selection::Scalarized(w) => rollouts.iter().map(|r| scalarize(&r.rewards, w)).collect(),
        }
    }

    /// One iteration: sample, accumulate both gradients, clip, step.
    pub fn step(&mut self, selection: &Selection, scope: UpdateScope) -> Result<IterationMetrics> {
        let start = Instant::now();
        let e = self.iteration;
        let batch = self.sample_iteration(e)?;

        let mut grad_norm_t2i = 0.0;
        if scope.t2i {
            let g = self.t2i_update_gradient(&batch, selection)?;
            self.theta.zero_grad();
            self.theta.add_grads(&g);
            grad_norm_t2i = self.theta.clip_grad_norm(self.config.grad_clip);
            self.theta_opt
                .step(&mut self.theta)
                .map_err(|err| Error::Diverged(format!("diffusion update at iteration {e}: {err}")))?;
        }

        let mut grad_norm_pen = 0.0;
        if scope.pen {
            self.phi.zero_grad();
            for k in 1..=batch.batches.len() {
                let bundles: Vec<_> = batch.batches[k - 1].iter().map(|r| &r.bundle).collect();
                let rewards = self.pen_rewards(&batch, selection, k);
                pen_gradient(
                    &self.pen,
                    &mut self.phi,
                    &bundles,
                    &rewards,
                    self.config.pen_train.baseline,
                    self.config.pen_train.ascend,
                )?;
            }
            grad_norm_pen = self.phi.clip_grad_norm(self.config.grad_clip);
            self.phi_opt
                .step(&mut self.phi)
                .map_err(|err| Error::Diverged(format!("expansion update at iteration {e}: {err}")))?;
        }

        let batches = batch
            .batches
            .iter()
            .zip(&batch.selections)
            .enumerate()
            .map(|(i, (b, sel))| {
                let mut means = vec![0.0; self.registry.len()];
                for r in b {
                    for (m, v) in means.iter_mut().zip(r.rewards.values()) {
                        *m += v;
                    }
                }
                means.iter_mut().for_each(|m| *m /= b.len() as f64);
                BatchMetrics {
                    reward_id: i + 1,
                    condition: batch.condition,
                    means,
                    nd_fraction: sel.fraction(),
                }
            })
            .collect();
        self.iteration += 1;
        Ok(IterationMetrics {
            iteration: e,
            batches,
            grad_norm_t2i,
            grad_norm_pen,
            seconds: start.elapsed().as_secs_f64(),
        })
    }

    /// Pareto-masked update of both models.
    pub fn parrot_iteration(&mut self) -> Result<IterationMetrics> {
        self.step(&Selection::Pareto, UpdateScope::BOTH)
    }

    /// Scalarized update of both models on every sample.
    pub fn weighted_sum_iteration(&mut self, weights: &[f64]) -> Result<IterationMetrics> {
        if weights.len() != self.registry.len() {
            return Err(Error::Config(format!(
                "weights: expected {} entries, got {}",
                self.registry.len(),
                weights.len()
            )));
        }
        self.step(&Selection::Scalarized(weights.to_vec()), UpdateScope::BOTH)
    }

    /// Selection and scope of each of the E iterations under the configured
    /// mode.
    pub fn schedule_for_mode(&self) -> Vec<(Selection, UpdateScope)> {
        let e = self.config.iterations;
        match self.config.mode {
            Mode::Parrot => vec![(Selection::Pareto, UpdateScope::BOTH); e],
            Mode::WeightedSum | Mode::SingleReward(_) => {
                let w = self.config.scalar_weights().expect("validated weights");
                vec![(Selection::Scalarized(w), UpdateScope::BOTH); e]
            }
            Mode::T2iOnly => vec![(Selection::Pareto, UpdateScope::T2I); e],
            Mode::PenOnly => vec![(Selection::Pareto, UpdateScope::PEN); e],
            Mode::NoJoint => {
                let pen_phase = e / 2;
                let mut plan = vec![(Selection::Pareto, UpdateScope::PEN); pen_phase];
                plan.extend(vec![(Selection::Pareto, UpdateScope::T2I); e - pen_phase]);
                plan
            }
        }
    }

    /// Runs the remaining iterations of the configured mode, reporting each
    /// record to `observer` as it is produced.
    pub fn run<F>(&mut self, mut observer: F) -> Result<Vec<IterationMetrics>>
    where
        F: FnMut(&IterationMetrics) -> Result<()>,
    {
        let plan = self.schedule_for_mode();
        let mut out = Vec::with_capacity(plan.len());
        for (selection, scope) in plan.into_iter().skip(self.iteration) {
            let m = self.step(&selection, scope)?;
            observer(&m)?;
            out.push(m);
        }
        Ok(out)
    }

    /// Mean reward vector over `samples_per_condition` samples of every
    /// condition with reward identifiers `prefs`. Seeds depend only on
    /// `eval.seed`, so repeated calls agree exactly.
    pub fn evaluate(&self, prefs: &[usize], eval: &EvalConfig) -> Result<Vec<f64>> {
        let k = self.registry.len();
        let n_cond = self.config.data.n_conditions;
        let n = eval.samples_per_condition;
        if n == 0 {
            return Err(Error::contract("evaluation needs at least one sample"));
        }
        let jobs: Vec<(usize, usize)> = (0..n_cond).flat_map(|c| (0..n).map(move |i| (c, i))).collect();
        let per_sample: Vec<Vec<f64>> = jobs
            .par_iter()
            .map(|&(c, i)| self.evaluate_one(prefs, eval, c, i))
            .collect::<Result<_>>()?;
        let mut means = vec![0.0; k];
        for v in &per_sample {
            for (m, x) in means.iter_mut().zip(v) {
                *m += x;
            }
        }
        let total = per_sample.len() as f64;
        means.iter_mut().for_each(|m| *m /= total);
        Ok(means)
    }

    fn evaluate_one(&self, prefs: &[usize], eval: &EvalConfig, c: usize, i: usize) -> Result<Vec<f64>> {
        let k = self.registry.len();
        let seed = derive_seed(eval.seed, &[stream::EVAL, c as u64, i as u64]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (bundle, _) = self.pen.expand(&self.phi, c, &mut rng)?;
        let bundle = prepend_reward_tokens(&bundle, prefs, k)?;
        let (main, second) = guidance_conditions(&bundle, eval.guidance);
        let mut sum = vec![0.0; k];
        let draws = match eval.sampler {
            Sampler::Ddim { steps } => {
                let x0 = ddim_sample(
                    &self.denoiser,
                    &self.theta,
                    &main,
                    second.as_ref(),
                    eval.guidance,
                    &self.sched,
                    steps,
                    rng.random(),
                )?;
                add_rewards(&mut sum, &self.registry.eval_vector(x0, c)?);
                1
            }
            Sampler::Ancestral { repeats } => {
                for _ in 0..repeats {
                    let traj = sample_trajectory(
                        &self.denoiser,
                        &self.theta,
                        &main,
                        second.as_ref(),
                        eval.guidance,
                        &self.sched,
                        rng.random(),
                    )?;
                    add_rewards(&mut sum, &self.registry.eval_vector(traj.x0(), c)?);
                }
                repeats
            }
        };
        sum.iter_mut().for_each(|s| *s /= draws as f64);
        Ok(sum)
    }

    /// Writes θ to `theta.ckpt` and φ to `pen.ckpt` in `dir`.
    pub fn save_checkpoints(&self, dir: &Path) -> Result<()> {
        checkpoint::save(&self.theta, &dir.join("theta.ckpt"))?;
        checkpoint::save(&self.phi, &dir.join("pen.ckpt"))
    }
}

fn add_rewards(sum: &mut [f64], r: &RewardVector) {
    for (s, v) in sum.iter_mut().zip(r.values()) {
        *s += v;
    }
}

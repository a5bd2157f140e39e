//! Per-sample weighting rules and the gradient estimators built on them.
//!
//! All gradients produced here are loss gradients: a descent step on them
//! increases the weighted log-likelihood of the sampled trajectories.

use rayon::prelude::*;

use crate::diffusion::{accumulate_log_prob_grad, Condition, Denoiser, DiffusionSchedule, Guidance, Trajectory};
use crate::error::{Error, Result};
use crate::nn::{Grads, ParamStore};
use crate::pareto::{nd_set, ParetoMask, RewardVector};
use crate::pen::{PenPolicy, PromptBundle};

/// One sampled prompt expansion, its rollout and the rewards it earned.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub bundle: PromptBundle,
    pub pen_log_prob: f64,
    pub trajectory: Trajectory,
    pub rewards: RewardVector,
}

/// Conditions fed to the guidance rule for a bundle: under dual guidance
/// the original prompt is the main condition and the expanded bundle the
/// second; otherwise the expanded bundle is the only condition.
pub fn guidance_conditions(bundle: &PromptBundle, guidance: Guidance) -> (Condition, Option<Condition>) {
    match guidance {
        Guidance::Dual { .. } => (bundle.original_condition(), Some(bundle.condition())),
        _ => (bundle.condition(), None),
    }
}

/// Which samples of one reward-conditioned batch receive reward, and the
/// normaliser n(P) applied to them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchSelection {
    pub selected: Vec<bool>,
    pub normalizer: usize,
}

impl BatchSelection {
    pub fn from_mask(mask: &ParetoMask) -> Self {
        Self {
            selected: mask.flags(),
            normalizer: mask.count(),
        }
    }

    pub fn count(&self) -> usize {
        self.selected.iter().filter(|&&s| s).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.selected.len() as f64
    }
}

/// Non-dominated set of each batch on its own.
pub fn per_batch_selection(batches: &[Vec<RewardVector>]) -> Result<Vec<BatchSelection>> {
    batches
        .iter()
        .map(|b| nd_set(b).map(|m| BatchSelection::from_mask(&m)))
        .collect()
}

/// One non-dominated set over the union of all batches; every batch is
/// normalised by the size of that pooled set.
pub fn pooled_selection(batches: &[Vec<RewardVector>]) -> Result<Vec<BatchSelection>> {
    let all: Vec<RewardVector> = batches.iter().flatten().cloned().collect();
    let mask = nd_set(&all)?;
    let flags = mask.flags();
    let mut offset = 0;
    Ok(batches
        .iter()
        .map(|b| {
            let sel = BatchSelection {
                selected: flags[offset..offset + b.len()].to_vec(),
                normalizer: mask.count(),
            };
            offset += b.len();
            sel
        })
        .collect())
}

/// `r_k(i) / n(P)` for selected samples, zero elsewhere. `k` is 1-based.
pub fn pareto_weights(rewards: &[RewardVector], selection: &BatchSelection, k: usize) -> Vec<f64> {
    let n = selection.normalizer as f64;
    rewards
        .iter()
        .zip(&selection.selected)
        .map(|(r, &s)| if s { r.get(k - 1) / n } else { 0.0 })
        .collect()
}

/// `Σ_k w_k r_k(i)`.
pub fn scalarize(rewards: &RewardVector, weights: &[f64]) -> f64 {
    rewards.values().iter().zip(weights).map(|(r, w)| r * w).sum()
}

/// `scalarize(i) / N` for every sample.
pub fn scalarized_weights(rewards: &[RewardVector], weights: &[f64]) -> Vec<f64> {
    let n = rewards.len() as f64;
    rewards.iter().map(|r| scalarize(r, weights) / n).collect()
}

/// Loss gradient `−Σ_i w_i Σ_t ∇_θ log p_θ(x_{t−1}^i | x_t^i, c, t)`.
///
/// Samples with zero weight are skipped entirely. Per-sample gradients are
/// computed in parallel and summed in index order, so the result does not
/// depend on the worker count.
pub fn t2i_gradient(
    den: &Denoiser,
    store: &ParamStore,
    sched: &DiffusionSchedule,
    trajectories: &[&Trajectory],
    weights: &[f64],
) -> Result<Grads> {
    if trajectories.len() != weights.len() {
        return Err(Error::contract("one weight per trajectory required"));
    }
    if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
        return Err(Error::NonFinite(format!("policy-gradient weight {i}")));
    }
    let active: Vec<(usize, f64)> = weights
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, w)| w != 0.0)
        .collect();
    let parts: Vec<Grads> = active
        .par_iter()
        .map(|&(i, w)| {
            let mut g = Grads::zeros_like(store);
            accumulate_log_prob_grad(den, store, sched, trajectories[i], -w, &mut g)?;
            Ok(g)
        })
        .collect::<Result<_>>()?;
    let mut total = Grads::zeros_like(store);
    for g in &parts {
        total.add_assign(g);
    }
    Ok(total)
}

/// Expansion-policy REINFORCE: for each sample, advantage
/// `reward_i − baseline` (baseline = batch mean when enabled) weighted by
/// `1/N`, accumulated into the policy store's gradients.
pub fn pen_gradient(
    pen: &PenPolicy,
    store: &mut ParamStore,
    bundles: &[&PromptBundle],
    rewards: &[f64],
    baseline: bool,
    ascend: bool,
) -> Result<()> {
    if bundles.len() != rewards.len() || bundles.is_empty() {
        return Err(Error::contract("one reward per expansion required"));
    }
    let n = rewards.len() as f64;
    let mean = if baseline {
        rewards.iter().sum::<f64>() / n
    } else {
        0.0
    };
    for (b, r) in bundles.iter().zip(rewards) {
        pen.pen_grad_update(store, b, (r - mean) / n, ascend)?;
    }
    Ok(())
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::PretrainConfig;
use super::seeds::{derive_seed, stream};
use crate::diffusion::{
    forward_noise, standard_normal_2d, Condition, DataConfig, Denoiser, DiffusionSchedule,
};
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig, ParamStore};

/// One denoising training example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisePair {
    pub c: usize,
    pub t: usize,
    pub x_t: [f64; 2],
    pub noise: [f64; 2],
}

pub fn draw_pair<R: Rng + ?Sized>(
    data: &DataConfig,
    sched: &DiffusionSchedule,
    rng: &mut R,
) -> Result<NoisePair> {
    let c = rng.random_range(0..data.n_conditions);
    let x0 = data.sample_x0(c, rng);
    let t = rng.random_range(1..=sched.steps());
    let noise = standard_normal_2d(rng);
    Ok(NoisePair {
        c,
        t,
        x_t: forward_noise(x0, t, noise, sched)?,
        noise,
    })
}

/// Fixed set of conditional pairs for loss reporting.
pub fn holdout_set(
    data: &DataConfig,
    sched: &DiffusionSchedule,
    n: usize,
    seed: u64,
) -> Result<Vec<NoisePair>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[stream::HOLDOUT]));
    (0..n).map(|_| draw_pair(data, sched, &mut rng)).collect()
}

/// Mean squared noise-prediction error (summed over both coordinates).
pub fn denoising_loss(den: &Denoiser, store: &ParamStore, pairs: &[NoisePair]) -> Result<f64> {
    let mut total = 0.0;
    for p in pairs {
        let e = den.predict_noise(store, p.x_t, p.t, &Condition::original(p.c))?;
        total += (e[0] - p.noise[0]).powi(2) + (e[1] - p.noise[1]).powi(2);
    }
    Ok(total / pairs.len().max(1) as f64)
}

/// Loss of always predicting zero noise on the same pairs.
pub fn zero_predictor_loss(pairs: &[NoisePair]) -> f64 {
    pairs
        .iter()
        .map(|p| p.noise[0].powi(2) + p.noise[1].powi(2))
        .sum::<f64>()
        / pairs.len().max(1) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainReport {
    /// Training-batch loss before each step.
    pub batch_losses: Vec<f64>,
    /// (step, held-out loss) checkpoints, starting with step 0.
    pub holdout_curve: Vec<(usize, f64)>,
}

impl PretrainReport {
    pub fn initial_holdout(&self) -> Option<f64> {
        self.holdout_curve.first().map(|&(_, l)| l)
    }

    pub fn final_holdout(&self) -> Option<f64> {
        self.holdout_curve.last().map(|&(_, l)| l)
    }
}

/// Denoising score matching with classifier-free condition dropout.
///
/// Held-out loss is recorded at step 0, every `eval_every` steps (if
/// non-zero) and after the last step.
pub fn pretrain(
    den: &Denoiser,
    store: &mut ParamStore,
    sched: &DiffusionSchedule,
    data: &DataConfig,
    cfg: &PretrainConfig,
    seed: u64,
    eval_every: usize,
) -> Result<PretrainReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[stream::PRETRAIN]));
    let holdout = holdout_set(data, sched, cfg.holdout, seed)?;
    let mut adam = Adam::new(AdamConfig::with_lr(cfg.lr));
    let mut report = PretrainReport {
        batch_losses: Vec::with_capacity(cfg.steps),
        holdout_curve: Vec::new(),
    };
    if cfg.steps == 0 {
        return Ok(report);
    }
    report.holdout_curve.push((0, denoising_loss(den, store, &holdout)?));
    store.zero_grad();

    let batch = cfg.batch_size.max(1);
    for step in 0..cfg.steps {
        let mut loss = 0.0;
        for _ in 0..batch {
            let pair = draw_pair(data, sched, &mut rng)?;
            let cond = if rng.random::<f64>() < cfg.cond_dropout {
                Condition::Null
            } else {
                Condition::original(pair.c)
            };
            let (e, cache) = den.predict_noise_cached(store, pair.x_t, pair.t, &cond)?;
            let r = [e[0] - pair.noise[0], e[1] - pair.noise[1]];
            loss += r[0] * r[0] + r[1] * r[1];
            let scale = 2.0 / batch as f64;
            let mut grads = store.take_grads();
            let res = den.backward(store, &cache, [scale * r[0], scale * r[1]], &mut grads);
            store.put_grads(grads);
            res?;
        }
        let loss = loss / batch as f64;
        if !loss.is_finite() {
            return Err(Error::Diverged(format!(
                "pretraining loss is {loss} at step {step} (grad norm {})",
                store.grad_norm()
            )));
        }
        report.batch_losses.push(loss);
        adam.step(store)
            .map_err(|e| Error::Diverged(format!("pretraining step {step}: {e}")))?;

        let done = step + 1;
        if (eval_every > 0 && done % eval_every == 0) || done == cfg.steps {
            if report.holdout_curve.last().map(|&(s, _)| s) != Some(done) {
                report
                    .holdout_curve
                    .push((done, denoising_loss(den, store, &holdout)?));
            }
        }
    }
    Ok(report)
}

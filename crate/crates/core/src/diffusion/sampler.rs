use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::denoiser::{Condition, Denoiser};
use super::guidance::{combine_terms, Guidance, GuidanceTerm};
use super::schedule::DiffusionSchedule;
use crate::error::{Error, Result};
use crate::nn::{Grads, ParamStore};

/// Log-density of an isotropic 2-D Gaussian.
pub fn gaussian_log_prob(x: [f64; 2], mean: [f64; 2], sigma: f64) -> f64 {
    let var = sigma * sigma;
    let dx = x[0] - mean[0];
    let dy = x[1] - mean[1];
    -(2.0 * PI * var).ln() - (dx * dx + dy * dy) / (2.0 * var)
}

pub fn standard_normal_2d<R: Rng + ?Sized>(rng: &mut R) -> [f64; 2] {
    [StandardNormal.sample(rng), StandardNormal.sample(rng)]
}

/// One sampled reverse transition x_t → x_{t−1}.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub t: usize,
    pub x_t: [f64; 2],
    pub mean: [f64; 2],
    pub sigma: f64,
    pub x_prev: [f64; 2],
    pub log_prob: f64,
}

impl Transition {
    pub fn recompute_log_prob(&self) -> f64 {
        gaussian_log_prob(self.x_prev, self.mean, self.sigma)
    }
}

/// Full stochastic rollout from x_T to x_0.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Transitions in sampling order, t = T first.
    pub transitions: Vec<Transition>,
    pub main: Condition,
    pub second: Option<Condition>,
    pub guidance: Guidance,
    pub seed: u64,
}

impl Trajectory {
    pub fn x_start(&self) -> [f64; 2] {
        self.transitions[0].x_t
    }

    pub fn x0(&self) -> [f64; 2] {
        self.transitions[self.transitions.len() - 1].x_prev
    }

    /// States x_T, …, x_0.
    pub fn states(&self) -> Vec<[f64; 2]> {
        std::iter::once(self.x_start())
            .chain(self.transitions.iter().map(|tr| tr.x_prev))
            .collect()
    }

    pub fn total_log_prob(&self) -> f64 {
        self.transitions.iter().map(|tr| tr.log_prob).sum()
    }

    /// Debug dump, one transition per line:
    /// `t x_t0 x_t1 mean0 mean1 sigma x_prev0 x_prev1 log_prob`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for tr in &self.transitions {
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {} {} {}",
                tr.t,
                tr.x_t[0],
                tr.x_t[1],
                tr.mean[0],
                tr.mean[1],
                tr.sigma,
                tr.x_prev[0],
                tr.x_prev[1],
                tr.log_prob
            );
        }
        out
    }
}

/// Reverse step with an explicit standard-normal draw `z`:
/// `x_{t−1} = mean + σ_t z`.
pub fn sample_step_with_noise(
    den: &Denoiser,
    store: &ParamStore,
    x_t: [f64; 2],
    t: usize,
    terms: &[GuidanceTerm],
    sched: &DiffusionSchedule,
    z: [f64; 2],
) -> Result<Transition> {
    sched.check_step(t)?;
    let sigma = sched.sigma(t);
    if !(sigma > 0.0) {
        return Err(Error::contract(format!("sigma at step {t} is not positive")));
    }
    let eps = combine_terms(den, store, x_t, t, terms)?;
    let mean = sched.posterior_mean(t, x_t, eps);
    let x_prev = [mean[0] + sigma * z[0], mean[1] + sigma * z[1]];
    if !(x_prev[0].is_finite() && x_prev[1].is_finite()) {
        return Err(Error::NonFinite(format!("sample at step {t}")));
    }
    Ok(Transition {
        t,
        x_t,
        mean,
        sigma,
        x_prev,
        log_prob: gaussian_log_prob(x_prev, mean, sigma),
    })
}

/// Draws x_{t−1} ~ N(mean_θ(x_t, t), σ_t² I).
pub fn sample_step<R: Rng + ?Sized>(
    den: &Denoiser,
    store: &ParamStore,
    x_t: [f64; 2],
    t: usize,
    terms: &[GuidanceTerm],
    sched: &DiffusionSchedule,
    rng: &mut R,
) -> Result<Transition> {
    let z = standard_normal_2d(rng);
    sample_step_with_noise(den, store, x_t, t, terms, sched, z)
}

/// Ancestral rollout seeded by `seed`: x_T ~ N(0, I), then T reverse steps.
pub fn sample_trajectory(
    den: &Denoiser,
    store: &ParamStore,
    main: &Condition,
    second: Option<&Condition>,
    guidance: Guidance,
    sched: &DiffusionSchedule,
    seed: u64,
) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms = guidance.terms(main, second)?;
    let mut x = standard_normal_2d(&mut rng);
    let mut transitions = Vec::with_capacity(sched.steps());
    for t in (1..=sched.steps()).rev() {
        let tr = sample_step(den, store, x, t, &terms, sched, &mut rng)?;
        x = tr.x_prev;
        transitions.push(tr);
    }
    Ok(Trajectory {
        transitions,
        main: main.clone(),
        second: second.cloned(),
        guidance,
        seed,
    })
}

/// Adds `scale · ∇_θ Σ_t log p_θ(x_{t−1} | x_t, c, t)` for the stored
/// transitions of `traj` into `grads`.
pub fn accumulate_log_prob_grad(
    den: &Denoiser,
    store: &ParamStore,
    sched: &DiffusionSchedule,
    traj: &Trajectory,
    scale: f64,
    grads: &mut Grads,
) -> Result<()> {
    let terms = traj.guidance.terms(&traj.main, traj.second.as_ref())?;
    for tr in &traj.transitions {
        let var = tr.sigma * tr.sigma;
        // d log p / d mean, then through mean = x_t/√α − c·ε
        let c = sched.eps_coef(tr.t);
        let d_eps = [
            -c * (tr.x_prev[0] - tr.mean[0]) / var * scale,
            -c * (tr.x_prev[1] - tr.mean[1]) / var * scale,
        ];
        for term in &terms {
            let (_, cache) = den.predict_noise_cached(store, tr.x_t, tr.t, &term.cond)?;
            den.backward(
                store,
                &cache,
                [term.coef * d_eps[0], term.coef * d_eps[1]],
                grads,
            )?;
        }
    }
    Ok(())
}

/// Log-probability of the stored moves under the current parameters
/// (means recomputed from `store`).
pub fn trajectory_log_prob(
    den: &Denoiser,
    store: &ParamStore,
    sched: &DiffusionSchedule,
    traj: &Trajectory,
) -> Result<f64> {
    let terms = traj.guidance.terms(&traj.main, traj.second.as_ref())?;
    let mut total = 0.0;
    for tr in &traj.transitions {
        let eps = combine_terms(den, store, tr.x_t, tr.t, &terms)?;
        let mean = sched.posterior_mean(tr.t, tr.x_t, eps);
        total += gaussian_log_prob(tr.x_prev, mean, tr.sigma);
    }
    Ok(total)
}

/// Deterministic DDIM (η = 0) from a given x_T over `steps` evenly spaced
/// timesteps.
pub fn ddim_sample_from(
    den: &Denoiser,
    store: &ParamStore,
    main: &Condition,
    second: Option<&Condition>,
    guidance: Guidance,
    sched: &DiffusionSchedule,
    steps: usize,
    x_start: [f64; 2],
) -> Result<[f64; 2]> {
    let total = sched.steps();
    if steps == 0 || steps > total {
        return Err(Error::contract(format!("DDIM steps {steps} outside 1..={total}")));
    }
    let terms = guidance.terms(main, second)?;
    let timesteps: Vec<usize> = (1..=steps).map(|i| (i * total) / steps).collect();
    let mut x = x_start;
    for (idx, &t) in timesteps.iter().enumerate().rev() {
        let ab = sched.alpha_bar(t);
        let ab_prev = if idx == 0 {
            1.0
        } else {
            sched.alpha_bar(timesteps[idx - 1])
        };
        let eps = combine_terms(den, store, x, t, &terms)?;
        let (sa, sn) = (ab.sqrt(), (1.0 - ab).sqrt());
        let x0 = [(x[0] - sn * eps[0]) / sa, (x[1] - sn * eps[1]) / sa];
        let (pa, pn) = (ab_prev.sqrt(), (1.0 - ab_prev).sqrt());
        x = [pa * x0[0] + pn * eps[0], pa * x0[1] + pn * eps[1]];
    }
    Ok(x)
}

/// DDIM sample with x_T drawn from `seed`.
pub fn ddim_sample(
    den: &Denoiser,
    store: &ParamStore,
    main: &Condition,
    second: Option<&Condition>,
    guidance: Guidance,
    sched: &DiffusionSchedule,
    steps: usize,
    seed: u64,
) -> Result<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_start = standard_normal_2d(&mut rng);
    ddim_sample_from(den, store, main, second, guidance, sched, steps, x_start)
}

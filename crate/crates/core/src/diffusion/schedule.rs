use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            steps: 20,
            beta_start: 1e-4,
            beta_end: 0.1,
        }
    }
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<DiffusionSchedule> {
        DiffusionSchedule::linear(self.steps, self.beta_start, self.beta_end)
    }
}

/// Variance schedule indexed by step `t ∈ 1..=T`.
///
/// `sigma(t)` is the DDPM posterior standard deviation
/// `sqrt(β_t (1 − ᾱ_{t−1}) / (1 − ᾱ_t))`. At `t = 1` that variance is zero,
/// so it is clipped to the `t = 2` value (or `β_1` when `T = 1`) to keep
/// every reverse transition a proper Gaussian with a log-density.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
    sigmas: Vec<f64>,
}

impl DiffusionSchedule {
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::contract("schedule needs at least one step"));
        }
        let betas = if steps == 1 {
            vec![beta_start]
        } else {
            (0..steps)
                .map(|i| beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64)
                .collect()
        };
        Self::from_betas(betas)
    }

    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::contract("schedule needs at least one step"));
        }
        if betas.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
            return Err(Error::contract("betas must lie in (0, 1)"));
        }
        if betas.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::contract("betas must be non-decreasing"));
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(alphas.len());
        let mut acc = 1.0;
        for a in &alphas {
            acc *= a;
            alpha_bars.push(acc);
        }
        let posterior = |i: usize| {
            let prev = if i == 0 { 1.0 } else { alpha_bars[i - 1] };
            betas[i] * (1.0 - prev) / (1.0 - alpha_bars[i])
        };
        let mut sigmas: Vec<f64> = (0..betas.len()).map(|i| posterior(i).sqrt()).collect();
        sigmas[0] = if betas.len() > 1 {
            sigmas[1]
        } else {
            betas[0].sqrt()
        };
        Ok(Self {
            betas,
            alphas,
            alpha_bars,
            sigmas,
        })
    }

    /// T, the number of reverse transitions.
    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(Error::contract(format!(
                "step {t} outside 1..={}",
                self.steps()
            )));
        }
        Ok(())
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t - 1]
    }

    /// ᾱ_{t−1}, with ᾱ_0 = 1.
    pub fn alpha_bar_prev(&self, t: usize) -> f64 {
        if t == 1 {
            1.0
        } else {
            self.alpha_bars[t - 2]
        }
    }

    pub fn sigma(&self, t: usize) -> f64 {
        self.sigmas[t - 1]
    }

    /// Coefficient of ε in the posterior mean:
    /// `mean = x_t / sqrt(α_t) − eps_coef(t) · ε`.
    pub fn eps_coef(&self, t: usize) -> f64 {
        self.beta(t) / (self.alpha(t).sqrt() * (1.0 - self.alpha_bar(t)).sqrt())
    }

    /// Posterior mean of x_{t−1} given x_t and a noise estimate.
    pub fn posterior_mean(&self, t: usize, x_t: [f64; 2], eps: [f64; 2]) -> [f64; 2] {
        let inv_sqrt_alpha = 1.0 / self.alpha(t).sqrt();
        let c = self.eps_coef(t);
        [
            x_t[0] * inv_sqrt_alpha - c * eps[0],
            x_t[1] * inv_sqrt_alpha - c * eps[1],
        ]
    }
}

/// x_t = sqrt(ᾱ_t)·x0 + sqrt(1 − ᾱ_t)·noise.
pub fn forward_noise(
    x0: [f64; 2],
    t: usize,
    noise: [f64; 2],
    sched: &DiffusionSchedule,
) -> Result<[f64; 2]> {
    sched.check_step(t)?;
    let ab = sched.alpha_bar(t);
    let (s, n) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok([s * x0[0] + n * noise[0], s * x0[1] + n * noise[1]])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schedule_shape() {
        let s = ScheduleConfig::default().build().unwrap();
        assert_eq!(s.steps(), 20);
        assert_eq!(s.beta(1), 1e-4);
        assert!((s.beta(20) - 0.1).abs() < 1e-15);
        for t in 2..=20 {
            assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
            assert!(s.alpha_bar(t) > 0.0 && s.alpha_bar(t) < 1.0);
        }
        for t in 1..=20 {
            assert!(s.sigma(t) > 0.0);
        }
        assert_eq!(s.sigma(1), s.sigma(2));
    }

    #[test]
    fn invalid_betas_rejected() {
        assert!(DiffusionSchedule::from_betas(vec![]).is_err());
        assert!(DiffusionSchedule::from_betas(vec![0.0, 0.1]).is_err());
        assert!(DiffusionSchedule::from_betas(vec![0.2, 0.1]).is_err());
        assert!(DiffusionSchedule::from_betas(vec![1.0]).is_err());
        assert!(DiffusionSchedule::linear(0, 1e-4, 0.1).is_err());
    }

    #[test]
    fn single_step_schedule_uses_beta() {
        let s = DiffusionSchedule::linear(1, 0.04, 0.1).unwrap();
        assert_eq!(s.steps(), 1);
        assert!((s.sigma(1) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn forward_noise_zero_noise_scales_x0() {
        let s = ScheduleConfig::default().build().unwrap();
        let xt = forward_noise([1.5, -0.5], 7, [0.0, 0.0], &s).unwrap();
        let r = s.alpha_bar(7).sqrt();
        assert_eq!(xt, [r * 1.5, r * -0.5]);
    }

    #[test]
    fn forward_noise_tiny_betas_keep_x0() {
        let s = DiffusionSchedule::linear(5, 1e-9, 1e-9).unwrap();
        let xt = forward_noise([0.7, 0.2], 5, [1.0, -1.0], &s).unwrap();
        assert!((xt[0] - 0.7).abs() < 1e-4 && (xt[1] - 0.2).abs() < 1e-4);
    }

    #[test]
    fn forward_noise_step_range() {
        let s = ScheduleConfig::default().build().unwrap();
        assert!(forward_noise([0.0; 2], 0, [0.0; 2], &s).is_err());
        assert!(forward_noise([0.0; 2], 21, [0.0; 2], &s).is_err());
    }
}

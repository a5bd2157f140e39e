//! Monte-Carlo checks of the forward process, reverse steps and expansion
//! policy against their closed forms (3 standard errors).

use pareto_rl::diffusion::{
    forward_noise, sample_step, sample_trajectory, standard_normal_2d, Condition, Denoiser,
    DenoiserConfig, DiffusionSchedule, Guidance, ScheduleConfig,
};
use pareto_rl::pen::{PenConfig, PenPolicy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Moments {
    mean: [f64; 2],
    cov: [[f64; 2]; 2],
}

fn moments(xs: &[[f64; 2]]) -> Moments {
    let n = xs.len() as f64;
    let mean = [
        xs.iter().map(|x| x[0]).sum::<f64>() / n,
        xs.iter().map(|x| x[1]).sum::<f64>() / n,
    ];
    let mut cov = [[0.0; 2]; 2];
    for x in xs {
        for i in 0..2 {
            for j in 0..2 {
                cov[i][j] += (x[i] - mean[i]) * (x[j] - mean[j]) / (n - 1.0);
            }
        }
    }
    Moments { mean, cov }
}

/// Checks mean and covariance of draws from N(mu, var·I).
fn assert_isotropic(xs: &[[f64; 2]], mu: [f64; 2], var: f64) {
    let n = xs.len() as f64;
    let m = moments(xs);
    let se_mean = (var / n).sqrt();
    let se_var = var * (2.0 / (n - 1.0)).sqrt();
    let se_cov = var / n.sqrt();
    for i in 0..2 {
        assert!((m.mean[i] - mu[i]).abs() < 3.0 * se_mean, "mean[{i}] {} vs {}", m.mean[i], mu[i]);
        assert!((m.cov[i][i] - var).abs() < 3.0 * se_var, "var[{i}] {} vs {var}", m.cov[i][i]);
    }
    assert!(m.cov[0][1].abs() < 3.0 * se_cov, "cov {}", m.cov[0][1]);
}

fn schedule() -> DiffusionSchedule {
    ScheduleConfig::default().build().unwrap()
}

#[test]
fn forward_marginal_matches_closed_form() {
    let sched = schedule();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x0 = [1.5, -0.5];
    for t in [1, 10, 20] {
        let xs: Vec<[f64; 2]> = (0..100_000)
            .map(|_| forward_noise(x0, t, standard_normal_2d(&mut rng), &sched).unwrap())
            .collect();
        let ab = sched.alpha_bar(t);
        assert_isotropic(&xs, [ab.sqrt() * x0[0], ab.sqrt() * x0[1]], 1.0 - ab);
    }
}

#[test]
fn forward_noise_without_noise_scales_x0() {
    let sched = schedule();
    let x0 = [0.3, -2.0];
    let ab = sched.alpha_bar(7).sqrt();
    assert_eq!(forward_noise(x0, 7, [0.0, 0.0], &sched).unwrap(), [ab * x0[0], ab * x0[1]]);
    assert!(forward_noise(x0, 0, [0.0, 0.0], &sched).is_err());
    assert!(forward_noise(x0, 21, [0.0, 0.0], &sched).is_err());
}

#[test]
fn tiny_betas_leave_x0_almost_unchanged() {
    let sched = DiffusionSchedule::linear(5, 1e-10, 1e-9).unwrap();
    let x = forward_noise([1.0, 2.0], 5, [1.0, -1.0], &sched).unwrap();
    assert!((x[0] - 1.0).abs() < 1e-4 && (x[1] - 2.0).abs() < 1e-4);
}

#[test]
fn reverse_step_draws_match_posterior_gaussian() {
    let sched = schedule();
    let (den, store) = Denoiser::init(DenoiserConfig::default(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let terms = Guidance::Cfg { w: 2.0 }
        .terms(&Condition::original(3), None)
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x_t = [0.4, -1.1];
    let t = 12;
    let steps: Vec<_> = (0..10_000)
        .map(|_| sample_step(&den, &store, x_t, t, &terms, &sched, &mut rng).unwrap())
        .collect();
    let mean = steps[0].mean;
    assert!(steps.iter().all(|s| s.mean == mean && s.sigma == sched.sigma(t)));
    for s in &steps {
        assert!((s.log_prob - s.recompute_log_prob()).abs() < 1e-12);
    }
    let xs: Vec<[f64; 2]> = steps.iter().map(|s| s.x_prev).collect();
    assert_isotropic(&xs, mean, sched.sigma(t).powi(2));
}

#[test]
fn trajectories_record_every_step_and_replay() {
    let (den, store) = Denoiser::init(DenoiserConfig::default(), &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
    let sched = schedule();
    let main = Condition::original(2);
    let second = Condition::Tokens {
        original: 2,
        expansions: vec![1, 5],
        reward_prefs: vec![1, 3],
    };
    for g in [Guidance::Conditional, Guidance::Cfg { w: 5.0 }, Guidance::Dual { w1: 5.0, w2: 5.0 }] {
        let a = sample_trajectory(&den, &store, &main, Some(&second), g, &sched, 99).unwrap();
        let b = sample_trajectory(&den, &store, &main, Some(&second), g, &sched, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.transitions.len(), 20);
        let ts: Vec<usize> = a.transitions.iter().map(|tr| tr.t).collect();
        assert_eq!(ts, (1..=20).rev().collect::<Vec<_>>());
        for w in a.transitions.windows(2) {
            assert_eq!(w[0].x_prev, w[1].x_t);
        }
        for tr in &a.transitions {
            assert!((tr.log_prob - tr.recompute_log_prob()).abs() < 1e-9);
        }
    }

    let one = DiffusionSchedule::linear(1, 0.1, 0.1).unwrap();
    let traj = sample_trajectory(&den, &store, &main, None, Guidance::Conditional, &one, 3).unwrap();
    assert_eq!(traj.transitions.len(), 1);
    assert_eq!(traj.dump().lines().count(), 1);
}

#[test]
fn expansion_slot_frequencies_match_softmax() {
    let cfg = PenConfig::default();
    let (pen, mut store) = PenPolicy::init(cfg).unwrap();
    // non-uniform logits on condition 4
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let id = pen.logits_id();
    let per_c = cfg.slots * cfg.vocab;
    for (i, v) in store.get_mut(id).value[4 * per_c..5 * per_c].iter_mut().enumerate() {
        *v = ((i * 7) % 5) as f64 * 0.6 - 1.0;
    }
    let n = 100_000;
    let mut counts = vec![vec![0usize; cfg.vocab]; cfg.slots];
    for _ in 0..n {
        let (b, lp) = pen.expand(&store, 4, &mut rng).unwrap();
        assert!((lp - pen.log_prob(&store, &b).unwrap()).abs() < 1e-12);
        for (slot, &e) in b.expansions.iter().enumerate() {
            counts[slot][e] += 1;
        }
    }
    for slot in 0..cfg.slots {
        let probs = pen.slot_probs(&store, 4, slot).unwrap();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for (e, &p) in probs.iter().enumerate() {
            let freq = counts[slot][e] as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() < 3.0 * se, "slot {slot} token {e}: {freq} vs {p}");
        }
    }
}

//! Policy-gradient plumbing: analytic log-likelihood gradients against
//! finite differences, and the Pareto-masked update's algebra.

use pareto_rl::diffusion::{
    accumulate_log_prob_grad, sample_trajectory, trajectory_log_prob, Condition, Denoiser,
    DenoiserConfig, DiffusionSchedule, Guidance, ScheduleConfig, Trajectory,
};
use pareto_rl::nn::{finite_diff_check, Grads, ParamStore};
use pareto_rl::pareto::{nd_set, RewardVector};
use pareto_rl::trainer::{
    pareto_weights, per_batch_selection, scalarized_weights, t2i_gradient, BatchSelection,
    RunConfig, Trainer,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn setup() -> (Denoiser, ParamStore, DiffusionSchedule) {
    let (den, store) = Denoiser::init(DenoiserConfig::default(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    // non-zero identifier and expansion rows so their gradients are exercised
    let mut store = store;
    for id in [den.reward_embedding_id(), den.expansion_embedding_id()] {
        for (i, v) in store.get_mut(id).value.iter_mut().enumerate() {
            *v = ((i * 37 % 11) as f64 - 5.0) * 0.05;
        }
    }
    (den, store, ScheduleConfig::default().build().unwrap())
}

fn expanded(c: usize) -> Condition {
    Condition::Tokens {
        original: c,
        expansions: vec![3, 9],
        reward_prefs: vec![2, 4],
    }
}

#[test]
fn log_prob_gradient_matches_finite_differences() {
    let (den, store, sched) = setup();
    let main = Condition::original(1);
    let second = expanded(1);
    for (g, main, second) in [
        (Guidance::Conditional, &main, None),
        (Guidance::Conditional, &second, None),
        (Guidance::Cfg { w: 5.0 }, &main, None),
        (Guidance::Dual { w1: 5.0, w2: 3.0 }, &main, Some(&second)),
    ] {
        let traj = sample_trajectory(&den, &store, main, second, g, &sched, 17).unwrap();
        let mut grads = Grads::zeros_like(&store);
        accumulate_log_prob_grad(&den, &store, &sched, &traj, 1.0, &mut grads).unwrap();
        let mut probe = store.clone();
        probe.put_grads(grads);
        let report = finite_diff_check(
            |p: &ParamStore| trajectory_log_prob(&den, p, &sched, &traj).unwrap(),
            &probe,
            60,
            1e-5,
            &mut ChaCha8Rng::seed_from_u64(4),
        );
        assert!(report.max_rel_error < 1e-4, "{g:?}: {report:?}");
    }
}

#[test]
fn gradient_scale_is_linear() {
    let (den, store, sched) = setup();
    let traj = sample_trajectory(&den, &store, &expanded(2), None, Guidance::Conditional, &sched, 5).unwrap();
    let mut one = Grads::zeros_like(&store);
    accumulate_log_prob_grad(&den, &store, &sched, &traj, 1.0, &mut one).unwrap();
    let mut three = Grads::zeros_like(&store);
    accumulate_log_prob_grad(&den, &store, &sched, &traj, -3.0, &mut three).unwrap();
    for (a, b) in one.flat().iter().zip(three.flat()) {
        assert!((-3.0 * a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

fn small_trainer() -> Trainer {
    let config = RunConfig {
        batch_size: 16,
        ..RunConfig::default()
    };
    Trainer::new(config).unwrap()
}

#[test]
fn dominated_samples_contribute_nothing() {
    let tr = small_trainer();
    let batch = tr.sample_iteration(0).unwrap();
    let k = 3;
    let rollouts = &batch.batches[k - 1];
    let rewards = batch.rewards(k);
    let sel = &batch.selections[k - 1];
    assert!(sel.count() < rollouts.len(), "reference batch should contain dominated samples");
    let weights = pareto_weights(&rewards, sel, k);
    let trajs: Vec<&Trajectory> = rollouts.iter().map(|r| &r.trajectory).collect();
    let full = t2i_gradient(tr.denoiser(), tr.theta(), tr.schedule(), &trajs, &weights).unwrap();

    let keep: Vec<usize> = (0..rollouts.len()).filter(|&i| sel.selected[i]).collect();
    let sub_trajs: Vec<&Trajectory> = keep.iter().map(|&i| trajs[i]).collect();
    let sub_w: Vec<f64> = keep.iter().map(|&i| weights[i]).collect();
    let sub = t2i_gradient(tr.denoiser(), tr.theta(), tr.schedule(), &sub_trajs, &sub_w).unwrap();
    assert_eq!(full.flat(), sub.flat());

    // replacing every dominated trajectory changes nothing
    let other = tr.sample_iteration(1).unwrap();
    let swapped: Vec<&Trajectory> = (0..rollouts.len())
        .map(|i| if sel.selected[i] { trajs[i] } else { &other.batches[0][i].trajectory })
        .collect();
    let again = t2i_gradient(tr.denoiser(), tr.theta(), tr.schedule(), &swapped, &weights).unwrap();
    assert_eq!(full.flat(), again.flat());
}

#[test]
fn equal_rewards_reduce_to_plain_reinforce() {
    let (den, store, sched) = setup();
    let n = 6;
    let trajs: Vec<Trajectory> = (0..n)
        .map(|i| sample_trajectory(&den, &store, &expanded(0), None, Guidance::Conditional, &sched, i).unwrap())
        .collect();
    let rewards = vec![RewardVector::new(vec![0.4, 0.7, 0.1]).unwrap(); n as usize];
    let sel = &per_batch_selection(&[rewards.clone()]).unwrap()[0];
    assert_eq!(sel.count(), n as usize);
    let w = pareto_weights(&rewards, sel, 2);
    assert!(w.iter().all(|&x| x == 0.7 / n as f64));

    let refs: Vec<&Trajectory> = trajs.iter().collect();
    let masked = t2i_gradient(&den, &store, &sched, &refs, &w).unwrap();
    let mut plain = Grads::zeros_like(&store);
    for t in &trajs {
        accumulate_log_prob_grad(&den, &store, &sched, t, -0.7 / n as f64, &mut plain).unwrap();
    }
    for (a, b) in masked.flat().iter().zip(plain.flat()) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-3));
    }
}

#[test]
fn all_selected_parrot_equals_k_times_uniform_weighted_sum() {
    let (den, store, sched) = setup();
    let trajs: Vec<Trajectory> = (0..5)
        .map(|i| sample_trajectory(&den, &store, &Condition::original(4), None, Guidance::Conditional, &sched, 40 + i).unwrap())
        .collect();
    let refs: Vec<&Trajectory> = trajs.iter().collect();
    let rewards: Vec<RewardVector> = (0..5)
        .map(|i| RewardVector::new(vec![0.1 * i as f64, 0.9 - 0.1 * i as f64, 0.3 + 0.05 * i as f64, 0.5]).unwrap())
        .collect();
    let all = BatchSelection {
        selected: vec![true; 5],
        normalizer: 5,
    };
    let mut parrot = Grads::zeros_like(&store);
    for k in 1..=4 {
        parrot.add_assign(&t2i_gradient(&den, &store, &sched, &refs, &pareto_weights(&rewards, &all, k)).unwrap());
    }
    let mut ws = t2i_gradient(&den, &store, &sched, &refs, &scalarized_weights(&rewards, &[0.25; 4])).unwrap();
    ws.scale(4.0);
    for (a, b) in parrot.flat().iter().zip(ws.flat()) {
        assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-6), "{a} vs {b}");
    }
}

#[test]
fn single_sample_batch_is_its_own_front() {
    let r = vec![RewardVector::new(vec![0.2, 0.6]).unwrap()];
    assert_eq!(nd_set(&r).unwrap().selected(), &[0]);
    let sel = &per_batch_selection(&[r.clone()]).unwrap()[0];
    assert_eq!(pareto_weights(&r, sel, 2), vec![0.6]);
}

#[test]
fn zero_weights_give_zero_gradient() {
    let (den, store, sched) = setup();
    let t = sample_trajectory(&den, &store, &expanded(5), None, Guidance::Conditional, &sched, 1).unwrap();
    let g = t2i_gradient(&den, &store, &sched, &[&t, &t], &[0.0, 0.0]).unwrap();
    assert!(g.flat().iter().all(|&x| x == 0.0));
    assert!(t2i_gradient(&den, &store, &sched, &[&t], &[f64::NAN]).is_err());
    assert!(t2i_gradient(&den, &store, &sched, &[&t], &[]).is_err());
}

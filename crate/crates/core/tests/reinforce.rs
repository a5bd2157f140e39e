//! Expansion-policy REINFORCE against closed forms and a two-armed bandit.

use pareto_rl::nn::{Adam, AdamConfig, ParamStore};
use pareto_rl::pen::{PenConfig, PenPolicy, PromptBundle};
use pareto_rl::trainer::pen_gradient;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn two_token_policy(logits: [f64; 2]) -> (PenPolicy, ParamStore) {
    let (pen, mut store) = PenPolicy::init(PenConfig {
        n_conditions: 1,
        slots: 1,
        vocab: 2,
    })
    .unwrap();
    store.get_mut(pen.logits_id()).value = logits.to_vec();
    (pen, store)
}

fn draw(pen: &PenPolicy, store: &ParamStore, n: usize, rng: &mut ChaCha8Rng) -> Vec<PromptBundle> {
    (0..n).map(|_| pen.expand(store, 0, rng).unwrap().0).collect()
}

#[test]
fn single_expansion_gradient_is_onehot_minus_probs() {
    let (pen, mut store) = two_token_policy([0.3, -0.4]);
    let b = PromptBundle {
        original: 0,
        expansions: vec![1],
        reward_prefs: vec![],
    };
    pen.accumulate_log_prob_grad(&mut store, &b, 1.0).unwrap();
    let p1 = 1.0 / (1.0 + (0.3f64 - -0.4).exp());
    let g = &store.get(pen.logits_id()).grad;
    assert!((g[0] + (1.0 - p1)).abs() < 1e-15);
    assert!((g[1] - (1.0 - p1)).abs() < 1e-15);
}

#[test]
fn monte_carlo_estimate_matches_exact_expected_reward_gradient() {
    let logits = [0.5, -0.2];
    let reward = [0.2, 0.9];
    let (pen, mut store) = two_token_policy(logits);
    let p = pen.slot_probs(&store, 0, 0).unwrap();
    let mean_r = p[0] * reward[0] + p[1] * reward[1];
    // ∂E[r]/∂l_j = p_j (r_j − E[r]); the accumulated loss gradient is its negative
    let exact: Vec<f64> = (0..2).map(|j| -p[j] * (reward[j] - mean_r)).collect();

    let n = 100_000;
    let bundles = draw(&pen, &store, n, &mut ChaCha8Rng::seed_from_u64(12));
    let rewards: Vec<f64> = bundles.iter().map(|b| reward[b.expansions[0]]).collect();
    let refs: Vec<&PromptBundle> = bundles.iter().collect();
    pen_gradient(&pen, &mut store, &refs, &rewards, false, true).unwrap();
    let got = store.get(pen.logits_id()).grad.clone();

    for j in 0..2 {
        let per: Vec<f64> = bundles
            .iter()
            .map(|b| {
                let e = b.expansions[0];
                let onehot = if e == j { 1.0 } else { 0.0 };
                -reward[e] * (onehot - p[j])
            })
            .collect();
        let m = per.iter().sum::<f64>() / n as f64;
        let var = per.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((got[j] - m).abs() < 1e-12);
        assert!((got[j] - exact[j]).abs() < 3.0 * se, "logit {j}: {} vs {} (se {se})", got[j], exact[j]);
    }
}

#[test]
fn equal_rewards_cancel_under_the_batch_mean_baseline() {
    let (pen, mut store) = two_token_policy([0.0, 0.0]);
    let bundles = draw(&pen, &store, 50, &mut ChaCha8Rng::seed_from_u64(2));
    let refs: Vec<&PromptBundle> = bundles.iter().collect();
    pen_gradient(&pen, &mut store, &refs, &vec![0.5; 50], true, true).unwrap();
    assert!(store.get(pen.logits_id()).grad.iter().all(|&g| g == 0.0));
}

#[test]
fn ascend_flag_flips_the_sign() {
    let (pen, mut up) = two_token_policy([0.1, 0.0]);
    let mut down = up.clone();
    let bundles = draw(&pen, &up, 8, &mut ChaCha8Rng::seed_from_u64(9));
    let refs: Vec<&PromptBundle> = bundles.iter().collect();
    let rewards: Vec<f64> = bundles.iter().map(|b| b.expansions[0] as f64).collect();
    pen_gradient(&pen, &mut up, &refs, &rewards, true, true).unwrap();
    pen_gradient(&pen, &mut down, &refs, &rewards, true, false).unwrap();
    for (a, b) in up.get(pen.logits_id()).grad.iter().zip(&down.get(pen.logits_id()).grad) {
        assert_eq!(*a, -*b);
    }
}

#[test]
fn bandit_learns_the_rewarded_token() {
    let (pen, mut store) = two_token_policy([0.0, 0.0]);
    let mut opt = Adam::new(AdamConfig::with_lr(0.05));
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..500 {
        let bundles = draw(&pen, &store, 16, &mut rng);
        let rewards: Vec<f64> = bundles.iter().map(|b| b.expansions[0] as f64).collect();
        let refs: Vec<&PromptBundle> = bundles.iter().collect();
        store.zero_grad();
        pen_gradient(&pen, &mut store, &refs, &rewards, true, true).unwrap();
        opt.step(&mut store).unwrap();
    }
    let p = pen.slot_probs(&store, 0, 0).unwrap();
    assert!(p[1] > 0.95, "P(rewarded token) = {}", p[1]);
}

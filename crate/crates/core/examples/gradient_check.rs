//! Checks the analytic gradient of a trajectory's log-likelihood against
//! central finite differences, for each guidance rule.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use pareto_rl::diffusion::{
    accumulate_log_prob_grad, sample_trajectory, trajectory_log_prob, Condition, Denoiser,
    DenoiserConfig, Guidance, ScheduleConfig,
};
use pareto_rl::nn::{finite_diff_check, Grads, ParamStore};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> pareto_rl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (den, store) = Denoiser::init(DenoiserConfig::default(), &mut rng)?;
    let sched = ScheduleConfig::default().build()?;
    let original = Condition::original(2);
    let expanded = Condition::Tokens {
        original: 2,
        expansions: vec![4, 11],
        reward_prefs: vec![1],
    };

    for guidance in [Guidance::Conditional, Guidance::Cfg { w: 5.0 }, Guidance::Dual { w1: 5.0, w2: 5.0 }] {
        let traj = sample_trajectory(&den, &store, &original, Some(&expanded), guidance, &sched, 42)?;
        let mut grads = Grads::zeros_like(&store);
        accumulate_log_prob_grad(&den, &store, &sched, &traj, 1.0, &mut grads)?;
        let mut probe = store.clone();
        probe.put_grads(grads);
        let report = finite_diff_check(
            |p: &ParamStore| trajectory_log_prob(&den, p, &sched, &traj).expect("log-prob"),
            &probe,
            100,
            1e-5,
            &mut rng,
        );
        println!(
            "{guidance:?}: log p = {:.3}, max relative error over {} coordinates {:.2e}",
            traj.total_log_prob(),
            report.coords.len(),
            report.max_rel_error
        );
    }
    Ok(())
}

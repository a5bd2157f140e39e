//! One reverse-diffusion rollout in the line-oriented dump format, and its
//! log-probability recomputed from the stored transitions.
//!
//! ```text
//! cargo run --release --example trajectory_dump
//! ```

use pareto_rl::diffusion::{sample_trajectory, trajectory_log_prob, Condition, Denoiser, DenoiserConfig, Guidance, ScheduleConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> pareto_rl::Result<()> {
    let (den, store) = Denoiser::init(DenoiserConfig::default(), &mut ChaCha8Rng::seed_from_u64(9))?;
    let sched = ScheduleConfig::default().build()?;
    let traj = sample_trajectory(&den, &store, &Condition::original(0), None, Guidance::Cfg { w: 3.0 }, &sched, 2024)?;
    println!("# t x_t mean sigma x_prev log_prob");
    print!("{}", traj.dump());
    let stored: f64 = traj.transitions.iter().map(|t| t.recompute_log_prob()).sum();
    println!(
        "\nsum of stored log-probs {:.6}, recomputed from parameters {:.6}",
        stored,
        trajectory_log_prob(&den, &store, &sched, &traj)?
    );
    Ok(())
}

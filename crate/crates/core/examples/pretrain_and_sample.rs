//! Pretrains the conditional denoiser on the ring of clusters, compares
//! sample means with the cluster centres, and round-trips a checkpoint.
//!
//! ```text
//! cargo run --release --example pretrain_and_sample
//! ```

use pareto_rl::diffusion::{sample_trajectory, Condition, Guidance};
use pareto_rl::nn::checkpoint;
use pareto_rl::trainer::{RunConfig, Trainer};

fn main() -> pareto_rl::Result<()> {
    let mut trainer = Trainer::new(RunConfig::default())?;
    let report = trainer.pretrain(250)?;
    for (step, loss) in &report.holdout_curve {
        println!("step {step:>5}  held-out loss {loss:.4}");
    }

    println!("\ncondition  centre            sample mean (500 draws)");
    for (c, mu) in trainer.config().data.centers().iter().enumerate() {
        let mut mean = [0.0; 2];
        for seed in 0..500 {
            let x = sample_trajectory(
                trainer.denoiser(),
                trainer.theta(),
                &Condition::original(c),
                None,
                Guidance::Conditional,
                trainer.schedule(),
                seed,
            )?
            .x0();
            mean[0] += x[0] / 500.0;
            mean[1] += x[1] / 500.0;
        }
        println!("{c:>9}  ({:+.2}, {:+.2})    ({:+.2}, {:+.2})", mu[0], mu[1], mean[0], mean[1]);
    }

    let bytes = checkpoint::encode(trainer.theta());
    let restored = checkpoint::decode(&bytes)?;
    println!(
        "\ncheckpoint: {} bytes, {} arrays, round trip exact: {}",
        bytes.len(),
        restored.len(),
        restored.flat_values() == trainer.theta().flat_values()
    );
    Ok(())
}

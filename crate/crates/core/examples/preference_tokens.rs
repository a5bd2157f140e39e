//! After Pareto fine-tuning, the reward identifiers prepended at inference
//! shift which reward the samples favour.
//!
//! ```text
//! ITERATIONS=900 cargo run --release --example preference_tokens
//! ```

use pareto_rl::trainer::{EvalConfig, RunConfig, Trainer};

fn main() -> pareto_rl::Result<()> {
    let iterations = std::env::var("ITERATIONS").ok().and_then(|v| v.parse().ok()).unwrap_or(300);
    let mut tr = Trainer::new(RunConfig {
        iterations,
        ..RunConfig::default()
    })?;
    tr.pretrain(0)?;
    tr.run(|m| {
        if (m.iteration + 1) % 100 == 0 {
            println!("iteration {:>4}: mean rewards {:.3?}", m.iteration + 1, m.mean_rewards());
        }
        Ok(())
    })?;

    let eval = EvalConfig::default();
    let k = tr.registry().len();
    let per_pref: Vec<Vec<f64>> = (1..=k).map(|p| tr.evaluate(&[p], &eval)).collect::<pareto_rl::Result<_>>()?;
    println!("\nprefs  {}", (1..=k).map(|j| format!("   r{j}  ")).collect::<String>());
    for (p, means) in per_pref.iter().enumerate() {
        println!("{{{}}}    {}", p + 1, means.iter().map(|m| format!("{m:.3}  ")).collect::<String>());
    }
    for r in 0..k {
        let others = (0..k).filter(|&j| j != r).map(|j| per_pref[j][r]).sum::<f64>() / (k - 1) as f64;
        println!("reward {}: own identifier {:+.3} vs others", r + 1, per_pref[r][r] - others);
    }
    Ok(())
}

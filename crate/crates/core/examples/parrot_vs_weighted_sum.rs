//! Fine-tunes the same pretrained model with Pareto-masked updates and
//! with the weighted sum {0.7, 0.1, 0.1, 0.1}, then compares on-policy
//! reward means against the pretrained baseline.
//!
//! ```text
//! ITERATIONS=300 cargo run --release --example parrot_vs_weighted_sum
//! ```

use pareto_rl::trainer::{EvalConfig, Mode, RunConfig, Sampler, Trainer};

fn on_policy(tr: &Trainer) -> pareto_rl::Result<Vec<f64>> {
    let eval = EvalConfig {
        sampler: Sampler::Ancestral { repeats: 1 },
        guidance: tr.config().rollout_guidance,
        ..EvalConfig::default()
    };
    let k = tr.registry().len();
    let mut avg = vec![0.0; k];
    for pref in 1..=k {
        for (a, m) in avg.iter_mut().zip(tr.evaluate(&[pref], &eval)?) {
            *a += m / k as f64;
        }
    }
    Ok(avg)
}

fn main() -> pareto_rl::Result<()> {
    let iterations = std::env::var("ITERATIONS").ok().and_then(|v| v.parse().ok()).unwrap_or(100);
    let mut pre = Trainer::new(RunConfig::default())?;
    pre.pretrain(0)?;
    let baseline = on_policy(&pre)?;
    println!("pretrained        {}", row(&baseline, None));

    for (label, mode, weights) in [
        ("parrot", Mode::Parrot, None),
        ("weighted sum", Mode::WeightedSum, Some(vec![0.7, 0.1, 0.1, 0.1])),
    ] {
        let config = RunConfig {
            mode,
            weights,
            iterations,
            ..RunConfig::default()
        };
        let mut tr = Trainer::from_params(config, pre.theta().clone(), pre.phi().clone())?;
        let metrics = tr.run(|_| Ok(()))?;
        let nd: Vec<f64> = metrics.iter().flat_map(|m| m.batches.iter().map(|b| b.nd_fraction)).collect();
        println!(
            "{label:<17} {}   mean nd_fraction {:.3}",
            row(&on_policy(&tr)?, Some(&baseline)),
            nd.iter().sum::<f64>() / nd.len() as f64
        );
    }
    Ok(())
}

fn row(v: &[f64], base: Option<&[f64]>) -> String {
    v.iter()
        .enumerate()
        .map(|(i, x)| match base {
            Some(b) => format!("{x:.3} ({:+.3})", x - b[i]),
            None => format!("{x:.3}         "),
        })
        .collect::<Vec<_>>()
        .join("  ")
}

//! Evaluation under conditional sampling, classifier-free guidance and
//! original-prompt-centred dual guidance on a pretrained model.
//!
//! ```text
//! cargo run --release --example guidance
//! ```

use pareto_rl::diffusion::Guidance;
use pareto_rl::trainer::{EvalConfig, RunConfig, Trainer};

fn main() -> pareto_rl::Result<()> {
    let mut trainer = Trainer::new(RunConfig::default())?;
    trainer.pretrain(0)?;
    let names: Vec<&str> = trainer.config().rewards.iter().map(|r| r.name.as_str()).collect();
    println!("{:<28} {}", "guidance", names.join("  "));
    for guidance in [
        Guidance::Conditional,
        Guidance::Cfg { w: 2.0 },
        Guidance::Cfg { w: 5.0 },
        Guidance::Dual { w1: 5.0, w2: 5.0 },
    ] {
        let eval = EvalConfig {
            guidance,
            ..EvalConfig::default()
        };
        let means = trainer.evaluate(&eval.prefs, &eval)?;
        let cells: Vec<String> = means.iter().map(|m| format!("{m:.3}")).collect();
        println!(
            "{:<28} {}   (null coefficient {})",
            format!("{guidance:?}"),
            cells.join("  "),
            guidance.null_coef()
        );
    }
    Ok(())
}

//! Runs two small manifests through the experiment pipeline, renders their
//! training curves and writes an overlay comparison.
//!
//! ```text
//! cargo run --release --example run_and_plot -- /tmp/pareto-demo
//! ```

use std::path::PathBuf;

use pareto_rl::experiment::{compare, plot_file, run_experiment, ExperimentManifest, METRICS_FILE};

const PARROT: &str = r#"
name = "parrot"
[run]
mode = "parrot"
iterations = 40
batch_size = 32
[run.pretrain]
steps = 800
"#;

const WS1: &str = r#"
name = "ws1"
[run]
mode = "weighted_sum"
weights = [0.7, 0.1, 0.1, 0.1]
iterations = 40
batch_size = 32
[run.pretrain]
steps = 800
"#;

fn main() -> pareto_rl::Result<()> {
    let root = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("pareto-demo"));
    let mut dirs = Vec::new();
    for text in [PARROT, WS1] {
        let manifest = ExperimentManifest::parse(text)?;
        let summary = run_experiment(&manifest, &root)?;
        let dir = manifest.run_dir(&root);
        println!(
            "{}: baseline {:.3?} -> final {:.3?}",
            summary.name, summary.baseline_means, summary.final_means
        );
        plot_file(&dir.join(METRICS_FILE), &dir.join("curves.svg"))?;
        dirs.push(dir);
    }
    let (csv, svg) = compare(&dirs, &root)?;
    println!("wrote {} and {}", csv.display(), svg.display());
    Ok(())
}

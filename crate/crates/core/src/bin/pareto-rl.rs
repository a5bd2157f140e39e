//! Command-line front end for the experiment runner.
//!
//! Exit status: 0 on success, 2 for configuration or input errors, 1 when a
//! run aborts.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pareto_rl::experiment::{self, ExperimentManifest, OUT_DIR_ENV};
use pareto_rl::Error;

#[derive(Parser)]
#[command(name = "pareto-rl", version, about = "Multi-reward fine-tuning of a toy diffusion model")]
struct Cli {
    /// Override the manifest's run seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Rollout worker threads (results do not depend on it).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output root (overrides the manifest's `out_dir`).
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain, fine-tune and evaluate as described by a TOML manifest.
    Run { manifest: PathBuf },
    /// Render a metrics CSV as an SVG training-curve chart.
    Plot { csv: PathBuf, svg: PathBuf },
    /// Overlay the metrics of several run directories.
    Compare {
        #[arg(required = true, num_args = 2..)]
        dirs: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { manifest } => ExperimentManifest::load(&manifest).and_then(|mut m| {
            if let Some(seed) = cli.seed {
                m.run.seed = seed;
            }
            let root = experiment::resolve_out_root(cli.out.as_deref(), None, &m);
            let summary = experiment::with_workers(cli.workers, || experiment::run_experiment(&m, &root))?;
            println!("run {} -> {}", m.name, m.run_dir(&root).display());
            for (i, name) in summary.reward_names.iter().enumerate() {
                println!(
                    "  {name:<12} baseline {:.4}  final {:.4}",
                    summary.baseline_means[i], summary.final_means[i]
                );
            }
            println!("  mean nd_fraction {:.4}", summary.mean_nd_fraction);
            Ok(())
        }),
        Command::Plot { csv, svg } => experiment::plot_file(&csv, &svg),
        Command::Compare { dirs } => {
            let root = cli.out.unwrap_or_else(|| PathBuf::from("."));
            experiment::compare(&dirs, &root).map(|(csv, svg)| {
                println!("{}\n{}", csv.display(), svg.display());
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

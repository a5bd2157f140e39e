//! Experiment runner: manifest parsing, the pretrain → evaluate → fine-tune
//! → evaluate pipeline, and the files it leaves on disk.
//!
//! A run named `name` writes into `<out>/<name>/`:
//!
//! | file | content |
//! |------|---------|
//! | `metrics.csv` | one row per (iteration, reward id) |
//! | `timing.csv` | wall-clock seconds per iteration |
//! | `summary.toml` | baseline and final evaluation means |
//! | `pretrain.csv` | held-out denoising loss during pretraining |
//! | `theta.ckpt`, `pen.ckpt` | final parameters (if enabled) |
//! | `theta_pretrained.ckpt` | parameters before fine-tuning (if enabled) |
//! | `vocabulary.txt` | expansion token names |
//! | `metrics.svg` | training curves (if enabled) |
//! | `trajectories.txt` | sample rollouts from the final model (if enabled) |

pub mod compare;
pub mod plot;
pub mod table;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diffusion::sample_trajectory;
use crate::error::{Error, Result};
use crate::nn::checkpoint;
use crate::pen::{prepend_reward_tokens, Vocabulary};
use crate::trainer::{csv_header, csv_rows, derive_seed, guidance_conditions, RunConfig, Trainer};

pub use compare::compare;
pub use table::MetricsTable;

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.toml";

/// Environment variable that overrides the manifest's output directory.
pub const OUT_DIR_ENV: &str = "PARETO_RL_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputOptions {
    /// Write `metrics.svg`.
    pub plot: bool,
    /// Record measured seconds in `metrics.csv` (otherwise 0, keeping the
    /// file a pure function of the seed).
    pub wall_clock: bool,
    pub checkpoints: bool,
    /// Number of final-model rollouts to dump, 0 for none.
    pub dump_trajectories: usize,
}

impl Default for OutputOptions {
    fn default() -> Self {
        Self {
            plot: true,
            wall_clock: false,
            checkpoints: true,
            dump_trajectories: 0,
        }
    }
}

/// A run description as read from a TOML manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub name: String,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub output: OutputOptions,
    #[serde(default)]
    pub run: RunConfig,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}

impl ExperimentManifest {
    pub fn parse(text: &str) -> Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    /// Reads and validates a manifest; unreadable files count as
    /// configuration errors.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read manifest {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        validate_name(&self.name)?;
        self.run.validate()
    }

    /// `<out>/<name>`.
    pub fn run_dir(&self, out_root: &Path) -> PathBuf {
        out_root.join(&self.name)
    }
}

/// Run names become directory names: ASCII letters, digits, `-`, `_`, `.`,
/// not starting with a dot.
pub fn validate_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && !name.starts_with('.')
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("name: {name:?} is not a filesystem-safe run name")))
    }
}

/// Output root: explicit flag, then [`OUT_DIR_ENV`], then the manifest.
pub fn resolve_out_root(flag: Option<&Path>, env: Option<&str>, manifest: &ExperimentManifest) -> PathBuf {
    match (flag, env) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(e)) if !e.is_empty() => PathBuf::from(e),
        _ => manifest.out_dir.clone(),
    }
}

/// Contents of `summary.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub seed: u64,
    pub iterations: usize,
    pub reward_names: Vec<String>,
    pub eval_prefs: Vec<usize>,
    pub pretrain_holdout_initial: Option<f64>,
    pub pretrain_holdout_final: Option<f64>,
    /// Evaluation means before fine-tuning.
    pub baseline_means: Vec<f64>,
    /// Evaluation means after fine-tuning.
    pub final_means: Vec<f64>,
    pub mean_nd_fraction: f64,
}

impl RunSummary {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Runs `f` on a dedicated pool of `workers` threads (the global pool when
/// `None`). Results do not depend on the worker count.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("workers: {e}")))?
            .install(f),
    }
}

/// Executes the manifest's pipeline and writes all artifacts under
/// `<out_root>/<name>/`.
pub fn run_experiment(manifest: &ExperimentManifest, out_root: &Path) -> Result<RunSummary> {
    manifest.validate()?;
    let dir = manifest.run_dir(out_root);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let cfg = &manifest.run;
    let opts = manifest.output;

    let mut trainer = Trainer::new(cfg.clone())?;
    let report = trainer.pretrain(100)?;
    let mut curve = String::from("step,holdout_loss\n");
    for (s, l) in &report.holdout_curve {
        let _ = writeln!(curve, "{s},{l}");
    }
    write_file(&dir.join("pretrain.csv"), curve)?;
    write_file(
        &dir.join("vocabulary.txt"),
        Vocabulary::numbered("exp", cfg.pen.vocab).to_text(),
    )?;
    if opts.checkpoints {
        checkpoint::save(trainer.theta(), &dir.join("theta_pretrained.ckpt"))?;
    }
    let baseline_means = trainer.evaluate(&cfg.eval.prefs, &cfg.eval)?;

    let metrics_path = dir.join(METRICS_FILE);
    let file = std::fs::File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
    let mut metrics = std::io::BufWriter::new(file);
    let mut timing = String::from("iteration,seconds\n");
    let io = |e| Error::io(&metrics_path, e);
    writeln!(metrics, "{}", csv_header(cfg.n_rewards())).map_err(io)?;
    let mut nd_sum = 0.0;
    let mut nd_count = 0usize;
    trainer.run(|m| {
        for row in csv_rows(m, opts.wall_clock) {
            writeln!(metrics, "{row}").map_err(|e| Error::io(&metrics_path, e))?;
        }
        for b in &m.batches {
            nd_sum += b.nd_fraction;
            nd_count += 1;
        }
        let _ = writeln!(timing, "{},{}", m.iteration, m.seconds);
        Ok(())
    })?;
    metrics.flush().map_err(|e| Error::io(&metrics_path, e))?;
    drop(metrics);
    write_file(&dir.join("timing.csv"), timing)?;

    let final_means = trainer.evaluate(&cfg.eval.prefs, &cfg.eval)?;
    if opts.checkpoints {
        trainer.save_checkpoints(&dir)?;
    }
    if opts.dump_trajectories > 0 {
        write_file(&dir.join("trajectories.txt"), dump_rollouts(&trainer, opts.dump_trajectories)?)?;
    }
    let summary = RunSummary {
        name: manifest.name.clone(),
        seed: cfg.seed,
        iterations: cfg.iterations,
        reward_names: cfg.rewards.iter().map(|r| r.name.clone()).collect(),
        eval_prefs: cfg.eval.prefs.clone(),
        pretrain_holdout_initial: report.initial_holdout(),
        pretrain_holdout_final: report.final_holdout(),
        baseline_means,
        final_means,
        mean_nd_fraction: if nd_count > 0 { nd_sum / nd_count as f64 } else { 0.0 },
    };
    let text = toml::to_string(&summary).map_err(|e| Error::Config(format!("summary: {e}")))?;
    write_file(&dir.join(SUMMARY_FILE), text)?;
    if opts.plot {
        let table = MetricsTable::load(&metrics_path)?;
        let panel = plot::training_panel(&manifest.name, &table.per_iteration(), &summary.reward_names);
        write_file(&dir.join("metrics.svg"), plot::render(&[panel]))?;
    }
    Ok(summary)
}

/// Conditional rollouts of the final model with the evaluation
/// preferences, cycling through the conditions.
fn dump_rollouts(trainer: &Trainer, n: usize) -> Result<String> {
    let cfg = trainer.config();
    let mut out = String::new();
    for i in 0..n {
        let c = i % cfg.data.n_conditions;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.eval.seed, &[u64::MAX, i as u64]));
        let (bundle, _) = trainer.pen().expand(trainer.phi(), c, &mut rng)?;
        let bundle = prepend_reward_tokens(&bundle, &cfg.eval.prefs, cfg.n_rewards())?;
        let (main, second) = guidance_conditions(&bundle, cfg.rollout_guidance);
        let traj = sample_trajectory(
            trainer.denoiser(),
            trainer.theta(),
            &main,
            second.as_ref(),
            cfg.rollout_guidance,
            trainer.schedule(),
            rng.random(),
        )?;
        let _ = writeln!(out, "# rollout {i} condition {c} expansions {:?}", bundle.expansions);
        out.push_str(&traj.dump());
    }
    Ok(out)
}

/// Reads a metrics CSV and writes its training-curve SVG.
pub fn plot_file(csv: &Path, svg: &Path) -> Result<()> {
    let table = MetricsTable::load(csv)?;
    let title = csv
        .parent()
        .and_then(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "metrics".into());
    write_file(svg, plot::plot_table(&table, &title))
}

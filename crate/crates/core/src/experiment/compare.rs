//! Overlay of several runs' training curves, aligned by iteration index.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::plot::{color, render, Panel, Series};
use super::table::{IterationSeries, MetricsTable};
use super::METRICS_FILE;
use crate::error::{Error, Result};

/// One run's per-iteration averages, labelled by its directory name.
#[derive(Debug, Clone, PartialEq)]
pub struct RunCurves {
    pub label: String,
    pub series: IterationSeries,
}

/// Loads `metrics.csv` from each directory; all runs must share K.
pub fn load_runs(dirs: &[PathBuf]) -> Result<(usize, Vec<RunCurves>)> {
    if dirs.len() < 2 {
        return Err(Error::Config("compare: need at least two run directories".into()));
    }
    let mut k = None;
    let mut runs = Vec::with_capacity(dirs.len());
    for dir in dirs {
        let table = MetricsTable::load(&dir.join(METRICS_FILE))?;
        match k {
            None => k = Some(table.n_rewards),
            Some(k0) if k0 != table.n_rewards => {
                return Err(Error::Config(format!(
                    "compare: {} has {} rewards, expected {k0}",
                    dir.display(),
                    table.n_rewards
                )))
            }
            _ => {}
        }
        runs.push(RunCurves {
            label: run_label(dir),
            series: table.per_iteration(),
        });
    }
    Ok((k.unwrap_or(0), runs))
}

fn run_label(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

/// Long-format CSV: `run,iteration,mean_r1..mean_rK,nd_fraction`.
pub fn combined_csv(k: usize, runs: &[RunCurves]) -> String {
    let mut out = String::from("run,iteration");
    for j in 1..=k {
        let _ = write!(out, ",mean_r{j}");
    }
    out.push_str(",nd_fraction\n");
    for run in runs {
        let s = &run.series;
        for (i, it) in s.iterations.iter().enumerate() {
            let _ = write!(out, "{},{it}", run.label);
            for m in &s.means {
                let _ = write!(out, ",{}", m[i]);
            }
            let _ = writeln!(out, ",{}", s.nd_fraction[i]);
        }
    }
    out
}

/// One panel per reward, one series per run.
pub fn overlay_svg(k: usize, runs: &[RunCurves]) -> String {
    let panels: Vec<Panel> = (0..k)
        .map(|j| Panel {
            title: format!("mean_r{}", j + 1),
            series: runs
                .iter()
                .enumerate()
                .map(|(ri, run)| Series {
                    label: run.label.clone(),
                    color: color(ri).to_string(),
                    points: run
                        .series
                        .iterations
                        .iter()
                        .zip(&run.series.means[j])
                        .map(|(&i, &v)| (i as f64, v))
                        .collect(),
                    dashed: false,
                })
                .collect(),
        })
        .collect();
    render(&panels)
}

/// Writes `comparison.csv` and `comparison.svg` into `out_dir`.
pub fn compare(dirs: &[PathBuf], out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let (k, runs) = load_runs(dirs)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let csv = out_dir.join("comparison.csv");
    let svg = out_dir.join("comparison.svg");
    std::fs::write(&csv, combined_csv(k, &runs)).map_err(|e| Error::io(&csv, e))?;
    std::fs::write(&svg, overlay_svg(k, &runs)).map_err(|e| Error::io(&svg, e))?;
    Ok((csv, svg))
}

//! Reading metrics CSV files back for plotting and comparison.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub iteration: usize,
    pub reward_id: usize,
    pub means: Vec<f64>,
    pub nd_fraction: f64,
}

/// Parsed metrics file: K reward columns and its rows in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    pub n_rewards: usize,
    pub rows: Vec<MetricsRow>,
}

/// Per-iteration averages over all reward-conditioned batches.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationSeries {
    pub iterations: Vec<usize>,
    /// `means[j][i]`: mean of reward j+1 at `iterations[i]`.
    pub means: Vec<Vec<f64>>,
    pub nd_fraction: Vec<f64>,
}

impl MetricsTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::Config("metrics CSV: missing header".into()))?
            .split(',')
            .map(str::trim)
            .collect();
        let col = |name: &str| {
            header
                .iter()
                .position(|h| *h == name)
                .ok_or_else(|| Error::Config(format!("metrics CSV: missing column {name}")))
        };
        let it_col = col("iteration")?;
        let k_col = col("reward_id")?;
        let nd_col = col("nd_fraction")?;
        let mut mean_cols = Vec::new();
        while let Some(p) = header.iter().position(|h| *h == format!("mean_r{}", mean_cols.len() + 1)) {
            mean_cols.push(p);
        }
        if mean_cols.is_empty() {
            return Err(Error::Config("metrics CSV: missing column mean_r1".into()));
        }

        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != header.len() {
                return Err(Error::Config(format!(
                    "metrics CSV: row {} has {} cells, header has {}",
                    n + 1,
                    cells.len(),
                    header.len()
                )));
            }
            let num = |c: usize| {
                cells[c]
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("metrics CSV: row {}, column {}: not a number", n + 1, header[c])))
            };
            let int = |c: usize| {
                cells[c]
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("metrics CSV: row {}, column {}: not an integer", n + 1, header[c])))
            };
            rows.push(MetricsRow {
                iteration: int(it_col)?,
                reward_id: int(k_col)?,
                means: mean_cols.iter().map(|&c| num(c)).collect::<Result<_>>()?,
                nd_fraction: num(nd_col)?,
            });
        }
        Ok(Self {
            n_rewards: mean_cols.len(),
            rows,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read metrics {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Rows grouped by iteration (ascending) and averaged.
    pub fn per_iteration(&self) -> IterationSeries {
        let mut groups: std::collections::BTreeMap<usize, (Vec<f64>, f64, usize)> = Default::default();
        for r in &self.rows {
            let g = groups
                .entry(r.iteration)
                .or_insert_with(|| (vec![0.0; self.n_rewards], 0.0, 0));
            for (a, m) in g.0.iter_mut().zip(&r.means) {
                *a += m;
            }
            g.1 += r.nd_fraction;
            g.2 += 1;
        }
        let mut out = IterationSeries {
            iterations: Vec::with_capacity(groups.len()),
            means: vec![Vec::with_capacity(groups.len()); self.n_rewards],
            nd_fraction: Vec::with_capacity(groups.len()),
        };
        for (it, (sums, nd, n)) in groups {
            out.iterations.push(it);
            for (series, s) in out.means.iter_mut().zip(sums) {
                series.push(s / n as f64);
            }
            out.nd_fraction.push(nd / n as f64);
        }
        out
    }
}

use std::fmt::Write as _;

/// Statistics of one reward-conditioned batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchMetrics {
    /// 1-based reward identifier prepended to this batch.
    pub reward_id: usize,
    /// Original condition token shared by all batches of the iteration.
    pub condition: usize,
    /// Mean of each reward over the batch.
    pub means: Vec<f64>,
    /// Fraction of the batch that received reward (non-dominated).
    pub nd_fraction: f64,
}

/// One record per fine-tuning iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub batches: Vec<BatchMetrics>,
    /// Global gradient norms before clipping (0 when the model is frozen).
    pub grad_norm_t2i: f64,
    pub grad_norm_pen: f64,
    pub seconds: f64,
}

impl IterationMetrics {
    /// Per-reward mean across all batches of the iteration.
    pub fn mean_rewards(&self) -> Vec<f64> {
        let k = self.batches.first().map_or(0, |b| b.means.len());
        let mut out = vec![0.0; k];
        for b in &self.batches {
            for (o, m) in out.iter_mut().zip(&b.means) {
                *o += m;
            }
        }
        let n = self.batches.len().max(1) as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }
}

/// Header of the metrics CSV for K rewards.
pub fn csv_header(k: usize) -> String {
    let mut h = String::from("iteration,reward_id");
    for i in 1..=k {
        let _ = write!(h, ",mean_r{i}");
    }
    h.push_str(",nd_fraction,grad_norm_t2i,grad_norm_pen,seconds");
    h
}

/// CSV rows for one iteration, one per batch. Floats use Rust's shortest
/// round-trip formatting. `wall_clock = false` writes 0 for seconds so the
/// file depends only on the seed.
pub fn csv_rows(m: &IterationMetrics, wall_clock: bool) -> Vec<String> {
    let seconds = if wall_clock { m.seconds } else { 0.0 };
    m.batches
        .iter()
        .map(|b| {
            let mut row = format!("{},{}", m.iteration, b.reward_id);
            for v in &b.means {
                let _ = write!(row, ",{v}");
            }
            let _ = write!(
                row,
                ",{},{},{},{}",
                b.nd_fraction, m.grad_norm_t2i, m.grad_norm_pen, seconds
            );
            row
        })
        .collect()
}

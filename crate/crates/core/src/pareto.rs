//! Dominance over reward vectors and first-front (non-dominated set)
//! extraction.
//!
//! All objectives are maximized. Coordinates are compared with exact
//! floating-point equality, so the relation is a strict partial order on
//! finite vectors and duplicate vectors never dominate one another.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// K reward scores for one generated sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardVector(Vec<f64>);

impl RewardVector {
    /// Rejects empty vectors and non-finite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::contract("reward vector must have K >= 1 entries"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("reward vector entry {i}")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.0[k]
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for RewardVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

/// Sorted, unique indices of the non-dominated members of a batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParetoMask {
    selected: Vec<usize>,
    batch_size: usize,
}

impl ParetoMask {
    /// Builds a mask from arbitrary indices; they are sorted and checked.
    pub fn from_indices(mut selected: Vec<usize>, batch_size: usize) -> Result<Self> {
        selected.sort_unstable();
        if selected.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::contract("pareto mask indices must be unique"));
        }
        if selected.last().is_some_and(|&i| i >= batch_size) {
            return Err(Error::contract("pareto mask index out of range"));
        }
        if batch_size > 0 && selected.is_empty() {
            return Err(Error::contract("pareto mask of a non-empty batch is empty"));
        }
        Ok(Self {
            selected,
            batch_size,
        })
    }

    /// Every index of a batch of `batch_size`.
    pub fn all(batch_size: usize) -> Self {
        Self {
            selected: (0..batch_size).collect(),
            batch_size,
        }
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    /// n(P), the number of selected samples.
    pub fn count(&self) -> usize {
        self.selected.len()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.selected.binary_search(&index).is_ok()
    }

    /// Per-index membership flags.
    pub fn flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.batch_size];
        for &i in &self.selected {
            flags[i] = true;
        }
        flags
    }

    pub fn fraction(&self) -> f64 {
        self.selected.len() as f64 / self.batch_size as f64
    }
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::contract(format!(
            "reward vectors differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Slice form of [`dominates`], used by the batch routines.
pub fn dominates_slice(a: &[f64], b: &[f64]) -> Result<bool> {
    check_lengths(a, b)?;
    Ok(dominates_unchecked(a, b))
}

#[inline]
fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (&ai, &bi) in a.iter().zip(b) {
        if bi > ai {
            return false;
        }
        if bi < ai {
            strict = true;
        }
    }
    strict
}

/// True iff `a` dominates `b`: `b_i <= a_i` everywhere and `b_j < a_j`
/// somewhere.
pub fn dominates(a: &RewardVector, b: &RewardVector) -> Result<bool> {
    dominates_slice(a.values(), b.values())
}

fn check_batch(batch: &[RewardVector]) -> Result<usize> {
    let first = batch
        .first()
        .ok_or_else(|| Error::contract("non-dominated set of an empty batch"))?;
    let k = first.len();
    if let Some(i) = batch.iter().position(|v| v.len() != k) {
        return Err(Error::contract(format!(
            "batch entry {i} has {} rewards, expected {k}",
            batch[i].len()
        )));
    }
    Ok(k)
}

/// Reference first-front extraction: an index is kept when no other member
/// of the batch dominates it. O(N²K).
pub fn nd_set(batch: &[RewardVector]) -> Result<ParetoMask> {
    check_batch(batch)?;
    let selected = (0..batch.len())
        .filter(|&i| {
            !batch
                .iter()
                .any(|other| dominates_unchecked(other.values(), batch[i].values()))
        })
        .collect();
    ParetoMask::from_indices(selected, batch.len())
}

/// Front extraction after a lexicographic sort.
///
/// A dominator always sorts strictly ahead of what it dominates in
/// descending lexicographic order, and anything dominated by a discarded
/// point is also dominated by some front member, so each candidate only has
/// to be compared against the front built so far. Produces the same mask as
/// [`nd_set`].
pub fn nd_set_sorted(batch: &[RewardVector]) -> Result<ParetoMask> {
    check_batch(batch)?;
    let mut order: Vec<usize> = (0..batch.len()).collect();
    order.sort_by(|&i, &j| lex_desc(batch[i].values(), batch[j].values()).then(i.cmp(&j)));

    let mut front: Vec<usize> = Vec::new();
    for &i in &order {
        let dominated = front
            .iter()
            .any(|&f| dominates_unchecked(batch[f].values(), batch[i].values()));
        if !dominated {
            front.push(i);
        }
    }
    ParetoMask::from_indices(front, batch.len())
}

fn lex_desc(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match y.partial_cmp(x).unwrap_or(Ordering::Equal) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// |nd_set(batch)| / |batch|.
pub fn nd_fraction(batch: &[RewardVector]) -> Result<f64> {
    Ok(nd_set(batch)?.fraction())
}

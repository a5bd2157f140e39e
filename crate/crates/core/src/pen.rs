//! Toy prompt-expansion policy: independent categorical draws per expansion
//! slot, conditioned on the original token, plus reward-identifier handling.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffusion::Condition;
use crate::error::{Error, Result};
use crate::nn::{ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenConfig {
    pub n_conditions: usize,
    /// L, expansion slots per prompt.
    pub slots: usize,
    pub vocab: usize,
}

impl Default for PenConfig {
    fn default() -> Self {
        Self {
            n_conditions: 8,
            slots: 2,
            vocab: 16,
        }
    }
}

/// An original condition, its expansion and the reward identifiers
/// prepended to it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PromptBundle {
    pub original: usize,
    pub expansions: Vec<usize>,
    /// 1-based reward identifiers, sorted and unique.
    pub reward_prefs: Vec<usize>,
}

impl PromptBundle {
    /// Full expanded conditioning ĉ (with any reward identifiers).
    pub fn condition(&self) -> Condition {
        Condition::Tokens {
            original: self.original,
            expansions: self.expansions.clone(),
            reward_prefs: self.reward_prefs.clone(),
        }
    }

    /// The original prompt c alone.
    pub fn original_condition(&self) -> Condition {
        Condition::original(self.original)
    }
}

/// Sets the reward identifiers of `bundle` to `prefs` (set semantics: order
/// and repeats are irrelevant). Identifiers must lie in `1..=k`.
pub fn prepend_reward_tokens(bundle: &PromptBundle, prefs: &[usize], k: usize) -> Result<PromptBundle> {
    if let Some(bad) = prefs.iter().find(|&&p| p == 0 || p > k) {
        return Err(Error::contract(format!("reward identifier {bad} outside 1..={k}")));
    }
    let mut set = prefs.to_vec();
    set.sort_unstable();
    set.dedup();
    Ok(PromptBundle {
        reward_prefs: set,
        ..bundle.clone()
    })
}

/// Logit table `[n_conditions × slots × vocab]` stored in a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct PenPolicy {
    config: PenConfig,
    logits: ParamId,
}

const LOGITS: &str = "pen.logits";

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

fn log_softmax_at(logits: &[f64], index: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits[index] - lse
}

impl PenPolicy {
    /// Uniform policy (all logits zero) in a fresh store.
    pub fn init(config: PenConfig) -> Result<(Self, ParamStore)> {
        if config.n_conditions == 0 || config.slots == 0 || config.vocab == 0 {
            return Err(Error::contract(format!("invalid PEN config {config:?}")));
        }
        let mut store = ParamStore::new();
        let logits = store.zeros(LOGITS, &[config.n_conditions, config.slots, config.vocab])?;
        Ok((Self { config, logits }, store))
    }

    pub fn bind(store: &ParamStore, config: PenConfig) -> Result<Self> {
        let logits = store
            .id(LOGITS)
            .ok_or_else(|| Error::contract("missing parameter pen.logits"))?;
        if store.get(logits).shape != [config.n_conditions, config.slots, config.vocab] {
            return Err(Error::contract("pen.logits has the wrong shape"));
        }
        Ok(Self { config, logits })
    }

    pub fn config(&self) -> &PenConfig {
        &self.config
    }

    pub fn logits_id(&self) -> ParamId {
        self.logits
    }

    fn check_token(&self, c: usize) -> Result<()> {
        if c >= self.config.n_conditions {
            return Err(Error::contract(format!("unknown condition token {c}")));
        }
        Ok(())
    }

    fn slot_range(&self, c: usize, slot: usize) -> std::ops::Range<usize> {
        let v = self.config.vocab;
        let start = (c * self.config.slots + slot) * v;
        start..start + v
    }

    pub fn slot_logits<'a>(&self, store: &'a ParamStore, c: usize, slot: usize) -> &'a [f64] {
        &store.get(self.logits).value[self.slot_range(c, slot)]
    }

    /// softmax(logits[c, slot, ·]).
    pub fn slot_probs(&self, store: &ParamStore, c: usize, slot: usize) -> Result<Vec<f64>> {
        self.check_token(c)?;
        if slot >= self.config.slots {
            return Err(Error::contract(format!("slot {slot} out of range")));
        }
        Ok(softmax(self.slot_logits(store, c, slot)))
    }

    /// Samples one expansion token per slot; returns the bundle (no reward
    /// identifiers) and its joint log-probability.
    pub fn expand<R: Rng + ?Sized>(
        &self,
        store: &ParamStore,
        c: usize,
        rng: &mut R,
    ) -> Result<(PromptBundle, f64)> {
        self.check_token(c)?;
        let mut expansions = Vec::with_capacity(self.config.slots);
        let mut log_prob = 0.0;
        for slot in 0..self.config.slots {
            let logits = self.slot_logits(store, c, slot);
            let probs = softmax(logits);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = probs.len() - 1;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            log_prob += log_softmax_at(logits, pick);
            expansions.push(pick);
        }
        Ok((
            PromptBundle {
                original: c,
                expansions,
                reward_prefs: Vec::new(),
            },
            log_prob,
        ))
    }

    /// log p_φ(ĉ | c) recomputed from the logits.
    pub fn log_prob(&self, store: &ParamStore, bundle: &PromptBundle) -> Result<f64> {
        self.check_bundle(bundle)?;
        Ok(bundle
            .expansions
            .iter()
            .enumerate()
            .map(|(slot, &e)| log_softmax_at(self.slot_logits(store, bundle.original, slot), e))
            .sum())
    }

    fn check_bundle(&self, bundle: &PromptBundle) -> Result<()> {
        self.check_token(bundle.original)?;
        if bundle.expansions.len() != self.config.slots {
            return Err(Error::contract(format!(
                "bundle has {} expansion tokens, policy has {} slots",
                bundle.expansions.len(),
                self.config.slots
            )));
        }
        if let Some(e) = bundle.expansions.iter().find(|&&e| e >= self.config.vocab) {
            return Err(Error::contract(format!("unknown expansion token {e}")));
        }
        Ok(())
    }

    /// Adds `scale · ∇_φ log p_φ(ĉ | c)` to the logit gradients.
    pub fn accumulate_log_prob_grad(
        &self,
        store: &mut ParamStore,
        bundle: &PromptBundle,
        scale: f64,
    ) -> Result<()> {
        self.check_bundle(bundle)?;
        for (slot, &e) in bundle.expansions.iter().enumerate() {
            let range = self.slot_range(bundle.original, slot);
            let probs = softmax(&store.get(self.logits).value[range.clone()]);
            let grad = &mut store.get_mut(self.logits).grad[range];
            for (i, (g, p)) in grad.iter_mut().zip(probs).enumerate() {
                let onehot = if i == e { 1.0 } else { 0.0 };
                *g += scale * (onehot - p);
            }
        }
        Ok(())
    }

    /// REINFORCE contribution for one expansion. With `ascend` the
    /// accumulated loss gradient is `−reward · ∇ log p`, so a descent step
    /// raises expected reward; otherwise the sign is flipped.
    pub fn pen_grad_update(
        &self,
        store: &mut ParamStore,
        bundle: &PromptBundle,
        reward: f64,
        ascend: bool,
    ) -> Result<()> {
        if !reward.is_finite() {
            return Err(Error::NonFinite("PEN reward".into()));
        }
        if reward == 0.0 {
            return Ok(());
        }
        let scale = if ascend { -reward } else { reward };
        self.accumulate_log_prob_grad(store, bundle, scale)
    }
}

/// Token names, one per line; the line number is the id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    names: Vec<String>,
}

impl Vocabulary {
    /// `prefix0`, `prefix1`, …
    pub fn numbered(prefix: &str, n: usize) -> Self {
        Self {
            names: (0..n).map(|i| format!("{prefix}{i}")).collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let names: Vec<String> = text.lines().map(|l| l.trim_end_matches('\r').to_string()).collect();
        if names.is_empty() {
            return Err(Error::Config("vocabulary is empty".into()));
        }
        for (i, n) in names.iter().enumerate() {
            if n.trim().is_empty() {
                return Err(Error::Config(format!("vocabulary line {} is blank", i + 1)));
            }
            if names[..i].contains(n) {
                return Err(Error::Config(format!("vocabulary token {n:?} repeated")));
            }
        }
        Ok(Self { names })
    }

    pub fn to_text(&self) -> String {
        let mut s = self.names.join("\n");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Grads, Mlp, MlpCache, MlpSpec, ParamId, ParamStore};

/// Architecture of the noise predictor and its conditioning tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiserConfig {
    /// Width of the sinusoidal step embedding (even; 0 disables it).
    pub time_dim: usize,
    /// D_c, width of the condition embedding.
    pub cond_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Size of the original-condition vocabulary.
    pub n_conditions: usize,
    /// L, number of expansion slots.
    pub expansion_slots: usize,
    pub expansion_vocab: usize,
    /// K, number of reward identifier tokens.
    pub n_rewards: usize,
    /// Standard deviation of the original-token embedding init.
    pub embed_init_std: f64,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        Self {
            time_dim: 8,
            cond_dim: 16,
            hidden: vec![64, 64],
            activation: Activation::Tanh,
            n_conditions: 8,
            expansion_slots: 2,
            expansion_vocab: 16,
            n_rewards: 4,
            embed_init_std: 1.0,
        }
    }
}

/// Conditioning passed to the noise predictor.
///
/// `Tokens` holds an original condition token, expansion tokens (position
/// is the slot) and 1-based reward identifiers. Its embedding is the sum of
/// the corresponding table rows; `Null` embeds to the zero vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Condition {
    Null,
    Tokens {
        original: usize,
        expansions: Vec<usize>,
        reward_prefs: Vec<usize>,
    },
}

impl Condition {
    pub fn original(c: usize) -> Self {
        Condition::Tokens {
            original: c,
            expansions: Vec::new(),
            reward_prefs: Vec::new(),
        }
    }
}

/// A D_c-dimensional condition embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionEmbedding(pub Vec<f64>);

/// Sinusoidal embedding of the step index: `[sin(t·f_i)…, cos(t·f_i)…]`
/// with `f_i = 10000^(−i/(d/2))`.
pub fn time_embedding(t: usize, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = vec![0.0; dim];
    for i in 0..half {
        let freq = (-(i as f64) / half as f64 * 10000f64.ln()).exp();
        let arg = t as f64 * freq;
        out[i] = arg.sin();
        out[half + i] = arg.cos();
    }
    out
}

/// Noise predictor ε_θ(x_t, t, c): an MLP over
/// `[x_t, time_embedding(t), condition_embedding]` plus three embedding
/// tables (original tokens, per-slot expansion tokens, reward identifiers).
#[derive(Debug, Clone)]
pub struct Denoiser {
    config: DenoiserConfig,
    mlp: Mlp,
    original: ParamId,
    expansion: ParamId,
    reward: ParamId,
}

/// Saved forward state for [`Denoiser::backward`].
#[derive(Debug, Clone)]
pub struct DenoiserCache {
    mlp: MlpCache,
    cond: Condition,
}

const PREFIX: &str = "denoiser";

impl Denoiser {
    fn mlp_spec(config: &DenoiserConfig) -> MlpSpec {
        MlpSpec {
            input_dim: 2 + config.time_dim + config.cond_dim,
            hidden_dims: config.hidden.clone(),
            output_dim: 2,
            activation: config.activation,
        }
    }

    fn validate(config: &DenoiserConfig) -> Result<()> {
        if config.time_dim % 2 != 0 {
            return Err(Error::contract("time embedding width must be even"));
        }
        if config.n_conditions == 0 {
            return Err(Error::contract("need at least one condition token"));
        }
        Ok(())
    }

    /// Registers zero-valued parameters in `store`.
    pub fn register(store: &mut ParamStore, config: DenoiserConfig) -> Result<Self> {
        Self::validate(&config)?;
        let mlp = Mlp::register(store, &format!("{PREFIX}.mlp"), Self::mlp_spec(&config))?;
        let d = config.cond_dim;
        let original = store.zeros(&format!("{PREFIX}.embed.original"), &[config.n_conditions, d])?;
        let expansion = store.zeros(
            &format!("{PREFIX}.embed.expansion"),
            &[config.expansion_slots, config.expansion_vocab, d],
        )?;
        let reward = store.zeros(&format!("{PREFIX}.embed.reward"), &[config.n_rewards, d])?;
        Ok(Self {
            config,
            mlp,
            original,
            expansion,
            reward,
        })
    }

    /// Binds to parameters already present in `store`.
    pub fn bind(store: &ParamStore, config: DenoiserConfig) -> Result<Self> {
        Self::validate(&config)?;
        let mlp = Mlp::bind(store, &format!("{PREFIX}.mlp"), Self::mlp_spec(&config))?;
        let d = config.cond_dim;
        let find = |name: &str, shape: &[usize]| {
            let full = format!("{PREFIX}.embed.{name}");
            let id = store
                .id(&full)
                .ok_or_else(|| Error::contract(format!("missing parameter {full}")))?;
            if store.get(id).shape != shape {
                return Err(Error::contract(format!("parameter {full} has the wrong shape")));
            }
            Ok(id)
        };
        Ok(Self {
            original: find("original", &[config.n_conditions, d])?,
            expansion: find(
                "expansion",
                &[config.expansion_slots, config.expansion_vocab, d],
            )?,
            reward: find("reward", &[config.n_rewards, d])?,
            mlp,
            config,
        })
    }

    /// Builds a fresh parameter store: random MLP weights, Gaussian
    /// original-token embeddings, and zero expansion and reward-identifier
    /// embeddings (so they start as no-ops).
    pub fn init<R: Rng + ?Sized>(config: DenoiserConfig, rng: &mut R) -> Result<(Self, ParamStore)> {
        let mut store = ParamStore::new();
        let den = Self::register(&mut store, config)?;
        den.mlp.init_random(&mut store, rng);
        let std = den.config.embed_init_std;
        for v in &mut store.get_mut(den.original).value {
            let z: f64 = StandardNormal.sample(rng);
            *v = std * z;
        }
        Ok((den, store))
    }

    pub fn config(&self) -> &DenoiserConfig {
        &self.config
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn reward_embedding_id(&self) -> ParamId {
        self.reward
    }

    pub fn expansion_embedding_id(&self) -> ParamId {
        self.expansion
    }

    pub fn original_embedding_id(&self) -> ParamId {
        self.original
    }

    fn check_condition(&self, cond: &Condition) -> Result<()> {
        if let Condition::Tokens {
            original,
            expansions,
            reward_prefs,
        } = cond
        {
            let cfg = &self.config;
            if *original >= cfg.n_conditions {
                return Err(Error::contract(format!("unknown condition token {original}")));
            }
            if expansions.len() > cfg.expansion_slots {
                return Err(Error::contract("more expansion tokens than slots"));
            }
            if let Some(e) = expansions.iter().find(|&&e| e >= cfg.expansion_vocab) {
                return Err(Error::contract(format!("unknown expansion token {e}")));
            }
            if let Some(k) = reward_prefs
                .iter()
                .find(|&&k| k == 0 || k > cfg.n_rewards)
            {
                return Err(Error::contract(format!("reward identifier {k} outside 1..={}", cfg.n_rewards)));
            }
        }
        Ok(())
    }

    /// Sum of the table rows selected by `cond`.
    pub fn embed(&self, store: &ParamStore, cond: &Condition) -> Result<ConditionEmbedding> {
        self.check_condition(cond)?;
        let d = self.config.cond_dim;
        let mut out = vec![0.0; d];
        if let Condition::Tokens {
            original,
            expansions,
            reward_prefs,
        } = cond
        {
            let add = |out: &mut [f64], table: &[f64], row: usize| {
                for (o, v) in out.iter_mut().zip(&table[row * d..(row + 1) * d]) {
                    *o += v;
                }
            };
            add(&mut out, &store.get(self.original).value, *original);
            let exp = &store.get(self.expansion).value;
            for (slot, &e) in expansions.iter().enumerate() {
                add(&mut out, exp, slot * self.config.expansion_vocab + e);
            }
            let rew = &store.get(self.reward).value;
            for &k in reward_prefs {
                add(&mut out, rew, k - 1);
            }
        }
        Ok(ConditionEmbedding(out))
    }

    fn input(&self, store: &ParamStore, x_t: [f64; 2], t: usize, cond: &Condition) -> Result<Vec<f64>> {
        let mut input = Vec::with_capacity(self.mlp.spec().input_dim);
        input.extend_from_slice(&x_t);
        input.extend(time_embedding(t, self.config.time_dim));
        input.extend(self.embed(store, cond)?.0);
        Ok(input)
    }

    pub fn predict_noise(
        &self,
        store: &ParamStore,
        x_t: [f64; 2],
        t: usize,
        cond: &Condition,
    ) -> Result<[f64; 2]> {
        let out = self.mlp.forward(store, &self.input(store, x_t, t, cond)?)?;
        Ok([out[0], out[1]])
    }

    pub fn predict_noise_cached(
        &self,
        store: &ParamStore,
        x_t: [f64; 2],
        t: usize,
        cond: &Condition,
    ) -> Result<([f64; 2], DenoiserCache)> {
        let (out, mlp) = self.mlp.forward_cached(store, &self.input(store, x_t, t, cond)?)?;
        Ok((
            [out[0], out[1]],
            DenoiserCache {
                mlp,
                cond: cond.clone(),
            },
        ))
    }

    /// Accumulates the gradient of `upstream · ε_θ` into `grads`, including
    /// the embedding rows used by the cached condition. Returns d/dx_t.
    pub fn backward(
        &self,
        store: &ParamStore,
        cache: &DenoiserCache,
        upstream: [f64; 2],
        grads: &mut Grads,
    ) -> Result<[f64; 2]> {
        let dx = self.mlp.backward(store, &cache.mlp, &upstream, grads)?;
        if let Condition::Tokens {
            original,
            expansions,
            reward_prefs,
        } = &cache.cond
        {
            let d = self.config.cond_dim;
            let dcond = &dx[2 + self.config.time_dim..];
            let add = |table: &mut [f64], row: usize| {
                for (g, v) in table[row * d..(row + 1) * d].iter_mut().zip(dcond) {
                    *g += v;
                }
            };
            add(grads.get_mut(self.original), *original);
            for (slot, &e) in expansions.iter().enumerate() {
                add(
                    grads.get_mut(self.expansion),
                    slot * self.config.expansion_vocab + e,
                );
            }
            for &k in reward_prefs {
                add(grads.get_mut(self.reward), k - 1);
            }
        }
        Ok([dx[0], dx[1]])
    }

    /// Convenience: gradient of `upstream · ε_θ(x_t, t, cond)` into the
    /// store's own accumulators.
    pub fn backprop(
        &self,
        store: &mut ParamStore,
        x_t: [f64; 2],
        t: usize,
        cond: &Condition,
        upstream: [f64; 2],
    ) -> Result<()> {
        let (_, cache) = self.predict_noise_cached(store, x_t, t, cond)?;
        let mut grads = store.take_grads();
        let res = self.backward(store, &cache, upstream, &mut grads);
        store.put_grads(grads);
        res.map(|_| ())
    }

    /// Jacobian-vector probe: d ε_θ / d (reward embedding row k) applied to
    /// the all-ones direction, by central differences on the table row.
    pub fn reward_embedding_sensitivity(
        &self,
        store: &ParamStore,
        x_t: [f64; 2],
        t: usize,
        cond: &Condition,
        k: usize,
        h: f64,
    ) -> Result<[f64; 2]> {
        if k == 0 || k > self.config.n_rewards {
            return Err(Error::contract(format!("reward identifier {k} out of range")));
        }
        let d = self.config.cond_dim;
        let mut probe = store.clone();
        let row = (k - 1) * d..k * d;
        probe.get_mut(self.reward).value[row.clone()]
            .iter_mut()
            .for_each(|v| *v += h);
        let plus = self.predict_noise(&probe, x_t, t, cond)?;
        probe.get_mut(self.reward).value[row]
            .iter_mut()
            .for_each(|v| *v -= 2.0 * h);
        let minus = self.predict_noise(&probe, x_t, t, cond)?;
        Ok([
            (plus[0] - minus[0]) / (2.0 * h),
            (plus[1] - minus[1]) / (2.0 * h),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::finite_diff_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> DenoiserConfig {
        DenoiserConfig {
            hidden: vec![6, 5],
            cond_dim: 4,
            n_conditions: 3,
            expansion_vocab: 5,
            n_rewards: 3,
            ..DenoiserConfig::default()
        }
    }

    #[test]
    fn time_embedding_values() {
        let e = time_embedding(3, 4);
        assert_eq!(e.len(), 4);
        assert!((e[0] - 3f64.sin()).abs() < 1e-15);
        assert!((e[2] - 3f64.cos()).abs() < 1e-15);
        assert!((e[1] - (3.0 * 0.01f64).sin()).abs() < 1e-15);
        assert!(time_embedding(5, 0).is_empty());
    }

    #[test]
    fn null_embeds_to_zero() {
        let (den, store) = Denoiser::init(small(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(den.embed(&store, &Condition::Null).unwrap().0, vec![0.0; 4]);
    }

    #[test]
    fn zero_head_predicts_zero() {
        let (den, mut store) = Denoiser::init(small(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        den.mlp().zero_head(&mut store);
        for t in 1..=5 {
            let e = den
                .predict_noise(&store, [0.3 * t as f64, -1.0], t, &Condition::original(2))
                .unwrap();
            assert_eq!(e, [0.0, 0.0]);
        }
    }

    #[test]
    fn prediction_is_deterministic() {
        let (den, store) = Denoiser::init(small(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let c = Condition::Tokens {
            original: 1,
            expansions: vec![4, 0],
            reward_prefs: vec![1, 3],
        };
        let a = den.predict_noise(&store, [0.1, 0.2], 4, &c).unwrap();
        let b = den.predict_noise(&store, [0.1, 0.2], 4, &c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_tokens_rejected() {
        let (den, store) = Denoiser::init(small(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let bad = [
            Condition::original(3),
            Condition::Tokens {
                original: 0,
                expansions: vec![5],
                reward_prefs: vec![],
            },
            Condition::Tokens {
                original: 0,
                expansions: vec![0, 0, 0],
                reward_prefs: vec![],
            },
            Condition::Tokens {
                original: 0,
                expansions: vec![],
                reward_prefs: vec![0],
            },
            Condition::Tokens {
                original: 0,
                expansions: vec![],
                reward_prefs: vec![4],
            },
        ];
        for c in &bad {
            assert!(den.predict_noise(&store, [0.0; 2], 1, c).is_err(), "{c:?}");
        }
    }

    #[test]
    fn gradient_including_embeddings_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (den, mut store) = Denoiser::init(small(), &mut rng).unwrap();
        // give the zero-initialised tables some values so every row matters
        for id in [den.expansion_embedding_id(), den.reward_embedding_id()] {
            for v in &mut store.get_mut(id).value {
                *v = rng.random_range(-0.5..0.5);
            }
        }
        let cond = Condition::Tokens {
            original: 2,
            expansions: vec![1, 3],
            reward_prefs: vec![2, 3],
        };
        let x = [0.4, -0.7];
        let upstream = [0.8, -1.3];
        den.backprop(&mut store, x, 6, &cond, upstream).unwrap();
        let loss = |p: &ParamStore| {
            let e = den.predict_noise(p, x, 6, &cond).unwrap();
            upstream[0] * e[0] + upstream[1] * e[1]
        };
        let report = finite_diff_check(loss, &store, store.numel(), 1e-5, &mut rng);
        assert!(report.max_rel_error < 1e-4, "{}", report.max_rel_error);
    }
}

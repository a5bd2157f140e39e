use serde::{Deserialize, Serialize};

use super::denoiser::{Condition, Denoiser};
use crate::error::{Error, Result};
use crate::nn::ParamStore;

/// How conditional and unconditional noise estimates are mixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", deny_unknown_fields)]
pub enum Guidance {
    /// Plain conditional prediction ε(x_t, t, c).
    Conditional,
    /// Classifier-free guidance: `w·ε(c) + (1 − w)·ε(null)`.
    Cfg { w: f64 },
    /// Original-prompt-centred guidance:
    /// `w1·ε(c) + (1 − w1 − w2)·ε(null) + w2·ε(ĉ)` where `c` is the main
    /// (original) condition and `ĉ` the second (expanded) one.
    Dual { w1: f64, w2: f64 },
}

impl Default for Guidance {
    fn default() -> Self {
        Guidance::Conditional
    }
}

/// One weighted noise-prediction term.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceTerm {
    pub coef: f64,
    pub cond: Condition,
}

impl Guidance {
    /// Expands the rule into weighted terms. Terms with a zero coefficient
    /// are dropped so degenerate settings reduce exactly to simpler ones.
    pub fn terms(&self, main: &Condition, second: Option<&Condition>) -> Result<Vec<GuidanceTerm>> {
        let raw = match *self {
            Guidance::Conditional => vec![(1.0, main.clone())],
            Guidance::Cfg { w } => vec![(w, main.clone()), (1.0 - w, Condition::Null)],
            Guidance::Dual { w1, w2 } => {
                let second = second.ok_or_else(|| {
                    Error::contract("dual guidance needs a second (expanded) condition")
                })?;
                vec![
                    (w1, main.clone()),
                    (1.0 - w1 - w2, Condition::Null),
                    (w2, second.clone()),
                ]
            }
        };
        Ok(raw
            .into_iter()
            .filter(|(coef, _)| *coef != 0.0)
            .map(|(coef, cond)| GuidanceTerm { coef, cond })
            .collect())
    }

    /// Coefficient on the null-condition estimate.
    pub fn null_coef(&self) -> f64 {
        match *self {
            Guidance::Conditional => 0.0,
            Guidance::Cfg { w } => 1.0 - w,
            Guidance::Dual { w1, w2 } => 1.0 - w1 - w2,
        }
    }
}

/// Weighted sum of noise predictions, accumulated in term order.
pub fn combine_terms(
    den: &Denoiser,
    store: &ParamStore,
    x_t: [f64; 2],
    t: usize,
    terms: &[GuidanceTerm],
) -> Result<[f64; 2]> {
    let mut out = [0.0, 0.0];
    for (i, term) in terms.iter().enumerate() {
        let e = den.predict_noise(store, x_t, t, &term.cond)?;
        if i == 0 {
            out = [term.coef * e[0], term.coef * e[1]];
        } else {
            out[0] += term.coef * e[0];
            out[1] += term.coef * e[1];
        }
    }
    Ok(out)
}

/// Guided noise estimate for `main` (and `second` under dual guidance).
pub fn guided_noise(
    den: &Denoiser,
    store: &ParamStore,
    x_t: [f64; 2],
    t: usize,
    main: &Condition,
    second: Option<&Condition>,
    guidance: Guidance,
) -> Result<[f64; 2]> {
    combine_terms(den, store, x_t, t, &guidance.terms(main, second)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::DenoiserConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dual_coefficients_at_five_and_five() {
        let g = Guidance::Dual { w1: 5.0, w2: 5.0 };
        assert_eq!(g.null_coef(), -9.0);
        let c = Condition::original(0);
        let chat = Condition::Tokens {
            original: 0,
            expansions: vec![1, 2],
            reward_prefs: vec![1],
        };
        let terms = g.terms(&c, Some(&chat)).unwrap();
        let coefs: Vec<f64> = terms.iter().map(|t| t.coef).collect();
        assert_eq!(coefs, vec![5.0, -9.0, 5.0]);
        assert_eq!(terms[1].cond, Condition::Null);
        assert_eq!(terms[2].cond, chat);
    }

    #[test]
    fn dual_requires_second_condition() {
        let g = Guidance::Dual { w1: 2.0, w2: 1.0 };
        assert!(g.terms(&Condition::original(0), None).is_err());
    }

    #[test]
    fn cfg_with_unit_scale_is_conditional() {
        let (den, store) =
            Denoiser::init(DenoiserConfig::default(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let c = Condition::original(3);
        let plain = den.predict_noise(&store, [0.2, 1.1], 9, &c).unwrap();
        let guided =
            guided_noise(&den, &store, [0.2, 1.1], 9, &c, None, Guidance::Cfg { w: 1.0 }).unwrap();
        assert_eq!(plain, guided);
    }
}

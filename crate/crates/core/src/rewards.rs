//! Analytic reward functions over a generated point and its original
//! condition. Every reward maps into [0, 1].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pareto::RewardVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum RewardKind {
    /// `exp(−(‖x‖ − radius)² / width²)`
    Ring { radius: f64, width: f64 },
    /// `sigmoid(gain · (x · d) / ‖d‖)`
    HalfPlane { direction: [f64; 2], gain: f64 },
    /// `exp(−‖x − μ_c‖² / bandwidth²)` against the condition's centre.
    Alignment { bandwidth: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: RewardKind,
}

impl RewardSpec {
    pub fn new(name: &str, kind: RewardKind) -> Self {
        Self {
            name: name.to_string(),
            kind,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            RewardKind::Ring { radius, width } => radius.is_finite() && width > 0.0,
            RewardKind::HalfPlane { direction, gain } => {
                gain.is_finite() && direction[0].hypot(direction[1]) > 0.0
            }
            RewardKind::Alignment { bandwidth } => bandwidth > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid reward parameters for {:?}", self.name)))
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Default four objectives: aesthetics (ring), preference (diagonal
/// half-plane), alignment (cluster kernel), sentiment (upper half-plane).
pub fn default_specs() -> Vec<RewardSpec> {
    vec![
        RewardSpec::new(
            "aesthetics",
            RewardKind::Ring {
                radius: 2.0,
                width: 0.5,
            },
        ),
        RewardSpec::new(
            "preference",
            RewardKind::HalfPlane {
                direction: [1.0, 1.0],
                gain: 2.0,
            },
        ),
        RewardSpec::new("alignment", RewardKind::Alignment { bandwidth: 0.6 }),
        RewardSpec::new(
            "sentiment",
            RewardKind::HalfPlane {
                direction: [0.0, 1.0],
                gain: 2.0,
            },
        ),
    ]
}

/// Scores `x0` under one reward for original condition centre `center`.
pub fn eval_reward(spec: &RewardSpec, x0: [f64; 2], center: [f64; 2]) -> Result<f64> {
    if !(x0[0].is_finite() && x0[1].is_finite()) {
        return Err(Error::NonFinite(format!("input to reward {}", spec.name)));
    }
    let r = match spec.kind {
        RewardKind::Ring { radius, width } => {
            let d = x0[0].hypot(x0[1]) - radius;
            (-(d * d) / (width * width)).exp()
        }
        RewardKind::HalfPlane { direction, gain } => {
            let norm = direction[0].hypot(direction[1]);
            sigmoid(gain * (x0[0] * direction[0] + x0[1] * direction[1]) / norm)
        }
        RewardKind::Alignment { bandwidth } => {
            let dx = x0[0] - center[0];
            let dy = x0[1] - center[1];
            (-(dx * dx + dy * dy) / (bandwidth * bandwidth)).exp()
        }
    };
    Ok(r)
}

/// K reward specs (identifier k is position k−1) plus the condition
/// centres used by alignment rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardRegistry {
    specs: Vec<RewardSpec>,
    centers: Vec<[f64; 2]>,
}

impl RewardRegistry {
    pub fn new(specs: Vec<RewardSpec>, centers: Vec<[f64; 2]>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Config("reward registry needs at least one reward".into()));
        }
        for s in &specs {
            s.validate()?;
        }
        Ok(Self { specs, centers })
    }

    pub fn with_defaults(centers: Vec<[f64; 2]>) -> Self {
        Self::new(default_specs(), centers).expect("default rewards are valid")
    }

    /// K.
    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn specs(&self) -> &[RewardSpec] {
        &self.specs
    }

    pub fn centers(&self) -> &[[f64; 2]] {
        &self.centers
    }

    pub fn center(&self, c: usize) -> Result<[f64; 2]> {
        self.centers
            .get(c)
            .copied()
            .ok_or_else(|| Error::contract(format!("unknown condition token {c}")))
    }

    /// Reward with 1-based identifier `id`.
    pub fn eval(&self, id: usize, x0: [f64; 2], c: usize) -> Result<f64> {
        let spec = id
            .checked_sub(1)
            .and_then(|i| self.specs.get(i))
            .ok_or_else(|| Error::contract(format!("reward identifier {id} out of range")))?;
        eval_reward(spec, x0, self.center(c)?)
    }

    pub fn eval_vector(&self, x0: [f64; 2], c: usize) -> Result<RewardVector> {
        let center = self.center(c)?;
        let values = self
            .specs
            .iter()
            .map(|s| eval_reward(s, x0, center))
            .collect::<Result<Vec<_>>>()?;
        RewardVector::new(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::DataConfig;

    fn registry() -> RewardRegistry {
        RewardRegistry::with_defaults(DataConfig::default().centers())
    }

    #[test]
    fn alignment_peaks_at_center() {
        let reg = registry();
        for c in 0..8 {
            assert_eq!(reg.eval(3, reg.center(c).unwrap(), c).unwrap(), 1.0);
        }
    }

    #[test]
    fn ring_peaks_on_radius_two() {
        assert_eq!(registry().eval(1, [2.0, 0.0], 0).unwrap(), 1.0);
    }

    #[test]
    fn preference_saturates() {
        let reg = registry();
        assert!(reg.eval(2, [10.0, 10.0], 0).unwrap() > 0.99999);
        assert!(reg.eval(2, [-10.0, -10.0], 0).unwrap() < 1e-5);
        // √2·(x+y) at (0.5, 0) → sigmoid(0.7071…)
        let expect = 1.0 / (1.0 + (-(0.5f64 * 2f64.sqrt())).exp());
        assert!((reg.eval(2, [0.5, 0.0], 0).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn sentiment_is_vertical_sigmoid() {
        let reg = registry();
        assert_eq!(reg.eval(4, [3.0, 0.0], 0).unwrap(), 0.5);
        assert!((reg.eval(4, [0.0, 1.0], 0).unwrap() - sigmoid(2.0)).abs() < 1e-15);
    }

    #[test]
    fn coincident_maxima_in_positive_quadrant() {
        let reg = registry();
        let mu = reg.center(1).unwrap();
        let v = reg.eval_vector(mu, 1).unwrap();
        assert_eq!(v.get(0), 1.0);
        assert_eq!(v.get(2), 1.0);
    }

    #[test]
    fn trade_off_exists_for_off_ring_center() {
        let reg = RewardRegistry::with_defaults(vec![[1.0, 0.0]]);
        let a = [2.0, 0.0];
        let b = [1.0, 0.0];
        assert!(reg.eval(1, a, 0).unwrap() > reg.eval(1, b, 0).unwrap());
        assert!(reg.eval(3, a, 0).unwrap() < reg.eval(3, b, 0).unwrap());
    }

    #[test]
    fn non_finite_and_bad_ids_rejected() {
        let reg = registry();
        assert!(reg.eval_vector([f64::NAN, 0.0], 0).is_err());
        assert!(reg.eval(0, [0.0, 0.0], 0).is_err());
        assert!(reg.eval(5, [0.0, 0.0], 0).is_err());
        assert!(reg.eval_vector([0.0, 0.0], 8).is_err());
    }

    #[test]
    fn sigmoid_extremes_are_stable() {
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn registry_block_parses_from_toml() {
        #[derive(Deserialize)]
        struct Block {
            rewards: Vec<RewardSpec>,
        }
        let text = r#"
            [[rewards]]
            name = "ring"
            kind = "ring"
            radius = 1.5
            width = 0.4

            [[rewards]]
            name = "up"
            kind = "half_plane"
            direction = [0.0, 1.0]
            gain = 3.0
        "#;
        let block: Block = toml::from_str(text).unwrap();
        assert_eq!(
            block.rewards[0].kind,
            RewardKind::Ring {
                radius: 1.5,
                width: 0.4
            }
        );
        let reg = RewardRegistry::new(block.rewards, vec![[0.0, 0.0]]).unwrap();
        assert_eq!(reg.len(), 2);
    }
}

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Toy conditional data: condition `c` owns a Gaussian cluster centred at
/// angle `2πc / n` on a circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub n_conditions: usize,
    pub radius: f64,
    pub std: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            n_conditions: 8,
            radius: 2.0,
            std: 0.3,
        }
    }
}

impl DataConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_conditions == 0 || !(self.radius >= 0.0) || !(self.std > 0.0) {
            return Err(Error::Config(format!("invalid data block {self:?}")));
        }
        Ok(())
    }

    /// μ_c for every condition token.
    pub fn centers(&self) -> Vec<[f64; 2]> {
        (0..self.n_conditions)
            .map(|c| {
                let angle = 2.0 * std::f64::consts::PI * c as f64 / self.n_conditions as f64;
                [self.radius * angle.cos(), self.radius * angle.sin()]
            })
            .collect()
    }

    pub fn sample_x0<R: Rng + ?Sized>(&self, c: usize, rng: &mut R) -> [f64; 2] {
        let mu = self.centers()[c];
        let zx: f64 = StandardNormal.sample(rng);
        let zy: f64 = StandardNormal.sample(rng);
        [mu[0] + self.std * zx, mu[1] + self.std * zy]
    }
}

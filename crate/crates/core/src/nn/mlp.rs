use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::params::{Grads, ParamId, ParamStore};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output `a` and input `z`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Layer sizes of a fully connected network. The activation applies to
/// hidden layers only; the output layer is linear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::contract(format!("MLP dims must be >= 1: {self:?}")));
        }
        Ok(())
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut prev = self.input_dim;
        for &h in self.hidden_dims.iter().chain(std::iter::once(&self.output_dim)) {
            dims.push((prev, h));
            prev = h;
        }
        dims
    }
}

#[derive(Debug, Clone, Copy)]
struct Layer {
    weight: ParamId,
    bias: ParamId,
    fan_in: usize,
    fan_out: usize,
}

/// An MLP whose weights live in a shared [`ParamStore`] under `prefix`.
///
/// Weights are stored row-major as `[fan_out, fan_in]`.
#[derive(Debug, Clone)]
pub struct Mlp {
    spec: MlpSpec,
    layers: Vec<Layer>,
}

/// Activations saved by [`Mlp::forward_cached`] for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct MlpCache {
    /// Input to each layer (`inputs[0]` is the network input).
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Vec<f64>>,
}

impl Mlp {
    /// Registers zero-valued weights in `store`.
    pub fn register(store: &mut ParamStore, prefix: &str, spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let mut layers = Vec::new();
        for (i, (fan_in, fan_out)) in spec.layer_dims().into_iter().enumerate() {
            let weight = store.zeros(&format!("{prefix}.l{i}.weight"), &[fan_out, fan_in])?;
            let bias = store.zeros(&format!("{prefix}.l{i}.bias"), &[fan_out])?;
            layers.push(Layer {
                weight,
                bias,
                fan_in,
                fan_out,
            });
        }
        Ok(Self { spec, layers })
    }

    /// Re-binds to weights already present in `store` (e.g. a loaded
    /// checkpoint).
    pub fn bind(store: &ParamStore, prefix: &str, spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let mut layers = Vec::new();
        for (i, (fan_in, fan_out)) in spec.layer_dims().into_iter().enumerate() {
            let lookup = |suffix: &str, shape: &[usize]| {
                let name = format!("{prefix}.l{i}.{suffix}");
                let id = store
                    .id(&name)
                    .ok_or_else(|| Error::contract(format!("missing parameter {name}")))?;
                if store.get(id).shape != shape {
                    return Err(Error::contract(format!(
                        "parameter {name} has shape {:?}, expected {shape:?}",
                        store.get(id).shape
                    )));
                }
                Ok(id)
            };
            layers.push(Layer {
                weight: lookup("weight", &[fan_out, fan_in])?,
                bias: lookup("bias", &[fan_out])?,
                fan_in,
                fan_out,
            });
        }
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    /// Gaussian weights with variance 1/fan_in, zero biases.
    pub fn init_random<R: Rng + ?Sized>(&self, store: &mut ParamStore, rng: &mut R) {
        for layer in &self.layers {
            let std = (1.0 / layer.fan_in as f64).sqrt();
            let w = store.get_mut(layer.weight);
            for v in &mut w.value {
                let z: f64 = StandardNormal.sample(rng);
                *v = std * z;
            }
            store.get_mut(layer.bias).value.fill(0.0);
        }
    }

    /// Zeroes the output layer so the network starts as the zero map.
    pub fn zero_head(&self, store: &mut ParamStore) {
        let last = self.layers[self.layers.len() - 1];
        store.get_mut(last.weight).value.fill(0.0);
        store.get_mut(last.bias).value.fill(0.0);
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.spec.input_dim {
            return Err(Error::contract(format!(
                "MLP input has length {}, expected {}",
                x.len(),
                self.spec.input_dim
            )));
        }
        Ok(())
    }

    pub fn forward(&self, store: &ParamStore, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let mut z = affine(store, layer, &h);
            if li != last {
                z.iter_mut().for_each(|v| *v = self.spec.activation.apply(*v));
            }
            h = z;
        }
        Ok(h)
    }

    pub fn forward_cached(&self, store: &ParamStore, x: &[f64]) -> Result<(Vec<f64>, MlpCache)> {
        self.check_input(x)?;
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len().saturating_sub(1)),
        };
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let z = affine(store, layer, &h);
            cache.inputs.push(h);
            if li != last {
                h = z.iter().map(|&v| self.spec.activation.apply(v)).collect();
                cache.pre.push(z);
            } else {
                h = z;
            }
        }
        Ok((h, cache))
    }

    /// Reverse pass: adds dL/dθ into `grads` and returns dL/dx.
    pub fn backward(
        &self,
        store: &ParamStore,
        cache: &MlpCache,
        upstream: &[f64],
        grads: &mut Grads,
    ) -> Result<Vec<f64>> {
        if upstream.len() != self.spec.output_dim {
            return Err(Error::contract(format!(
                "upstream gradient has length {}, expected {}",
                upstream.len(),
                self.spec.output_dim
            )));
        }
        let mut delta = upstream.to_vec();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let input = &cache.inputs[li];
            {
                let gw = grads.get_mut(layer.weight);
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &mut gw[o * layer.fan_in..(o + 1) * layer.fan_in];
                    for (g, &xi) in row.iter_mut().zip(input) {
                        *g += d * xi;
                    }
                }
            }
            {
                let gb = grads.get_mut(layer.bias);
                for (g, &d) in gb.iter_mut().zip(&delta) {
                    *g += d;
                }
            }
            let w = &store.get(layer.weight).value;
            let mut dx = vec![0.0; layer.fan_in];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &w[o * layer.fan_in..(o + 1) * layer.fan_in];
                for (acc, &wi) in dx.iter_mut().zip(row) {
                    *acc += d * wi;
                }
            }
            if li > 0 {
                let pre = &cache.pre[li - 1];
                for (d, (&z, &a)) in dx.iter_mut().zip(pre.iter().zip(input)) {
                    *d *= self.spec.activation.derivative(z, a);
                }
            }
            delta = dx;
        }
        Ok(delta)
    }

    /// Forward at `x`, then accumulates the gradient of `upstream · f(x)`
    /// into the store's own accumulators. Returns dL/dx.
    pub fn backprop(&self, store: &mut ParamStore, x: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        let (_, cache) = self.forward_cached(store, x)?;
        let mut grads = store.take_grads();
        let result = self.backward(store, &cache, upstream, &mut grads);
        store.put_grads(grads);
        result
    }
}

#[inline]
fn affine(store: &ParamStore, layer: &Layer, x: &[f64]) -> Vec<f64> {
    let w = &store.get(layer.weight).value;
    let b = &store.get(layer.bias).value;
    (0..layer.fan_out)
        .map(|o| {
            let row = &w[o * layer.fan_in..(o + 1) * layer.fan_in];
            b[o] + row.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>()
        })
        .collect()
}

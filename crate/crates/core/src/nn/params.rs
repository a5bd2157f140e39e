use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// One named parameter array with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Gradient arrays laid out like a [`ParamStore`], for accumulating
/// contributions away from the store (e.g. one buffer per rollout).
#[derive(Debug, Clone, PartialEq)]
pub struct Grads(Vec<Vec<f64>>);

impl Grads {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Self(store.params.iter().map(|p| vec![0.0; p.len()]).collect())
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.0[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.0[id.0]
    }

    pub fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.0.iter_mut().flatten().for_each(|g| *g *= factor);
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().flatten().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.0.iter().flatten().copied().collect()
    }
}

/// Handle to a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Ordered collection of named parameter arrays.
///
/// Insertion order is the canonical order for optimizer state, checkpoints
/// and flat coordinate indexing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    index: BTreeMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a new array. Names must be unique and the value length
    /// must match the shape.
    pub fn insert(&mut self, name: &str, shape: &[usize], value: Vec<f64>) -> Result<ParamId> {
        let numel: usize = shape.iter().product();
        if numel != value.len() {
            return Err(Error::contract(format!(
                "parameter {name}: shape {shape:?} needs {numel} values, got {}",
                value.len()
            )));
        }
        if self.index.contains_key(name) {
            return Err(Error::contract(format!("duplicate parameter name {name}")));
        }
        let id = self.params.len();
        self.params.push(Param {
            name: name.to_string(),
            shape: shape.to_vec(),
            grad: vec![0.0; value.len()],
            value,
        });
        self.index.insert(name.to_string(), id);
        Ok(ParamId(id))
    }

    pub fn zeros(&mut self, name: &str, shape: &[usize]) -> Result<ParamId> {
        let numel = shape.iter().product();
        self.insert(name, shape, vec![0.0; numel])
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.id(name).map(|id| self.get_mut(id))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar coordinates.
    pub fn numel(&self) -> usize {
        self.params.iter().map(Param::len).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.params
            .iter()
            .flat_map(|p| p.grad.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale_grad(&mut self, factor: f64) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g *= factor);
        }
    }

    /// Rescales gradients so their global L2 norm is at most `max_norm`.
    /// Returns the norm before clipping.
    pub fn clip_grad_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.grad_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale_grad(max_norm / norm);
        }
        norm
    }

    /// Flat coordinate `i` resolved to (param, offset).
    pub fn locate(&self, mut i: usize) -> Option<(ParamId, usize)> {
        for (id, p) in self.params.iter().enumerate() {
            if i < p.len() {
                return Some((ParamId(id), i));
            }
            i -= p.len();
        }
        None
    }

    pub fn flat_values(&self) -> Vec<f64> {
        self.params.iter().flat_map(|p| p.value.iter().copied()).collect()
    }

    pub fn flat_grads(&self) -> Vec<f64> {
        self.params.iter().flat_map(|p| p.grad.iter().copied()).collect()
    }

    /// Adds a flat gradient vector (same layout as [`flat_grads`](Self::flat_grads)).
    pub fn add_flat_grads(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.numel() {
            return Err(Error::contract(format!(
                "flat gradient has {} entries, store has {}",
                flat.len(),
                self.numel()
            )));
        }
        let mut offset = 0;
        for p in &mut self.params {
            for (g, d) in p.grad.iter_mut().zip(&flat[offset..offset + p.value.len()]) {
                *g += d;
            }
            offset += p.value.len();
        }
        Ok(())
    }

    /// Same names, shapes and order as `other`.
    pub fn same_layout(&self, other: &ParamStore) -> bool {
        self.params.len() == other.params.len()
            && self
                .params
                .iter()
                .zip(&other.params)
                .all(|(a, b)| a.name == b.name && a.shape == b.shape)
    }

    /// Moves the gradient accumulators out, leaving empty arrays until
    /// [`put_grads`](Self::put_grads) restores them.
    pub fn take_grads(&mut self) -> Grads {
        Grads(self.params.iter_mut().map(|p| std::mem::take(&mut p.grad)).collect())
    }

    pub fn put_grads(&mut self, grads: Grads) {
        for (p, g) in self.params.iter_mut().zip(grads.0) {
            p.grad = g;
        }
    }

    /// Adds a gradient buffer into the accumulators.
    pub fn add_grads(&mut self, grads: &Grads) {
        for (p, g) in self.params.iter_mut().zip(&grads.0) {
            for (x, y) in p.grad.iter_mut().zip(g) {
                *x += y;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params
            .iter()
            .all(|p| p.value.iter().all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insert_checks_shape_and_names() {
        let mut s = ParamStore::new();
        s.insert("w", &[2, 3], vec![0.0; 6]).unwrap();
        assert!(s.insert("w", &[1], vec![0.0]).is_err());
        assert!(s.insert("v", &[2, 2], vec![0.0; 3]).is_err());
        assert_eq!(s.numel(), 6);
        assert_eq!(s.by_name("w").unwrap().grad.len(), 6);
    }

    #[test]
    fn locate_walks_flat_layout() {
        let mut s = ParamStore::new();
        let a = s.zeros("a", &[3]).unwrap();
        let b = s.zeros("b", &[2, 2]).unwrap();
        assert_eq!(s.locate(0), Some((a, 0)));
        assert_eq!(s.locate(2), Some((a, 2)));
        assert_eq!(s.locate(3), Some((b, 0)));
        assert_eq!(s.locate(6), Some((b, 3)));
        assert_eq!(s.locate(7), None);
    }

    #[test]
    fn clipping_caps_global_norm() {
        let mut s = ParamStore::new();
        let a = s.zeros("a", &[2]).unwrap();
        s.get_mut(a).grad = vec![3.0, 4.0];
        let before = s.clip_grad_norm(1.0);
        assert_eq!(before, 5.0);
        assert!((s.grad_norm() - 1.0).abs() < 1e-12);
        let before = s.clip_grad_norm(10.0);
        assert!((before - 1.0).abs() < 1e-12);
        assert!((s.grad_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_grad_roundtrip() {
        let mut s = ParamStore::new();
        s.zeros("a", &[2]).unwrap();
        s.zeros("b", &[1]).unwrap();
        s.add_flat_grads(&[1.0, 2.0, 3.0]).unwrap();
        s.add_flat_grads(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(s.flat_grads(), vec![2.0, 3.0, 4.0]);
        assert!(s.add_flat_grads(&[1.0]).is_err());
    }
}

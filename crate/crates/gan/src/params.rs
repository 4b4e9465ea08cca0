//! Named parameter storage, gradients and BatchNorm running statistics.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    /// Running statistics are stored but not optimized.
    pub trainable: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<Entry>,
}

pub type ParamId = usize;

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, shape: Vec<usize>, value: Vec<f64>, trainable: bool) -> ParamId {
        assert_eq!(shape.iter().product::<usize>(), value.len());
        self.entries.push(Entry { name: name.into(), shape, value, trainable });
        self.entries.len() - 1
    }

    pub fn add_normal(&mut self, name: impl Into<String>, shape: Vec<usize>, std: f64, rng: &mut impl Rng) -> ParamId {
        let len = shape.iter().product();
        let normal = Normal::new(0.0, std).expect("finite std");
        let value = (0..len).map(|_| normal.sample(rng)).collect();
        self.add(name, shape, value, true)
    }

    pub fn add_const(&mut self, name: impl Into<String>, shape: Vec<usize>, v: f64, trainable: bool) -> ParamId {
        let len = shape.iter().product();
        self.add(name, shape, vec![v; len], trainable)
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.entries[id].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.entries[id].value
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [Entry] {
        &mut self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of trainable scalars.
    pub fn count(&self) -> usize {
        self.entries.iter().filter(|e| e.trainable).map(|e| e.value.len()).sum()
    }

    /// Sets every trainable scalar to `v`.
    pub fn fill_trainable(&mut self, v: f64) {
        for e in self.entries.iter_mut().filter(|e| e.trainable) {
            e.value.fill(v);
        }
    }

    /// SHA-256 over names, shapes and the little-endian bytes of every value.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.entries {
            h.update(e.name.as_bytes());
            for &d in &e.shape {
                h.update((d as u64).to_le_bytes());
            }
            for v in &e.value {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Replaces all values from `other`, which must have the same layout.
    pub fn load(&mut self, other: &ParamStore) -> Result<(), String> {
        if self.entries.len() != other.entries.len() {
            return Err(format!("expected {} tensors, found {}", self.entries.len(), other.entries.len()));
        }
        for (a, b) in self.entries.iter().zip(&other.entries) {
            if a.name != b.name || a.shape != b.shape || a.trainable != b.trainable {
                return Err(format!("tensor {} {:?} does not match {} {:?}", a.name, a.shape, b.name, b.shape));
            }
        }
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            a.value.clone_from(&b.value);
        }
        Ok(())
    }

    pub(crate) fn apply_stats(&mut self, stats: &[StatUpdate], momentum: f64) {
        for s in stats {
            for (r, &m) in self.entries[s.mean].value.iter_mut().zip(&s.batch_mean) {
                *r = (1.0 - momentum) * *r + momentum * m;
            }
            for (r, &v) in self.entries[s.var].value.iter_mut().zip(&s.batch_var) {
                *r = (1.0 - momentum) * *r + momentum * v;
            }
        }
    }
}

/// Batch statistics observed during a training forward pass.
#[derive(Debug, Clone)]
pub struct StatUpdate {
    pub(crate) mean: ParamId,
    pub(crate) var: ParamId,
    pub(crate) batch_mean: Vec<f64>,
    pub(crate) batch_var: Vec<f64>,
}

/// Gradients laid out parallel to a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    values: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Self { values: store.entries.iter().map(|e| if e.trainable { vec![0.0; e.value.len()] } else { Vec::new() }).collect() }
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.values[id]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.values[id]
    }

    pub(crate) fn pair_mut(&mut self, a: ParamId, b: ParamId) -> (&mut [f64], &mut [f64]) {
        assert!(a < b);
        let (lo, hi) = self.values.split_at_mut(b);
        (&mut lo[a], &mut hi[0])
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn scale(&mut self, s: f64) {
        for v in self.values.iter_mut().flatten() {
            *v *= s;
        }
    }

    pub fn add(&mut self, other: &Grads) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite())
    }
}

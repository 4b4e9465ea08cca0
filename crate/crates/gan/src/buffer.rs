//! Bounded store of previously refined images.

use rand::seq::index;
use rand::Rng;

use crate::error::{GanError, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryBuffer {
    capacity: usize,
    item_shape: Option<[usize; 3]>,
    items: Vec<Vec<f32>>,
}

impl HistoryBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, item_shape: None, items: Vec::new() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item_shape(&self) -> Option<[usize; 3]> {
        self.item_shape
    }

    fn check_shape(&mut self, shape: [usize; 3]) -> Result<()> {
        match self.item_shape {
            None => {
                self.item_shape = Some(shape);
                Ok(())
            }
            Some(s) if s == shape => Ok(()),
            Some(s) => Err(GanError::shape("history buffer", format!("{s:?}"), format!("{shape:?}"))),
        }
    }

    /// Stores one image; once full, a uniformly chosen stored image is
    /// replaced and its slot returned.
    pub fn push_one(&mut self, shape: [usize; 3], image: &[f64], rng: &mut impl Rng) -> Result<Option<usize>> {
        self.check_shape(shape)?;
        if self.capacity == 0 {
            return Ok(None);
        }
        let item: Vec<f32> = image.iter().map(|&v| v as f32).collect();
        if self.items.len() < self.capacity {
            self.items.push(item);
            Ok(None)
        } else {
            let victim = rng.random_range(0..self.items.len());
            self.items[victim] = item;
            Ok(Some(victim))
        }
    }

    pub fn push(&mut self, batch: &Tensor, rng: &mut impl Rng) -> Result<()> {
        let [_, c, h, w] = batch.shape();
        for i in 0..batch.n() {
            self.push_one([c, h, w], batch.item(i), rng)?;
        }
        Ok(())
    }

    /// Up to `k` distinct stored images; `None` when the buffer is empty.
    pub fn sample(&self, k: usize, rng: &mut impl Rng) -> Option<Tensor> {
        let [c, h, w] = self.item_shape?;
        let k = k.min(self.items.len());
        if k == 0 {
            return None;
        }
        let mut data = Vec::with_capacity(k * c * h * w);
        for i in index::sample(rng, self.items.len(), k) {
            data.extend(self.items[i].iter().map(|&v| v as f64));
        }
        Some(Tensor::new([k, c, h, w], data))
    }

    pub(crate) fn raw_items(&self) -> &[Vec<f32>] {
        &self.items
    }

    pub(crate) fn restore(capacity: usize, item_shape: Option<[usize; 3]>, items: Vec<Vec<f32>>) -> Self {
        Self { capacity, item_shape, items }
    }
}

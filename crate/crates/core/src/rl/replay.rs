use rand::Rng;

use super::RlError;

/// Fixed-capacity FIFO memory, sampled uniformly with replacement.
#[derive(Clone, Debug)]
pub struct ReplayBuffer<T> {
    items: Vec<T>,
    capacity: usize,
    cursor: usize,
}

impl<T: Clone> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { items: Vec::with_capacity(capacity.min(1 << 16)), capacity, cursor: 0 }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Appends, overwriting the oldest entry once full.
    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.cursor] = item;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Contents from oldest to newest.
    pub fn ordered(&self) -> Vec<T> {
        if self.items.len() < self.capacity {
            return self.items.clone();
        }
        self.items[self.cursor..].iter().chain(&self.items[..self.cursor]).cloned().collect()
    }

    pub fn sample_indices<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<Vec<usize>, RlError> {
        if self.items.len() < m || m == 0 {
            return Err(RlError::Underfilled { fill: self.items.len(), needed: m.max(1) });
        }
        Ok((0..m).map(|_| rng.random_range(0..self.items.len())).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<Vec<T>, RlError> {
        Ok(self.sample_indices(m, rng)?.into_iter().map(|i| self.items[i].clone()).collect())
    }
}

use rand::Rng;

use super::{DqnError, Transition};
use crate::SimRng;

/// Fixed-capacity ring buffer sampled uniformly with replacement.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    items: Vec<Transition>,
    capacity: usize,
    next: usize,
    warmup: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize, warmup: usize) -> Result<Self, DqnError> {
        if capacity == 0 {
            return Err(DqnError::InvalidConfig {
                name: "replay_capacity",
                reason: "must be positive".into(),
            });
        }
        Ok(Self {
            items: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            next: 0,
            warmup,
        })
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

    pub fn is_warm(&self) -> bool {
        !self.items.is_empty() && self.items.len() >= self.warmup
    }

    pub fn items(&self) -> &[Transition] {
        &self.items
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Indices into [`Self::items`].
    pub fn sample_indices(&self, batch: usize, rng: &mut SimRng) -> Result<Vec<usize>, DqnError> {
        if !self.is_warm() {
            return Err(DqnError::NotWarm {
                have: self.items.len(),
                need: self.warmup.max(1),
            });
        }
        Ok((0..batch).map(|_| rng.random_range(0..self.items.len())).collect())
    }

    pub fn sample(&self, batch: usize, rng: &mut SimRng) -> Result<Vec<&Transition>, DqnError> {
        Ok(self
            .sample_indices(batch, rng)?
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }
}

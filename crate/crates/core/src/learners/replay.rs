//! Fixed-capacity transition ring with uniform minibatch sampling.

use std::collections::VecDeque;

use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::game_env::StateId;

/// One stored interaction (s, a, r, s', terminal).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: StateId,
    pub a: usize,
    pub r: f64,
    pub s_next: StateId,
    pub terminal: bool,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
    batch_size: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, batch_size: usize) -> Self {
        ReplayBuffer {
            items: VecDeque::with_capacity(capacity),
            capacity,
            batch_size,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn is_ready(&self) -> bool {
        self.items.len() >= self.batch_size
    }

    pub fn get(&self, index: usize) -> Transition {
        self.items[index]
    }

    /// Uniform sample of `batch_size` distinct indices.
    pub fn sample_indices(&self, rng: &mut ChaCha12Rng) -> Result<Vec<usize>> {
        if !self.is_ready() {
            return Err(Error::Contract(format!(
                "replay buffer holds {} transitions, need {}",
                self.items.len(),
                self.batch_size
            )));
        }
        Ok(rand::seq::index::sample(rng, self.items.len(), self.batch_size).into_vec())
    }
}

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::env::ACTION_COUNT;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub r_cov: f64,
    pub r_comm: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
    pub next_mask: [bool; ACTION_COUNT],
    /// Fused weight in force when the action was taken.
    pub weight: [f64; 2],
}

/// Fixed-capacity FIFO replay memory with uniform sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    /// Index of the oldest item once full.
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            head: 0,
        }
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

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Oldest-first iteration.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.items.split_at(self.head);
        older.iter().chain(newer)
    }

    /// `n` draws with replacement.
    pub fn sample<'a>(&'a self, n: usize, rng: &mut Rng) -> Vec<&'a Transition> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n)
            .map(|_| &self.items[rng.gen_range(0..self.items.len())])
            .collect()
    }
}

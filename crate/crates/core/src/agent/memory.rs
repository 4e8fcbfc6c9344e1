use std::collections::VecDeque;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Action, AgentState};
use crate::rng::Rng;

pub const DEFAULT_CAPACITY: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: AgentState,
    pub action: Action,
    pub reward: f64,
    pub next_state: AgentState,
    pub terminal: bool,
}

/// Bounded FIFO of transitions with uniform sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayMemory {
    capacity: usize,
    entries: VecDeque<Transition>,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            entries: VecDeque::with_capacity(capacity.clamp(1, 4096)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Append, evicting the oldest entry when full. Returns the evicted entry.
    pub fn push(&mut self, t: Transition) -> Option<Transition> {
        let evicted = if self.entries.len() == self.capacity {
            self.entries.pop_front()
        } else {
            None
        };
        self.entries.push_back(t);
        evicted
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.entries.iter()
    }

    /// `n` draws with replacement.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Vec<Transition> {
        if self.entries.is_empty() {
            return Vec::new();
        }
        (0..n).map(|_| self.entries[rng.random_range(0..self.entries.len())]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(i: usize) -> Transition {
        let s = AgentState::neutral();
        Transition {
            state: s,
            action: Action::NoQuery,
            reward: i as f64,
            next_state: s,
            terminal: false,
        }
    }

    #[test]
    fn evicts_oldest_first() {
        let mut m = ReplayMemory::new(10);
        let mut evicted = Vec::new();
        for i in 0..13 {
            evicted.extend(m.push(t(i)));
        }
        assert_eq!(m.len(), 10);
        let ev: Vec<f64> = evicted.iter().map(|t| t.reward).collect();
        assert_eq!(ev, vec![0.0, 1.0, 2.0]);
        assert_eq!(m.iter().next().unwrap().reward, 3.0);
    }
}

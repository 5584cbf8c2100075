//! Bounded FIFO replay memory.

use std::collections::VecDeque;

use rand_chacha::ChaCha20Rng;

/// One stored experience tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Bounded FIFO of transitions; eviction is oldest-first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "capacity must be positive");
        ReplayBuffer {
            items: VecDeque::with_capacity(capacity.min(1 << 20)),
            capacity,
            inserted: 0,
        }
    }

    pub fn push(&mut self, transition: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(transition);
        self.inserted += 1;
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

    /// Total insertions since construction, including evicted ones.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.items.get(index)
    }

    /// Uniform sample of `amount` distinct indices.
    pub fn sample_indices(&self, amount: usize, rng: &mut ChaCha20Rng) -> Vec<usize> {
        debug_assert!(amount <= self.items.len());
        rand::seq::index::sample(rng, self.items.len(), amount).into_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn transition(tag: f64) -> Transition {
        Transition {
            state: vec![tag],
            action: 0,
            reward: tag,
            next_state: vec![tag + 0.5],
            terminal: false,
        }
    }

    #[test]
    fn fifo_keeps_exactly_the_last_capacity_items() {
        let capacity = 10;
        let extra = 7;
        let mut buffer = ReplayBuffer::new(capacity);
        for i in 0..(capacity + extra) {
            buffer.push(transition(i as f64));
        }
        assert_eq!(buffer.len(), capacity);
        assert_eq!(buffer.inserted(), (capacity + extra) as u64);
        let rewards: Vec<f64> = (0..capacity).map(|i| buffer.get(i).unwrap().reward).collect();
        let expected: Vec<f64> = (extra..capacity + extra).map(|i| i as f64).collect();
        assert_eq!(rewards, expected);
    }

    #[test]
    fn sampling_is_without_replacement() {
        let mut buffer = ReplayBuffer::new(100);
        for i in 0..50 {
            buffer.push(transition(i as f64));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let mut indices = buffer.sample_indices(50, &mut rng);
        indices.sort_unstable();
        indices.dedup();
        assert_eq!(indices.len(), 50);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let mut buffer = ReplayBuffer::new(100);
        for i in 0..60 {
            buffer.push(transition(i as f64));
        }
        let mut a = ChaCha20Rng::seed_from_u64(9);
        let mut b = ChaCha20Rng::seed_from_u64(9);
        assert_eq!(
            buffer.sample_indices(16, &mut a),
            buffer.sample_indices(16, &mut b)
        );
    }
}

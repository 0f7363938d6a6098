use rand::seq::index;
use rand::Rng;
use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: [f64; 2],
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// Bounded FIFO replay memory; the oldest transition is evicted first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { items: VecDeque::with_capacity(capacity.min(1 << 16)), capacity }
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

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// Uniform minibatch without replacement (at most `len()` items).
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<&Transition> {
        let n = batch.min(self.items.len());
        index::sample(rng, self.items.len(), n).into_iter().map(|i| &self.items[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn t(r: f64) -> Transition {
        Transition { state: vec![r], action: [0.0, 0.0], reward: r, next_state: vec![r] }
    }

    #[test]
    fn evicts_oldest_first() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(t(i as f64));
            assert!(b.len() <= 3);
        }
        let rewards: Vec<f64> = (0..3).map(|i| b.get(i).unwrap().reward).collect();
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn sampling_has_no_duplicates() {
        let mut b = ReplayBuffer::new(100);
        for i in 0..50 {
            b.push(t(i as f64));
        }
        let s = b.sample(40, &mut seeded(1));
        let mut r: Vec<i64> = s.iter().map(|x| x.reward as i64).collect();
        r.sort();
        r.dedup();
        assert_eq!(r.len(), 40);
        assert_eq!(b.sample(80, &mut seeded(1)).len(), 50);
    }
}

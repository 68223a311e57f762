use std::collections::VecDeque;

use rand::Rng;

/// What the agent observed at the start of a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub q: u32,
    pub t: usize,
    pub mid: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: Observation,
    pub action: u32,
    pub reward: f64,
    pub next: Observation,
    /// No reward can follow: the horizon is over or nothing is left to sell.
    pub terminal: bool,
}

/// Bounded replay memory; once full, the oldest half is dropped.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    buf: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 2, "replay capacity must be at least 2");
        Self {
            buf: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn push(&mut self, tr: Transition) {
        if self.buf.len() >= self.capacity {
            self.halve();
        }
        self.buf.push_back(tr);
    }

    /// Drops the oldest half once the memory has reached capacity.
    pub fn halve_if_full(&mut self) -> bool {
        if self.buf.len() >= self.capacity {
            self.halve();
            true
        } else {
            false
        }
    }

    fn halve(&mut self) {
        let drop = self.buf.len() / 2;
        self.buf.drain(..drop);
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.buf[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.buf.iter()
    }

    /// `size` distinct transitions drawn uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, size: usize, rng: &mut R, out: &mut Vec<Transition>) {
        out.clear();
        let size = size.min(self.buf.len());
        for i in rand::seq::index::sample(rng, self.buf.len(), size) {
            out.push(self.buf[i]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(i: u32) -> Transition {
        let obs = Observation { q: i, t: 0, mid: 10.0 };
        Transition {
            state: obs,
            action: 0,
            reward: f64::from(i),
            next: obs,
            terminal: false,
        }
    }

    #[test]
    fn halving_keeps_newest() {
        let mut m = ReplayMemory::new(10);
        for i in 0..10 {
            m.push(tr(i));
        }
        assert_eq!(m.len(), 10);
        assert!(m.halve_if_full());
        assert_eq!(m.len(), 5);
        assert_eq!(m.get(0).reward, 5.0);
        assert_eq!(m.get(4).reward, 9.0);
        assert!(!m.halve_if_full());
    }

    #[test]
    fn never_exceeds_capacity() {
        let mut m = ReplayMemory::new(8);
        for i in 0..100 {
            m.push(tr(i));
            assert!(m.len() <= 8);
        }
        assert_eq!(m.iter().last().unwrap().reward, 99.0);
    }

    #[test]
    fn sampling_is_distinct() {
        let mut m = ReplayMemory::new(100);
        for i in 0..50 {
            m.push(tr(i));
        }
        let mut out = Vec::new();
        m.sample(32, &mut ChaCha8Rng::seed_from_u64(0), &mut out);
        assert_eq!(out.len(), 32);
        let mut seen: Vec<u32> = out.iter().map(|t| t.state.q).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 32);
    }
}

//! Fixed-capacity experience replay with uniform sampling.

use std::collections::VecDeque;

use rand::Rng;

use super::Transition;

/// Ring buffer of transitions. Once full, pushing evicts the oldest entry.
/// Sampling is uniform with replacement.
#[derive(Debug)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            items: VecDeque::with_capacity(capacity),
            capacity,
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
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    /// Draw `n` transitions uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&Transition> {
        assert!(!self.items.is_empty(), "cannot sample an empty buffer");
        (0..n)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::agents::EncodedObs;

    fn transition(tag: f64) -> Transition {
        let obs = EncodedObs::Features(vec![tag].into_boxed_slice());
        Transition {
            obs: obs.clone(),
            action: 0,
            reward: tag,
            next_obs: obs,
            terminated: false,
            truncated: false,
        }
    }

    #[test]
    fn eviction_is_first_in_first_out() {
        let mut buf = ReplayBuffer::new(10);
        for i in 0..13 {
            buf.push(transition(i as f64));
        }
        assert_eq!(buf.len(), 10);
        let tags: Vec<f64> = buf.items.iter().map(|t| t.reward).collect();
        // 0, 1, 2 were evicted; 3..=12 remain in order.
        assert_eq!(tags, (3..13).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn sampling_is_roughly_uniform() {
        let mut buf = ReplayBuffer::new(20);
        for i in 0..20 {
            buf.push(transition(i as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 100_000;
        let mut counts = [0u32; 20];
        for t in buf.sample(draws, &mut rng) {
            counts[t.reward as usize] += 1;
        }
        // Binomial(n, 1/20): mean 5000, sd ~ 68.9. Allow 4 sigma.
        let mean = draws as f64 / 20.0;
        let sd = (draws as f64 * (1.0 / 20.0) * (19.0 / 20.0)).sqrt();
        for &c in &counts {
            assert!(
                (f64::from(c) - mean).abs() < 4.0 * sd,
                "count {c} too far from uniform mean {mean}"
            );
        }
    }

    #[test]
    fn sampling_with_replacement_can_repeat() {
        let mut buf = ReplayBuffer::new(4);
        buf.push(transition(0.0));
        buf.push(transition(1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // 50 draws from 2 items must repeat by pigeonhole.
        let drawn = buf.sample(50, &mut rng);
        assert_eq!(drawn.len(), 50);
    }
}

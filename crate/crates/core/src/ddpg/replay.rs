use rand::Rng;

use crate::error::{Error, Result};

/// One stored interaction. `action` is the clamped normalized action the
/// environment executed; `reward` is the raw profit in €.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub truncated: bool,
}

/// Fixed-capacity FIFO of transitions with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    storage: Vec<Transition>,
    capacity: usize,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            storage: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            cursor: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    /// Stores `tr`, evicting the oldest entry when full.
    pub fn push(&mut self, tr: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(tr);
        } else {
            self.storage[self.cursor] = tr;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Entries from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.storage.len() < self.capacity {
            0
        } else {
            self.cursor
        };
        self.storage[split..].iter().chain(&self.storage[..split])
    }

    /// Storage slot of each draw, uniform with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.storage.len() < batch_size || batch_size == 0 {
            return Err(Error::NotEnoughSamples {
                have: self.storage.len(),
                need: batch_size.max(1),
            });
        }
        Ok((0..batch_size)
            .map(|_| rng.random_range(0..self.storage.len()))
            .collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        Ok(self
            .sample_indices(batch_size, rng)?
            .into_iter()
            .map(|i| &self.storage[i])
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tagged(r: f64) -> Transition {
        Transition {
            state: vec![r],
            action: vec![0.0],
            reward: r,
            next_state: vec![r],
            truncated: false,
        }
    }

    fn rewards(b: &ReplayBuffer) -> Vec<f64> {
        b.iter().map(|t| t.reward).collect()
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(2);
        b.push(tagged(1.0));
        assert_eq!(b.len(), 1);
        b.push(tagged(2.0));
        b.push(tagged(3.0));
        assert_eq!(rewards(&b), vec![2.0, 3.0]);
        b.push(tagged(4.0));
        assert_eq!(rewards(&b), vec![3.0, 4.0]);
    }

    #[test]
    fn sampling_needs_a_full_batch() {
        let mut b = ReplayBuffer::new(100);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for i in 0..63 {
            b.push(tagged(f64::from(i)));
        }
        assert!(matches!(
            b.sample(64, &mut rng),
            Err(Error::NotEnoughSamples { have: 63, need: 64 })
        ));
        b.push(tagged(63.0));
        assert_eq!(b.sample(64, &mut rng).unwrap().len(), 64);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let mut b = ReplayBuffer::new(10);
        for i in 0..10 {
            b.push(tagged(f64::from(i)));
        }
        let a = b.sample_indices(10, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let c = b.sample_indices(10, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, c);
    }
}

//! Episodic replay.
//!
//! Episodes are stored at their true length and read through a padded view
//! of `e_max` steps: step `t` is filled iff `t < len`.

use super::LearnerError;
use crate::envs::Observation;
use rand::{seq::index::sample, Rng};
use std::collections::VecDeque;

/// One rollout. Index `t` of `states`/`obs`/`legal` is the situation before
/// action `t`; the extra final entry is the situation after the last action.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub states: Vec<Vec<f64>>,
    pub obs: Vec<Vec<Vec<f64>>>,
    pub legal: Vec<Vec<Vec<bool>>>,
    pub actions: Vec<Vec<usize>>,
    pub rewards: Vec<f64>,
    /// Natural termination after step `t`. A truncated episode ends with `false`.
    pub terminated: Vec<bool>,
}

impl Episode {
    pub fn new(start: Observation, legal: Vec<Vec<bool>>) -> Self {
        Self {
            states: vec![start.state],
            obs: vec![start.obs],
            legal: vec![legal],
            actions: Vec::new(),
            rewards: Vec::new(),
            terminated: Vec::new(),
        }
    }

    pub fn push(&mut self, actions: Vec<usize>, reward: f64, terminal: bool, next: Observation, next_legal: Vec<Vec<bool>>) {
        self.actions.push(actions);
        self.rewards.push(reward);
        self.terminated.push(terminal);
        self.states.push(next.state);
        self.obs.push(next.obs);
        self.legal.push(next_legal);
    }

    /// Number of filled steps.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn filled(&self, t: usize) -> bool {
        t < self.len()
    }

    /// Filled flags over the padded horizon.
    pub fn filled_mask(&self, e_max: usize) -> Vec<bool> {
        (0..e_max).map(|t| self.filled(t)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    e_max: usize,
    episodes: VecDeque<Episode>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, e_max: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            e_max,
            episodes: VecDeque::with_capacity(capacity.min(1024)),
        }
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn e_max(&self) -> usize {
        self.e_max
    }

    pub fn get(&self, i: usize) -> Option<&Episode> {
        self.episodes.get(i)
    }

    /// FIFO insert; evicts the oldest episode when full.
    pub fn store(&mut self, ep: Episode) -> Result<(), LearnerError> {
        if ep.len() > self.e_max {
            return Err(LearnerError::EpisodeTooLong { len: ep.len(), e_max: self.e_max });
        }
        if ep.is_empty() {
            return Err(LearnerError::EmptyEpisode);
        }
        if self.episodes.len() == self.capacity {
            self.episodes.pop_front();
        }
        self.episodes.push_back(ep);
        Ok(())
    }

    /// Distinct buffer positions, uniform without replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<usize>, LearnerError> {
        if batch == 0 || self.episodes.len() < batch {
            return Err(LearnerError::NotEnoughEpisodes {
                have: self.episodes.len(),
                need: batch.max(1),
            });
        }
        Ok(sample(rng, self.episodes.len(), batch).into_vec())
    }

    pub fn sample_batch<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<&Episode>, LearnerError> {
        Ok(self.sample_indices(batch, rng)?.into_iter().map(|i| &self.episodes[i]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn dummy_episode(len: usize, tag: f64) -> Episode {
        let ob = |t: usize| Observation {
            state: vec![tag, t as f64],
            obs: vec![vec![tag]],
        };
        let mut ep = Episode::new(ob(0), vec![vec![true, true]]);
        for t in 0..len {
            ep.push(vec![0], 0.0, false, ob(t + 1), vec![vec![true, true]]);
        }
        ep
    }

    #[test]
    fn padded_view_has_filled_prefix() {
        let ep = dummy_episode(10, 0.0);
        let mask = ep.filled_mask(100);
        assert_eq!(mask.len(), 100);
        assert_eq!(mask.iter().filter(|&&f| f).count(), 10);
        assert!(mask[..10].iter().all(|&f| f));
    }

    #[test]
    fn oldest_is_evicted_at_capacity() {
        let mut buf = ReplayBuffer::new(5000, 20);
        for k in 0..5001 {
            buf.store(dummy_episode(1, k as f64)).unwrap();
        }
        assert_eq!(buf.len(), 5000);
        assert_eq!(buf.get(0).unwrap().states[0][0], 1.0);
        assert_eq!(buf.get(4999).unwrap().states[0][0], 5000.0);
    }

    #[test]
    fn sampled_ids_are_distinct() {
        let mut buf = ReplayBuffer::new(50, 5);
        for k in 0..40 {
            buf.store(dummy_episode(2, k as f64)).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let mut ids = buf.sample_indices(32, &mut rng).unwrap();
            ids.sort_unstable();
            ids.dedup();
            assert_eq!(ids.len(), 32);
        }
    }

    #[test]
    fn rejects_underfilled_sample_and_long_episode() {
        let mut buf = ReplayBuffer::new(10, 3);
        buf.store(dummy_episode(3, 0.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(buf.sample_batch(2, &mut rng), Err(LearnerError::NotEnoughEpisodes { .. })));
        assert!(matches!(buf.store(dummy_episode(4, 0.0)), Err(LearnerError::EpisodeTooLong { .. })));
    }
}

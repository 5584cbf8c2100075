//! A data split presented as a sequential-decision environment.
//!
//! Each episode walks the split in a (seeded) order; the action is a label
//! code, the reward scores it against the hidden true label, and the next
//! observation is the next sample regardless of the action taken.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataSplit;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("environment split is empty")]
    EmptySplit,
    #[error("episode already finished; call reset")]
    EpisodeFinished,
    #[error("action {action} out of range for {num_classes} classes")]
    ActionOutOfRange { action: usize, num_classes: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Rewards for correct and incorrect attributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardScheme {
    pub correct_reward: f64,
    pub incorrect_reward: f64,
}

impl Default for RewardScheme {
    fn default() -> Self {
        RewardScheme {
            correct_reward: 1.0,
            incorrect_reward: 0.0,
        }
    }
}

/// Sample visitation order within an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleOrder {
    Shuffled,
    Sequential,
}

/// Episode length: a full pass over the split or a fixed step count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Horizon {
    FullPass,
    Fixed(usize),
}

/// Episode structure: horizon, visitation order, and the seed driving both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSchedule {
    pub horizon: Horizon,
    pub order: SampleOrder,
    pub seed: u64,
    /// When set, each episode's horizon is drawn uniformly from this
    /// inclusive range instead of `horizon`.
    pub vary_horizon: Option<(usize, usize)>,
}

impl Default for EpisodeSchedule {
    fn default() -> Self {
        EpisodeSchedule {
            horizon: Horizon::FullPass,
            order: SampleOrder::Shuffled,
            seed: 0,
            vary_horizon: None,
        }
    }
}

/// Stateful single-threaded environment over an immutable split.
#[derive(Debug, Clone)]
pub struct Environment {
    split: DataSplit,
    scheme: RewardScheme,
    schedule: EpisodeSchedule,
    order: Vec<usize>,
    episode: u64,
    /// Effective horizon of the current episode: min(T, split length).
    episode_len: usize,
    t: usize,
    done: bool,
    stepped_since_reset: bool,
}

impl Environment {
    /// Build an environment; [`Environment::reset`] must be called before
    /// stepping.
    pub fn new(
        split: DataSplit,
        scheme: RewardScheme,
        schedule: EpisodeSchedule,
    ) -> Result<Self, EnvError> {
        if split.is_empty() {
            return Err(EnvError::EmptySplit);
        }
        if scheme.correct_reward <= scheme.incorrect_reward {
            return Err(EnvError::InvalidConfig(
                "correct_reward must exceed incorrect_reward".to_string(),
            ));
        }
        if let Horizon::Fixed(t) = schedule.horizon {
            if t == 0 {
                return Err(EnvError::InvalidConfig("horizon must be at least 1".to_string()));
            }
        }
        if let Some((lo, hi)) = schedule.vary_horizon {
            if lo == 0 || lo > hi {
                return Err(EnvError::InvalidConfig(format!(
                    "vary_horizon range ({lo}, {hi}) must satisfy 1 <= lo <= hi"
                )));
            }
        }
        Ok(Environment {
            split,
            scheme,
            schedule,
            order: Vec::new(),
            episode: 0,
            episode_len: 0,
            t: 0,
            done: true,
            stepped_since_reset: false,
        })
    }

    /// (action count K, observation dimension D)
    pub fn spaces(&self) -> (usize, usize) {
        (self.split.num_classes, self.split.dim)
    }

    pub fn num_classes(&self) -> usize {
        self.split.num_classes
    }

    pub fn observation_dim(&self) -> usize {
        self.split.dim
    }

    pub fn split(&self) -> &DataSplit {
        &self.split
    }

    /// RNG stream for one episode: a pure function of (seed, episode index),
    /// so a replayed episode is identical regardless of what ran before it.
    fn episode_rng(&self) -> ChaCha20Rng {
        let mut seed_bytes = [0u8; 32];
        seed_bytes[..8].copy_from_slice(&self.schedule.seed.to_le_bytes());
        seed_bytes[8..16].copy_from_slice(&self.episode.to_le_bytes());
        ChaCha20Rng::from_seed(seed_bytes)
    }

    /// Begin an episode and return the first observation.
    ///
    /// Calling reset again before any step replays the same episode.
    pub fn reset(&mut self) -> Result<Vec<f64>, EnvError> {
        if self.split.is_empty() {
            return Err(EnvError::EmptySplit);
        }
        if self.stepped_since_reset {
            self.episode += 1;
            self.stepped_since_reset = false;
        }
        let mut rng = self.episode_rng();
        self.order = (0..self.split.len()).collect();
        if self.schedule.order == SampleOrder::Shuffled {
            self.order.shuffle(&mut rng);
        }
        let horizon = match self.schedule.vary_horizon {
            Some((lo, hi)) => rng.gen_range(lo..=hi),
            None => match self.schedule.horizon {
                Horizon::FullPass => self.split.len(),
                Horizon::Fixed(t) => t,
            },
        };
        self.episode_len = horizon.min(self.split.len());
        self.t = 0;
        self.done = false;
        Ok(self.split.records[self.order[0]].features.clone())
    }

    /// Score `action` against the current sample's hidden label, then advance.
    ///
    /// Returns `(next observation, reward, done)`. The reward always scores
    /// the observation returned by the previous `reset`/`step` call; the
    /// next observation does not depend on the action. When the split is
    /// exhausted the returned observation is all zeros (the `done` flag
    /// marks it as terminal filler).
    pub fn step(&mut self, action: usize) -> Result<(Vec<f64>, f64, bool), EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        if action >= self.split.num_classes {
            return Err(EnvError::ActionOutOfRange {
                action,
                num_classes: self.split.num_classes,
            });
        }
        let current = &self.split.records[self.order[self.t]];
        let reward = if action == current.label_code {
            self.scheme.correct_reward
        } else {
            self.scheme.incorrect_reward
        };
        self.stepped_since_reset = true;
        self.t += 1;
        self.done = self.t >= self.episode_len;
        let next_obs = if self.t < self.split.len() {
            self.split.records[self.order[self.t]].features.clone()
        } else {
            vec![0.0; self.split.dim]
        };
        Ok((next_obs, reward, self.done))
    }

    /// Hidden label of the sample the next `step` call will score.
    /// Intended for oracles and diagnostics, not for agents.
    pub fn current_label(&self) -> Option<usize> {
        if self.done || self.t >= self.episode_len {
            None
        } else {
            Some(self.split.records[self.order[self.t]].label_code)
        }
    }
}

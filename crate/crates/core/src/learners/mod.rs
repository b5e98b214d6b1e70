//! Value-decomposition learners (VDN and QMIX) with recurrent agents.

mod agent;
mod batch;
mod buffer;
mod learner;
mod mixer;
mod policy;

pub use agent::{AgentNetwork, AgentVars};
pub use batch::PaddedBatch;
pub use buffer::{Episode, ReplayBuffer};
pub use learner::{ActorState, Learner, TdReport};
pub use mixer::{vdn_mix, Mixer, MixerKind, QmixMixer};
pub use policy::{epsilon_greedy, greedy, EpsilonSchedule};

use crate::autodiff::{AutodiffError, RmsPropConfig};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("invalid trainer config: {0}")]
    InvalidConfig(String),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("episode has no steps")]
    EmptyEpisode,
    #[error("episode length {len} exceeds e_max {e_max}")]
    EpisodeTooLong { len: usize, e_max: usize },
    #[error("buffer holds {have} episodes, need {need}")]
    NotEnoughEpisodes { have: usize, need: usize },
    #[error("no legal action available")]
    NoLegalAction,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainerConfig {
    pub mixer: MixerKind,
    pub gamma: f64,
    /// Episodes per update.
    pub batch_size: usize,
    /// Environment steps between target syncs.
    pub target_update_interval: u64,
    pub epsilon: EpsilonSchedule,
    /// Minimum buffer size before updates; updates run while `|D| > learn_start`.
    pub learn_start: usize,
    pub buffer_capacity: usize,
    pub hidden: usize,
    pub mixing_embed: usize,
    pub hypernet_hidden: usize,
    pub optimizer: RmsPropConfig,
    /// Global gradient-norm clip; `0` disables clipping.
    pub grad_clip: f64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            mixer: MixerKind::Qmix,
            gamma: 0.99,
            batch_size: 32,
            target_update_interval: 200,
            epsilon: EpsilonSchedule::default(),
            learn_start: 32,
            buffer_capacity: 5000,
            hidden: 64,
            mixing_embed: 32,
            hypernet_hidden: 64,
            optimizer: RmsPropConfig::default(),
            grad_clip: 10.0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        let bad = |m: &str| Err(LearnerError::InvalidConfig(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.target_update_interval == 0 {
            return bad("target_update_interval must be positive");
        }
        let e = &self.epsilon;
        if !(0.0..=1.0).contains(&e.start) || !(0.0..=1.0).contains(&e.finish) {
            return bad("epsilon bounds must lie in [0, 1]");
        }
        if self.buffer_capacity < self.batch_size {
            return bad("buffer_capacity must be at least batch_size");
        }
        if self.hidden == 0 || self.mixing_embed == 0 || self.hypernet_hidden == 0 {
            return bad("layer widths must be positive");
        }
        let o = &self.optimizer;
        if !(o.lr > 0.0 && o.lr.is_finite() && (0.0..1.0).contains(&o.alpha) && o.eps > 0.0) {
            return bad("optimizer needs lr > 0, alpha in [0, 1), eps > 0");
        }
        if !(self.grad_clip >= 0.0) {
            return bad("grad_clip must be >= 0");
        }
        Ok(())
    }
}

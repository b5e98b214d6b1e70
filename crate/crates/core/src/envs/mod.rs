//! Dec-POMDP environments.
//!
//! Environments only signal natural termination. Truncation at the current
//! episode-length limit is the training loop's job.

mod chain;
mod mpp;

pub use chain::{ChainEnv, ChainEnvConfig};
pub use mpp::{Mpp, MppConfig, ACTION_CAPTURE, MPP_N_ACTIONS};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("expected {expected} actions, got {got}")]
    WrongActionCount { expected: usize, got: usize },
    #[error("action {action} of agent {agent} is out of range (n_actions = {n_actions})")]
    InvalidAction {
        agent: usize,
        action: usize,
        n_actions: usize,
    },
    #[error("agent id {0} out of range")]
    InvalidAgent(usize),
    #[error("step called on a finished episode; reset first")]
    EpisodeOver,
    #[error("step called before reset")]
    NotReset,
    #[error("step {0} exceeds the environment horizon")]
    HorizonExceeded(usize),
}

/// Static description of a Dec-POMDP instance.
#[derive(Clone, Debug, PartialEq)]
pub struct DecPomdpSpec {
    pub n_agents: usize,
    pub n_actions: usize,
    pub obs_dim: usize,
    pub state_dim: usize,
    pub gamma: f64,
    pub e_max: usize,
}

impl DecPomdpSpec {
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.n_agents < 1 {
            return Err(EnvError::InvalidConfig("n_agents must be >= 1".into()));
        }
        if self.n_actions < 2 {
            return Err(EnvError::InvalidConfig("n_actions must be >= 2".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(EnvError::InvalidConfig("gamma must lie in [0, 1)".into()));
        }
        if self.e_max < 1 {
            return Err(EnvError::InvalidConfig("e_max must be >= 1".into()));
        }
        Ok(())
    }
}

/// Global state plus one observation per agent.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub state: Vec<f64>,
    pub obs: Vec<Vec<f64>>,
}

/// Prey resolved during one MPP step.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CaptureInfo {
    /// Prey caught by two or more predators (removed).
    pub captured: Vec<usize>,
    /// Prey targeted by exactly one predator (penalised, not removed).
    pub solo: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    pub next_obs: Vec<Vec<f64>>,
    pub next_state: Vec<f64>,
    pub terminal: bool,
    pub info_capture: Option<CaptureInfo>,
}

pub trait MultiAgentEnv {
    fn spec(&self) -> &DecPomdpSpec;

    /// Start a new episode. The same seed always yields the same start.
    fn reset(&mut self, seed: u64) -> Observation;

    fn step(&mut self, actions: &[usize]) -> Result<StepResult, EnvError>;

    fn legal_actions(&self, agent: usize) -> Result<Vec<bool>, EnvError>;

    /// Whether the finished episode counts as a success (all prey caught,
    /// goal reached).
    fn is_success(&self) -> bool;
}

pub(crate) fn check_actions(spec: &DecPomdpSpec, actions: &[usize]) -> Result<(), EnvError> {
    if actions.len() != spec.n_agents {
        return Err(EnvError::WrongActionCount {
            expected: spec.n_agents,
            got: actions.len(),
        });
    }
    for (agent, &action) in actions.iter().enumerate() {
        if action >= spec.n_actions {
            return Err(EnvError::InvalidAction {
                agent,
                action,
                n_actions: spec.n_actions,
            });
        }
    }
    Ok(())
}

/// Environment choice as it appears in configuration files.
#[derive(Clone, Debug, PartialEq)]
pub enum EnvConfig {
    Mpp(MppConfig),
    Chain(ChainEnvConfig),
}

impl EnvConfig {
    pub fn build(&self) -> Result<Box<dyn MultiAgentEnv + Send>, EnvError> {
        Ok(match self {
            EnvConfig::Mpp(c) => Box::new(Mpp::new(c.clone())?),
            EnvConfig::Chain(c) => Box::new(ChainEnv::new(c.clone())?),
        })
    }

    pub fn e_max(&self) -> usize {
        match self {
            EnvConfig::Mpp(c) => c.e_max,
            EnvConfig::Chain(c) => c.horizon,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::Mpp(_) => "mpp",
            EnvConfig::Chain(_) => "chain",
        }
    }
}

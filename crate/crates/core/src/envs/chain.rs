//! Synthetic dead-end chain.
//!
//! One secure start state. At interaction step `l` (1-based) the team first
//! draws the goal lottery (probability `p_goal`) and, if it misses, the
//! dead-end lottery (probability `p_dead[l-1]`). Reaching the goal pays
//! `step_rewards[l-1] + r_goal`; a dead end pays nothing and ends the episode;
//! otherwise the step pays `step_rewards[l-1]`. Actions are labels only: the
//! lotteries are exogenous, so every policy has the same outcome law.

use super::{check_actions, DecPomdpSpec, EnvError, MultiAgentEnv, Observation, StepResult};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct ChainEnvConfig {
    pub n_agents: usize,
    pub n_actions: usize,
    pub horizon: usize,
    pub p_dead: Vec<f64>,
    pub p_goal: f64,
    pub r_goal: f64,
    pub step_rewards: Vec<f64>,
    pub gamma: f64,
}

impl ChainEnvConfig {
    /// Constant dead-end probability, zero step rewards.
    pub fn constant(horizon: usize, p_dead: f64, p_goal: f64, r_goal: f64) -> Self {
        Self {
            n_agents: 1,
            n_actions: 2,
            horizon,
            p_dead: vec![p_dead; horizon],
            p_goal,
            r_goal,
            step_rewards: vec![0.0; horizon],
            gamma: 0.99,
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::InvalidConfig(m.to_string()));
        let unit = |p: f64| (0.0..=1.0).contains(&p);
        if self.horizon < 1 {
            return bad("horizon must be >= 1");
        }
        if self.p_dead.len() != self.horizon || self.step_rewards.len() != self.horizon {
            return bad("p_dead and step_rewards must have one entry per step");
        }
        if !self.p_dead.iter().all(|&p| unit(p)) || !unit(self.p_goal) {
            return bad("probabilities must lie in [0, 1]");
        }
        Ok(())
    }
}

impl Default for ChainEnvConfig {
    fn default() -> Self {
        Self::constant(20, 0.05, 0.1, 10.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Secure,
    Goal,
    DeadEnd,
}

pub struct ChainEnv {
    cfg: ChainEnvConfig,
    spec: DecPomdpSpec,
    rng: ChaCha8Rng,
    step_idx: usize,
    phase: Phase,
    started: bool,
}

impl ChainEnv {
    pub fn new(cfg: ChainEnvConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        let spec = DecPomdpSpec {
            n_agents: cfg.n_agents,
            n_actions: cfg.n_actions,
            obs_dim: 2,
            state_dim: 3,
            gamma: cfg.gamma,
            e_max: cfg.horizon,
        };
        spec.validate()?;
        Ok(Self {
            cfg,
            spec,
            rng: ChaCha8Rng::seed_from_u64(0),
            step_idx: 0,
            phase: Phase::Secure,
            started: false,
        })
    }

    pub fn config(&self) -> &ChainEnvConfig {
        &self.cfg
    }

    /// Interaction steps taken in the current episode.
    pub fn interaction_step(&self) -> usize {
        self.step_idx
    }

    /// True while the team is not in a dead end (the goal counts as secure).
    pub fn is_secure(&self) -> bool {
        self.phase != Phase::DeadEnd
    }

    fn observe(&self) -> Observation {
        let t = self.step_idx as f64 / self.cfg.horizon as f64;
        let secure = if self.is_secure() { 1.0 } else { 0.0 };
        let goal = if self.phase == Phase::Goal { 1.0 } else { 0.0 };
        Observation {
            state: vec![t, secure, goal],
            obs: vec![vec![t, secure]; self.cfg.n_agents],
        }
    }
}

impl MultiAgentEnv for ChainEnv {
    fn spec(&self) -> &DecPomdpSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Observation {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.step_idx = 0;
        self.phase = Phase::Secure;
        self.started = true;
        self.observe()
    }

    fn step(&mut self, actions: &[usize]) -> Result<StepResult, EnvError> {
        if !self.started {
            return Err(EnvError::NotReset);
        }
        if self.phase != Phase::Secure {
            return Err(EnvError::EpisodeOver);
        }
        check_actions(&self.spec, actions)?;
        if self.step_idx >= self.cfg.horizon {
            return Err(EnvError::HorizonExceeded(self.step_idx + 1));
        }
        let l = self.step_idx;
        self.step_idx += 1;
        let goal_draw: f64 = self.rng.gen();
        let dead_draw: f64 = self.rng.gen();
        let reward = if goal_draw < self.cfg.p_goal {
            self.phase = Phase::Goal;
            self.cfg.step_rewards[l] + self.cfg.r_goal
        } else if dead_draw < self.cfg.p_dead[l] {
            self.phase = Phase::DeadEnd;
            0.0
        } else {
            self.cfg.step_rewards[l]
        };
        let ob = self.observe();
        Ok(StepResult {
            reward,
            next_obs: ob.obs,
            next_state: ob.state,
            terminal: self.phase != Phase::Secure,
            info_capture: None,
        })
    }

    fn legal_actions(&self, agent: usize) -> Result<Vec<bool>, EnvError> {
        if agent >= self.cfg.n_agents {
            return Err(EnvError::InvalidAgent(agent));
        }
        Ok(vec![true; self.cfg.n_actions])
    }

    fn is_success(&self) -> bool {
        self.phase == Phase::Goal
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_starts_secure_at_step_zero() {
        let mut env = ChainEnv::new(ChainEnvConfig::default()).unwrap();
        for seed in [0, 5, 99] {
            let ob = env.reset(seed);
            assert_eq!(env.interaction_step(), 0);
            assert!(env.is_secure());
            assert_eq!(ob.state, vec![0.0, 1.0, 0.0]);
        }
    }

    #[test]
    fn certain_dead_end_terminates_with_zero_reward() {
        let mut env = ChainEnv::new(ChainEnvConfig::constant(5, 1.0, 0.0, 10.0)).unwrap();
        env.reset(1);
        let r = env.step(&[0]).unwrap();
        assert!(r.terminal);
        assert_eq!(r.reward, 0.0);
        assert!(!env.is_secure());
        assert!(!env.is_success());
        assert_eq!(env.step(&[0]), Err(EnvError::EpisodeOver));
    }

    #[test]
    fn certain_goal_pays_goal_reward() {
        let mut cfg = ChainEnvConfig::constant(5, 0.0, 1.0, 10.0);
        cfg.step_rewards = vec![1.0; 5];
        let mut env = ChainEnv::new(cfg).unwrap();
        env.reset(1);
        let r = env.step(&[1]).unwrap();
        assert_eq!(r.reward, 11.0);
        assert!(r.terminal && env.is_success());
    }

    #[test]
    fn horizon_is_enforced() {
        let mut env = ChainEnv::new(ChainEnvConfig::constant(2, 0.0, 0.0, 10.0)).unwrap();
        env.reset(0);
        env.step(&[0]).unwrap();
        env.step(&[1]).unwrap();
        assert_eq!(env.step(&[0]), Err(EnvError::HorizonExceeded(3)));
    }

    #[test]
    fn both_actions_always_legal() {
        let mut env = ChainEnv::new(ChainEnvConfig::default()).unwrap();
        env.reset(0);
        assert_eq!(env.legal_actions(0).unwrap(), vec![true, true]);
        assert!(env.legal_actions(1).is_err());
        assert!(matches!(env.step(&[2]), Err(EnvError::InvalidAction { .. })));
    }

    #[test]
    fn rejects_invalid_probabilities() {
        let mut cfg = ChainEnvConfig::default();
        cfg.p_dead[3] = 1.5;
        assert!(ChainEnv::new(cfg).is_err());
        let mut cfg = ChainEnvConfig::default();
        cfg.step_rewards.pop();
        assert!(ChainEnv::new(cfg).is_err());
    }
}

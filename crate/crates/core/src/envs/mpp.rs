//! Modified predator-prey on a toroidal grid.
//!
//! Predators move (stay/N/S/E/W) or attempt a capture. A capture attempt
//! targets the lowest-index live prey within Manhattan distance 1 (wrapping).
//! Per prey and step: two or more capturing predators give `capture_reward`
//! and remove the prey, a single one gives `penalty`, otherwise nothing.
//! Captures resolve on pre-move positions; predators then move, then every
//! live prey takes a uniformly random move.

use super::{check_actions, CaptureInfo, DecPomdpSpec, EnvError, MultiAgentEnv, Observation, StepResult};
use rand::{seq::index::sample, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MPP_N_ACTIONS: usize = 6;
pub const ACTION_CAPTURE: usize = 5;

/// Row/column offsets for actions 0..=4 (stay, N, S, E, W).
const MOVES: [(isize, isize); 5] = [(0, 0), (-1, 0), (1, 0), (0, 1), (0, -1)];

#[derive(Clone, Debug, PartialEq)]
pub struct MppConfig {
    pub grid_size: usize,
    pub n_predators: usize,
    pub n_prey: usize,
    pub penalty: f64,
    pub obs_radius: usize,
    pub capture_reward: f64,
    pub e_max: usize,
    pub gamma: f64,
}

impl Default for MppConfig {
    fn default() -> Self {
        Self {
            grid_size: 7,
            n_predators: 4,
            n_prey: 4,
            penalty: -2.0,
            obs_radius: 2,
            capture_reward: 10.0,
            e_max: 100,
            gamma: 0.99,
        }
    }
}

impl MppConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::InvalidConfig(m.to_string()));
        if self.grid_size < 3 {
            return bad("grid_size must be >= 3");
        }
        if self.n_predators < 2 {
            return bad("n_predators must be >= 2");
        }
        if self.n_prey < 1 {
            return bad("n_prey must be >= 1");
        }
        if self.n_predators + self.n_prey > self.grid_size * self.grid_size {
            return bad("more animals than grid cells");
        }
        if !(self.penalty <= 0.0) {
            return bad("penalty must be <= 0");
        }
        if !(self.capture_reward > 0.0) {
            return bad("capture_reward must be > 0");
        }
        Ok(())
    }

    fn view_side(&self) -> usize {
        2 * self.obs_radius + 1
    }
}

pub struct Mpp {
    cfg: MppConfig,
    spec: DecPomdpSpec,
    rng: ChaCha8Rng,
    predators: Vec<(usize, usize)>,
    prey: Vec<Option<(usize, usize)>>,
    started: bool,
    done: bool,
}

impl Mpp {
    pub fn new(cfg: MppConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        let side = cfg.view_side();
        let spec = DecPomdpSpec {
            n_agents: cfg.n_predators,
            n_actions: MPP_N_ACTIONS,
            obs_dim: 2 * side * side,
            state_dim: 2 * cfg.grid_size * cfg.grid_size,
            gamma: cfg.gamma,
            e_max: cfg.e_max,
        };
        spec.validate()?;
        Ok(Self {
            cfg,
            spec,
            rng: ChaCha8Rng::seed_from_u64(0),
            predators: Vec::new(),
            prey: Vec::new(),
            started: false,
            done: false,
        })
    }

    pub fn config(&self) -> &MppConfig {
        &self.cfg
    }

    pub fn predator_positions(&self) -> &[(usize, usize)] {
        &self.predators
    }

    pub fn prey_positions(&self) -> &[Option<(usize, usize)>] {
        &self.prey
    }

    /// Place animals explicitly (testing and scripted scenarios).
    pub fn set_positions(&mut self, predators: Vec<(usize, usize)>, prey: Vec<Option<(usize, usize)>>) -> Result<Observation, EnvError> {
        let g = self.cfg.grid_size;
        if predators.len() != self.cfg.n_predators || prey.len() != self.cfg.n_prey {
            return Err(EnvError::InvalidConfig("position counts do not match config".into()));
        }
        let in_grid = |&(r, c): &(usize, usize)| r < g && c < g;
        if !predators.iter().all(in_grid) || !prey.iter().flatten().all(in_grid) {
            return Err(EnvError::InvalidConfig("position outside grid".into()));
        }
        self.predators = predators;
        self.prey = prey;
        self.started = true;
        self.done = self.prey.iter().all(Option::is_none);
        Ok(self.observe())
    }

    fn shift(&self, pos: (usize, usize), delta: (isize, isize)) -> (usize, usize) {
        let g = self.cfg.grid_size as isize;
        let r = (pos.0 as isize + delta.0).rem_euclid(g) as usize;
        let c = (pos.1 as isize + delta.1).rem_euclid(g) as usize;
        (r, c)
    }

    fn torus_dist(&self, a: (usize, usize), b: (usize, usize)) -> usize {
        let g = self.cfg.grid_size;
        let d = |x: usize, y: usize| {
            let d = x.abs_diff(y);
            d.min(g - d)
        };
        d(a.0, b.0) + d(a.1, b.1)
    }

    fn capture_target(&self, pos: (usize, usize)) -> Option<usize> {
        self.prey
            .iter()
            .enumerate()
            .find(|(_, p)| matches!(p, Some(q) if self.torus_dist(pos, *q) <= 1))
            .map(|(k, _)| k)
    }

    fn state_vector(&self) -> Vec<f64> {
        let g = self.cfg.grid_size;
        let mut s = vec![0.0; 2 * g * g];
        for &(r, c) in &self.predators {
            s[r * g + c] += 1.0;
        }
        for &(r, c) in self.prey.iter().flatten() {
            s[g * g + r * g + c] = 1.0;
        }
        s
    }

    fn agent_view(&self, agent: usize) -> Vec<f64> {
        let side = self.cfg.view_side();
        let rad = self.cfg.obs_radius as isize;
        let me = self.predators[agent];
        let mut v = vec![0.0; 2 * side * side];
        for (j, &p) in self.predators.iter().enumerate() {
            if j == agent {
                continue;
            }
            for (dr, dc) in self.offsets_within_view(me, p, rad) {
                v[dr * side + dc] += 1.0;
            }
        }
        for &p in self.prey.iter().flatten() {
            for (dr, dc) in self.offsets_within_view(me, p, rad) {
                v[side * side + dr * side + dc] = 1.0;
            }
        }
        v
    }

    /// View cells (row, col in 0..side) where `target` appears around `center`.
    /// On small grids a cell may appear more than once.
    fn offsets_within_view(&self, center: (usize, usize), target: (usize, usize), rad: isize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for dr in -rad..=rad {
            for dc in -rad..=rad {
                if self.shift(center, (dr, dc)) == target {
                    out.push(((dr + rad) as usize, (dc + rad) as usize));
                }
            }
        }
        out
    }

    fn observe(&self) -> Observation {
        Observation {
            state: self.state_vector(),
            obs: (0..self.cfg.n_predators).map(|i| self.agent_view(i)).collect(),
        }
    }
}

impl MultiAgentEnv for Mpp {
    fn spec(&self) -> &DecPomdpSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Observation {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let g = self.cfg.grid_size;
        let n_pred = self.cfg.n_predators;
        let cells = sample(&mut self.rng, g * g, n_pred + self.cfg.n_prey).into_vec();
        let to_pos = |k: usize| (k / g, k % g);
        self.predators = cells[..n_pred].iter().map(|&k| to_pos(k)).collect();
        self.prey = cells[n_pred..].iter().map(|&k| Some(to_pos(k))).collect();
        self.started = true;
        self.done = false;
        self.observe()
    }

    fn step(&mut self, actions: &[usize]) -> Result<StepResult, EnvError> {
        if !self.started {
            return Err(EnvError::NotReset);
        }
        if self.done {
            return Err(EnvError::EpisodeOver);
        }
        check_actions(&self.spec, actions)?;

        let mut hunters = vec![0usize; self.prey.len()];
        for (i, &a) in actions.iter().enumerate() {
            if a == ACTION_CAPTURE {
                if let Some(k) = self.capture_target(self.predators[i]) {
                    hunters[k] += 1;
                }
            }
        }
        let mut reward = 0.0;
        let mut info = CaptureInfo::default();
        for (k, &n) in hunters.iter().enumerate() {
            if n >= 2 {
                reward += self.cfg.capture_reward;
                self.prey[k] = None;
                info.captured.push(k);
            } else if n == 1 {
                reward += self.cfg.penalty;
                info.solo.push(k);
            }
        }

        for (i, &a) in actions.iter().enumerate() {
            if a != ACTION_CAPTURE {
                self.predators[i] = self.shift(self.predators[i], MOVES[a]);
            }
        }
        for k in 0..self.prey.len() {
            if let Some(p) = self.prey[k] {
                let m = self.rng.gen_range(0..MOVES.len());
                self.prey[k] = Some(self.shift(p, MOVES[m]));
            }
        }

        self.done = self.prey.iter().all(Option::is_none);
        let ob = self.observe();
        let any_event = !info.captured.is_empty() || !info.solo.is_empty();
        Ok(StepResult {
            reward,
            next_obs: ob.obs,
            next_state: ob.state,
            terminal: self.done,
            info_capture: any_event.then_some(info),
        })
    }

    fn legal_actions(&self, agent: usize) -> Result<Vec<bool>, EnvError> {
        if agent >= self.cfg.n_predators {
            return Err(EnvError::InvalidAgent(agent));
        }
        // No walls on a torus and capture is always allowed (it may miss).
        Ok(vec![true; MPP_N_ACTIONS])
    }

    fn is_success(&self) -> bool {
        self.started && self.prey.iter().all(Option::is_none)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Mpp {
        Mpp::new(MppConfig {
            grid_size: 5,
            n_predators: 2,
            n_prey: 1,
            penalty: -2.0,
            ..MppConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn reset_is_deterministic() {
        let mut a = Mpp::new(MppConfig::default()).unwrap();
        let mut b = Mpp::new(MppConfig::default()).unwrap();
        assert_eq!(a.reset(7), b.reset(7));
        assert_eq!(a.predator_positions(), b.predator_positions());
    }

    #[test]
    fn reset_matches_replayed_rng_stream() {
        // Oracle: replay the documented placement procedure on each seed's stream.
        let cfg = MppConfig::default();
        let g = cfg.grid_size;
        let oracle = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample(&mut rng, g * g, cfg.n_predators + cfg.n_prey).into_vec()
        };
        let mut env = Mpp::new(cfg.clone()).unwrap();
        for seed in [7u64, 8] {
            env.reset(seed);
            let cells = oracle(seed);
            let got: Vec<usize> = env
                .predator_positions()
                .iter()
                .map(|&(r, c)| r * g + c)
                .chain(env.prey_positions().iter().flatten().map(|&(r, c)| r * g + c))
                .collect();
            assert_eq!(got, cells);
        }
        assert_ne!(oracle(7), oracle(8));
    }

    #[test]
    fn cooperative_capture_pays_and_removes_prey() {
        let mut env = small();
        env.set_positions(vec![(1, 2), (3, 2)], vec![Some((2, 2))]).unwrap();
        let r = env.step(&[ACTION_CAPTURE, ACTION_CAPTURE]).unwrap();
        assert_eq!(r.reward, 10.0);
        assert!(r.terminal);
        assert!(env.prey_positions()[0].is_none());
        assert_eq!(r.info_capture.unwrap().captured, vec![0]);
        assert!(env.is_success());
        assert_eq!(env.step(&[0, 0]), Err(EnvError::EpisodeOver));
    }

    #[test]
    fn solo_capture_is_penalised() {
        let mut env = small();
        env.set_positions(vec![(1, 2), (4, 4)], vec![Some((2, 2))]).unwrap();
        let r = env.step(&[ACTION_CAPTURE, 0]).unwrap();
        assert_eq!(r.reward, -2.0);
        assert!(!r.terminal);
        assert!(env.prey_positions()[0].is_some());
    }

    #[test]
    fn no_capture_attempt_gives_zero() {
        let mut env = small();
        env.set_positions(vec![(1, 2), (3, 2)], vec![Some((2, 2))]).unwrap();
        let r = env.step(&[1, 2]).unwrap();
        assert_eq!(r.reward, 0.0);
        assert!(r.info_capture.is_none());
    }

    #[test]
    fn capture_wraps_around_the_torus() {
        let mut env = small();
        env.set_positions(vec![(0, 0), (0, 1)], vec![Some((4, 0))]).unwrap();
        let r = env.step(&[ACTION_CAPTURE, ACTION_CAPTURE]).unwrap();
        // Predator 1 at (0,1) is at distance 2 from (4,0): only a solo attempt.
        assert_eq!(r.reward, -2.0);
    }

    #[test]
    fn rejects_bad_actions_and_agents() {
        let mut env = small();
        assert_eq!(env.step(&[0, 0]), Err(EnvError::NotReset));
        env.reset(1);
        assert!(matches!(env.step(&[6, 0]), Err(EnvError::InvalidAction { .. })));
        assert!(matches!(env.step(&[0]), Err(EnvError::WrongActionCount { .. })));
        assert_eq!(env.legal_actions(2), Err(EnvError::InvalidAgent(2)));
        assert_eq!(env.legal_actions(0).unwrap(), vec![true; 6]);
    }

    #[test]
    fn observation_shapes() {
        let mut env = Mpp::new(MppConfig::default()).unwrap();
        let ob = env.reset(3);
        assert_eq!(ob.obs.len(), 4);
        assert!(ob.obs.iter().all(|o| o.len() == env.spec().obs_dim));
        assert_eq!(ob.state.len(), env.spec().state_dim);
        // Four prey on the state map, four predators counted.
        let g2 = 49;
        assert_eq!(ob.state[..g2].iter().sum::<f64>(), 4.0);
        assert_eq!(ob.state[g2..].iter().sum::<f64>(), 4.0);
    }

    #[test]
    fn config_validation() {
        let bad = |f: fn(&mut MppConfig)| {
            let mut c = MppConfig::default();
            f(&mut c);
            Mpp::new(c).is_err()
        };
        assert!(bad(|c| c.grid_size = 2));
        assert!(bad(|c| c.n_predators = 1));
        assert!(bad(|c| c.penalty = 1.0));
        assert!(bad(|c| c.capture_reward = 0.0));
        assert!(bad(|c| c.n_prey = 60));
    }
}

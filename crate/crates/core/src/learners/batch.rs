use super::{Episode, LearnerError};

/// Episodes padded to a common horizon, stored time-major.
///
/// With `T` steps: `obs`, `states` and `legal` carry `T + 1` entries per
/// episode (the extra one is the post-step situation used for bootstrapping);
/// `actions`, `rewards`, `terminated` and `filled` carry `T`. Positions past
/// an episode's length hold padding values that never reach the loss.
#[derive(Clone, Debug, PartialEq)]
pub struct PaddedBatch {
    pub batch: usize,
    pub time: usize,
    pub n_agents: usize,
    pub n_actions: usize,
    pub obs_dim: usize,
    pub state_dim: usize,
    pub lens: Vec<usize>,
    /// `[(T+1) x B x I x obs_dim]`
    pub obs: Vec<f64>,
    /// `[(T+1) x B x state_dim]`
    pub states: Vec<f64>,
    /// `[(T+1) x B x I x A]`
    pub legal: Vec<bool>,
    /// `[T x B x I]`
    pub actions: Vec<usize>,
    /// `[T x B]`
    pub rewards: Vec<f64>,
    /// `[T x B]`
    pub terminated: Vec<bool>,
    /// `[T x B]`
    pub filled: Vec<bool>,
}

impl PaddedBatch {
    /// Pad to the longest episode, or to `pad_to` when that is larger.
    pub fn new(episodes: &[&Episode], n_agents: usize, n_actions: usize, pad_to: Option<usize>) -> Result<Self, LearnerError> {
        let first = episodes.first().ok_or(LearnerError::EmptyBatch)?;
        let obs_dim = first.obs[0].first().map_or(0, Vec::len);
        let state_dim = first.states[0].len();
        let longest = episodes.iter().map(|e| e.len()).max().unwrap_or(0);
        let time = pad_to.map_or(longest, |p| p.max(longest));
        let b_n = episodes.len();
        let (i_n, a_n) = (n_agents, n_actions);

        let mut pb = Self {
            batch: b_n,
            time,
            n_agents,
            n_actions,
            obs_dim,
            state_dim,
            lens: episodes.iter().map(|e| e.len()).collect(),
            obs: vec![0.0; (time + 1) * b_n * i_n * obs_dim],
            states: vec![0.0; (time + 1) * b_n * state_dim],
            legal: vec![false; (time + 1) * b_n * i_n * a_n],
            actions: vec![0; time * b_n * i_n],
            rewards: vec![0.0; time * b_n],
            terminated: vec![false; time * b_n],
            filled: vec![false; time * b_n],
        };

        for (b, ep) in episodes.iter().enumerate() {
            let len = ep.len();
            if len == 0 {
                return Err(LearnerError::EmptyEpisode);
            }
            let consistent = ep.states.len() == len + 1 && ep.obs.len() == len + 1 && ep.legal.len() == len + 1 && ep.rewards.len() == len && ep.terminated.len() == len;
            if !consistent {
                return Err(LearnerError::Shape(format!("episode {b} has inconsistent field lengths")));
            }
            for t in 0..=len {
                if ep.states[t].len() != state_dim {
                    return Err(LearnerError::Shape(format!("state width {} != {state_dim}", ep.states[t].len())));
                }
                let s0 = (t * b_n + b) * state_dim;
                pb.states[s0..s0 + state_dim].copy_from_slice(&ep.states[t]);
                if ep.obs[t].len() != i_n || ep.legal[t].len() != i_n {
                    return Err(LearnerError::Shape(format!("expected {i_n} agents at step {t}")));
                }
                for i in 0..i_n {
                    if ep.obs[t][i].len() != obs_dim || ep.legal[t][i].len() != a_n {
                        return Err(LearnerError::Shape(format!("agent {i} observation/legal width at step {t}")));
                    }
                    let o0 = ((t * b_n + b) * i_n + i) * obs_dim;
                    pb.obs[o0..o0 + obs_dim].copy_from_slice(&ep.obs[t][i]);
                    let l0 = ((t * b_n + b) * i_n + i) * a_n;
                    pb.legal[l0..l0 + a_n].copy_from_slice(&ep.legal[t][i]);
                }
            }
            for t in 0..len {
                if ep.actions[t].len() != i_n {
                    return Err(LearnerError::Shape(format!("expected {i_n} actions at step {t}")));
                }
                for (i, &a) in ep.actions[t].iter().enumerate() {
                    if a >= a_n {
                        return Err(LearnerError::Shape(format!("action {a} out of range at step {t}")));
                    }
                    pb.actions[(t * b_n + b) * i_n + i] = a;
                }
                pb.rewards[t * b_n + b] = ep.rewards[t];
                pb.terminated[t * b_n + b] = ep.terminated[t];
                pb.filled[t * b_n + b] = true;
            }
        }
        Ok(pb)
    }

    pub fn obs(&self, t: usize, b: usize, i: usize) -> &[f64] {
        let o0 = ((t * self.batch + b) * self.n_agents + i) * self.obs_dim;
        &self.obs[o0..o0 + self.obs_dim]
    }

    pub fn state(&self, t: usize, b: usize) -> &[f64] {
        let s0 = (t * self.batch + b) * self.state_dim;
        &self.states[s0..s0 + self.state_dim]
    }

    pub fn legal(&self, t: usize, b: usize, i: usize) -> &[bool] {
        let l0 = ((t * self.batch + b) * self.n_agents + i) * self.n_actions;
        &self.legal[l0..l0 + self.n_actions]
    }

    pub fn action(&self, t: usize, b: usize, i: usize) -> usize {
        self.actions[(t * self.batch + b) * self.n_agents + i]
    }

    /// Whether entry `t` of the `T + 1` observation slots is real data.
    pub fn obs_filled(&self, t: usize, b: usize) -> bool {
        t <= self.lens[b]
    }

    /// The filled mask in `(batch, time)` layout.
    pub fn filled_batch_major(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.batch * self.time);
        for b in 0..self.batch {
            out.extend((0..self.time).map(|t| self.filled[t * self.batch + b]));
        }
        out
    }

    pub fn filled_count(&self) -> usize {
        self.filled.iter().filter(|&&f| f).count()
    }
}

use super::{epsilon_greedy, AgentNetwork, LearnerError, Mixer, MixerKind, PaddedBatch, QmixMixer, TrainerConfig};
use crate::aela::QValueBatch;
use crate::autodiff::{clip_grad_norm, AutodiffError, Gradients, ParamStore, RmsProp, Tape, Tensor, Var};
use crate::envs::DecPomdpSpec;
use rand::Rng;
use sha2::{Digest, Sha256};

/// Per-episode recurrent state of all agents during acting.
#[derive(Clone, Debug, PartialEq)]
pub struct ActorState {
    /// `n_agents x hidden`, row-major.
    pub hidden: Vec<f64>,
    pub last_actions: Option<Vec<usize>>,
}

/// Outcome of one TD update.
#[derive(Clone, Debug, PartialEq)]
pub struct TdReport {
    pub loss: f64,
    /// Gradient norm before clipping.
    pub grad_norm: f64,
    /// Online utilities computed during the update, before the parameter step.
    pub q_values: QValueBatch,
    /// `(batch, time)` filled mask matching `q_values`.
    pub filled: Vec<bool>,
}

/// Online and target networks, the mixer and the optimizer state.
#[derive(Clone, Debug)]
pub struct Learner {
    config: TrainerConfig,
    agent: AgentNetwork,
    mixer: Mixer,
    params: ParamStore,
    target: ParamStore,
    optimizer: RmsProp,
    state_dim: usize,
    updates: u64,
    syncs: u64,
}

impl Learner {
    pub fn new<R: Rng + ?Sized>(spec: &DecPomdpSpec, config: TrainerConfig, rng: &mut R) -> Result<Self, LearnerError> {
        config.validate()?;
        let mut params = ParamStore::new();
        let agent = AgentNetwork::new(&mut params, spec.obs_dim, spec.n_actions, spec.n_agents, config.hidden, rng);
        let mixer = match config.mixer {
            MixerKind::Vdn => Mixer::Vdn { n_agents: spec.n_agents },
            MixerKind::Qmix => Mixer::Qmix(QmixMixer::new(
                &mut params,
                spec.n_agents,
                spec.state_dim,
                config.mixing_embed,
                config.hypernet_hidden,
                rng,
            )),
        };
        let optimizer = RmsProp::new(config.optimizer, &params);
        Ok(Self {
            target: params.clone(),
            params,
            agent,
            mixer,
            optimizer,
            config,
            state_dim: spec.state_dim,
            updates: 0,
            syncs: 0,
        })
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn agent(&self) -> &AgentNetwork {
        &self.agent
    }

    pub fn mixer(&self) -> &Mixer {
        &self.mixer
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn target_params(&self) -> &ParamStore {
        &self.target
    }

    pub fn target_params_mut(&mut self) -> &mut ParamStore {
        &mut self.target
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn syncs(&self) -> u64 {
        self.syncs
    }

    pub fn n_agents(&self) -> usize {
        self.agent.n_agents
    }

    pub fn n_actions(&self) -> usize {
        self.agent.n_actions
    }

    /// Hard copy of the online parameters into the target networks.
    pub fn sync_targets(&mut self) {
        self.target.copy_from(&self.params);
        self.syncs += 1;
    }

    pub fn start_episode(&self) -> ActorState {
        ActorState {
            hidden: vec![0.0; self.agent.n_agents * self.agent.hidden],
            last_actions: None,
        }
    }

    /// Online utilities of every agent for one step; advances the hidden state.
    pub fn q_values(&self, actor: &mut ActorState, obs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, LearnerError> {
        let (n, h) = (self.agent.n_agents, self.agent.hidden);
        if obs.len() != n {
            return Err(LearnerError::Shape(format!("{} observations for {n} agents", obs.len())));
        }
        let mut rows = Vec::with_capacity(n * self.agent.input_dim());
        for (i, o) in obs.iter().enumerate() {
            if o.len() != self.agent.obs_dim {
                return Err(LearnerError::Shape(format!("observation width {} != {}", o.len(), self.agent.obs_dim)));
            }
            self.agent.input_row(o, actor.last_actions.as_ref().map(|a| a[i]), i, &mut rows);
        }
        let mut tape = Tape::new();
        let p = self.agent.load(&mut tape, &self.params, false);
        let x = tape.constant(Tensor::new([n, self.agent.input_dim()], rows)?);
        let hid = tape.constant(Tensor::new([n, h], std::mem::take(&mut actor.hidden))?);
        let (q, h_new) = self.agent.step(&mut tape, &p, x, hid)?;
        actor.hidden = tape.value(h_new).data().to_vec();
        Ok(tape.value(q).data().chunks(self.agent.n_actions).map(<[f64]>::to_vec).collect())
    }

    /// Epsilon-greedy joint action; records it as the agents' last action.
    pub fn act<R: Rng + ?Sized>(&self, actor: &mut ActorState, obs: &[Vec<f64>], legal: &[Vec<bool>], epsilon: f64, rng: &mut R) -> Result<Vec<usize>, LearnerError> {
        let qs = self.q_values(actor, obs)?;
        if legal.len() != qs.len() {
            return Err(LearnerError::Shape(format!("{} legal masks for {} agents", legal.len(), qs.len())));
        }
        let actions = qs.iter().zip(legal).map(|(q, l)| epsilon_greedy(q, epsilon, l, rng)).collect::<Result<Vec<_>, _>>()?;
        actor.last_actions = Some(actions.clone());
        Ok(actions)
    }

    /// Run the agent network over `steps` slots of the batch. Returns the
    /// `(B*I) x A` utilities of each slot.
    fn unroll<'a>(&self, tape: &mut Tape<'a>, store: &'a ParamStore, trainable: bool, pb: &PaddedBatch, steps: usize) -> Result<Vec<Var>, AutodiffError> {
        let (b_n, i_n) = (pb.batch, pb.n_agents);
        let rows = b_n * i_n;
        let p = self.agent.load(tape, store, trainable);
        let mut hidden = tape.constant(Tensor::zeros([rows, self.agent.hidden]));
        let mut out = Vec::with_capacity(steps);
        let mut buf = Vec::with_capacity(rows * self.agent.input_dim());
        for t in 0..steps {
            buf.clear();
            for b in 0..b_n {
                for i in 0..i_n {
                    let last = (t > 0).then(|| pb.action(t - 1, b, i));
                    self.agent.input_row(pb.obs(t, b, i), last, i, &mut buf);
                }
            }
            let x = tape.constant(Tensor::new([rows, self.agent.input_dim()], buf.clone())?);
            let (q, h) = self.agent.step(tape, &p, x, hidden)?;
            hidden = h;
            out.push(q);
        }
        Ok(out)
    }

    /// TD targets `r + gamma * (1 - terminal) * Qbar(s')` in `(time, batch)`
    /// order, where `Qbar` mixes each agent's best legal target utility.
    /// Unfilled slots are zero.
    pub fn targets(&self, pb: &PaddedBatch) -> Result<Vec<f64>, LearnerError> {
        let (t_n, b_n, i_n, a_n) = (pb.time, pb.batch, pb.n_agents, pb.n_actions);
        let mut tape = Tape::new();
        let qs = self.unroll(&mut tape, &self.target, false, pb, t_n + 1)?;
        let mut best = vec![0.0; t_n * b_n * i_n];
        for t in 0..t_n {
            let q = tape.value(qs[t + 1]);
            for b in 0..b_n {
                let k = t * b_n + b;
                if !pb.filled[k] || pb.terminated[k] {
                    continue;
                }
                for i in 0..i_n {
                    let row = &q.data()[(b * i_n + i) * a_n..(b * i_n + i + 1) * a_n];
                    let m = row
                        .iter()
                        .zip(pb.legal(t + 1, b, i))
                        .filter(|(_, &l)| l)
                        .map(|(&v, _)| v)
                        .fold(f64::NEG_INFINITY, f64::max);
                    if m == f64::NEG_INFINITY {
                        return Err(LearnerError::NoLegalAction);
                    }
                    best[k * i_n + i] = m;
                }
            }
        }
        let s = pb.state_dim;
        let best = tape.constant(Tensor::new([t_n * b_n, i_n], best)?);
        let next_states = tape.constant(Tensor::new([t_n * b_n, s], pb.states[b_n * s..].to_vec())?);
        let qbar = self.mixer.forward(&mut tape, &self.target, false, best, next_states)?;
        let qbar = tape.value(qbar).data();
        let gamma = self.config.gamma;
        Ok((0..t_n * b_n)
            .map(|k| match (pb.filled[k], pb.terminated[k]) {
                (false, _) => 0.0,
                (true, true) => pb.rewards[k],
                (true, false) => pb.rewards[k] + gamma * qbar[k],
            })
            .collect())
    }

    /// Masked mean squared TD error over filled steps, its gradients, and the
    /// online utilities, without touching any parameters.
    pub fn td_loss(&self, pb: &PaddedBatch) -> Result<(f64, Gradients, QValueBatch), LearnerError> {
        if pb.state_dim != self.state_dim || pb.n_agents != self.agent.n_agents || pb.n_actions != self.agent.n_actions || pb.obs_dim != self.agent.obs_dim {
            return Err(LearnerError::Shape("batch dimensions do not match the learner".into()));
        }
        let n_filled = pb.filled_count();
        if pb.batch == 0 || n_filled == 0 {
            return Err(LearnerError::EmptyBatch);
        }
        let y = self.targets(pb)?;
        let (t_n, b_n, i_n, a_n) = (pb.time, pb.batch, pb.n_agents, pb.n_actions);

        let mut tape = Tape::new();
        let qs = self.unroll(&mut tape, &self.params, true, pb, t_n)?;
        let mut chosen = Vec::with_capacity(t_n);
        for (t, &q) in qs.iter().enumerate() {
            let idx = &pb.actions[t * b_n * i_n..(t + 1) * b_n * i_n];
            chosen.push(tape.gather(q, idx)?);
        }
        let chosen = tape.concat_rows(&chosen)?;
        let chosen = tape.reshape(chosen, [t_n * b_n, i_n])?;
        let s = pb.state_dim;
        let states = tape.constant(Tensor::new([t_n * b_n, s], pb.states[..t_n * b_n * s].to_vec())?);
        let q_tot = self.mixer.forward(&mut tape, &self.params, true, chosen, states)?;
        let y = tape.constant(Tensor::new([t_n * b_n, 1], y)?);
        let err = tape.sub(q_tot, y)?;
        let sq = tape.square(err);
        let mask: Vec<f64> = pb.filled.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect();
        let total = tape.masked_sum(sq, &mask)?;
        let loss = tape.scale(total, 1.0 / n_filled as f64);
        let loss_value = tape.value(loss).data()[0];
        if !loss_value.is_finite() {
            return Err(LearnerError::Diverged(format!("loss is {loss_value}")));
        }
        let grads = tape.backward(loss, &self.params)?;

        let mut values = vec![0.0; b_n * t_n * i_n * a_n];
        for (t, &q) in qs.iter().enumerate() {
            let q = tape.value(q).data();
            for b in 0..b_n {
                let src = &q[b * i_n * a_n..(b + 1) * i_n * a_n];
                let off = (b * t_n + t) * i_n * a_n;
                values[off..off + i_n * a_n].copy_from_slice(src);
            }
        }
        let qv = QValueBatch {
            batch: b_n,
            time: t_n,
            agents: i_n,
            actions: a_n,
            values,
        };
        Ok((loss_value, grads, qv))
    }

    /// One optimizer step on the online agent and mixer parameters.
    pub fn td_update(&mut self, pb: &PaddedBatch) -> Result<TdReport, LearnerError> {
        let (loss, mut grads, q_values) = self.td_loss(pb)?;
        let max = if self.config.grad_clip > 0.0 { self.config.grad_clip } else { f64::INFINITY };
        let grad_norm = clip_grad_norm(&mut grads, max);
        if !grad_norm.is_finite() {
            return Err(LearnerError::Diverged(format!("gradient norm is {grad_norm}")));
        }
        self.optimizer.step(&mut self.params, &grads).map_err(|e| LearnerError::Diverged(e.to_string()))?;
        self.updates += 1;
        Ok(TdReport {
            loss,
            grad_norm,
            q_values,
            filled: pb.filled_batch_major(),
        })
    }

    /// SHA-256 over the bit patterns of every online and target parameter.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for store in [&self.params, &self.target] {
            for t in store.values() {
                for v in t.data() {
                    h.update(v.to_bits().to_le_bytes());
                }
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

//! Value-decomposition mixers.
//!
//! VDN sums the chosen per-agent utilities. QMIX feeds them through a
//! two-layer mixing network whose weights are produced from the global state
//! by hypernetworks and passed through `abs`, so the joint value is monotone
//! non-decreasing in every agent's utility.

use crate::autodiff::{AutodiffError, ParamId, ParamStore, Tape, Tensor, Var};
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MixerKind {
    Vdn,
    Qmix,
}

impl MixerKind {
    pub fn name(self) -> &'static str {
        match self {
            MixerKind::Vdn => "vdn",
            MixerKind::Qmix => "qmix",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "vdn" => Some(MixerKind::Vdn),
            "qmix" => Some(MixerKind::Qmix),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QmixMixer {
    pub n_agents: usize,
    pub state_dim: usize,
    pub embed: usize,
    pub hyper_hidden: usize,
    w1_a: ParamId,
    w1_a_b: ParamId,
    w1_b: ParamId,
    w1_b_b: ParamId,
    b1: ParamId,
    b1_b: ParamId,
    w2_a: ParamId,
    w2_a_b: ParamId,
    w2_b: ParamId,
    w2_b_b: ParamId,
    v_a: ParamId,
    v_a_b: ParamId,
    v_b: ParamId,
    v_b_b: ParamId,
}

impl QmixMixer {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, n_agents: usize, state_dim: usize, embed: usize, hyper_hidden: usize, rng: &mut R) -> Self {
        let (s, e, hh) = (state_dim, embed, hyper_hidden);
        Self {
            n_agents,
            state_dim,
            embed,
            hyper_hidden,
            w1_a: store.add_uniform("mixer.hyper_w1.0.w", [s, hh], s, rng),
            w1_a_b: store.add_uniform("mixer.hyper_w1.0.b", [1, hh], s, rng),
            w1_b: store.add_uniform("mixer.hyper_w1.1.w", [hh, n_agents * e], hh, rng),
            w1_b_b: store.add_uniform("mixer.hyper_w1.1.b", [1, n_agents * e], hh, rng),
            b1: store.add_uniform("mixer.hyper_b1.w", [s, e], s, rng),
            b1_b: store.add_uniform("mixer.hyper_b1.b", [1, e], s, rng),
            w2_a: store.add_uniform("mixer.hyper_w2.0.w", [s, hh], s, rng),
            w2_a_b: store.add_uniform("mixer.hyper_w2.0.b", [1, hh], s, rng),
            w2_b: store.add_uniform("mixer.hyper_w2.1.w", [hh, e], hh, rng),
            w2_b_b: store.add_uniform("mixer.hyper_w2.1.b", [1, e], hh, rng),
            v_a: store.add_uniform("mixer.v.0.w", [s, e], s, rng),
            v_a_b: store.add_uniform("mixer.v.0.b", [1, e], s, rng),
            v_b: store.add_uniform("mixer.v.1.w", [e, 1], e, rng),
            v_b_b: store.add_uniform("mixer.v.1.b", [1, 1], e, rng),
        }
    }

    pub fn param_ids(&self) -> [ParamId; 14] {
        [
            self.w1_a, self.w1_a_b, self.w1_b, self.w1_b_b, self.b1, self.b1_b, self.w2_a, self.w2_a_b, self.w2_b, self.w2_b_b,
            self.v_a, self.v_a_b, self.v_b, self.v_b_b,
        ]
    }

    /// Output layers of the two weight hypernetworks.
    pub fn weight_head_ids(&self) -> [ParamId; 4] {
        [self.w1_b, self.w1_b_b, self.w2_b, self.w2_b_b]
    }

    /// `qs` is `n x n_agents`, `states` is `n x state_dim`; returns `n x 1`.
    pub fn forward<'a>(&self, tape: &mut Tape<'a>, store: &'a ParamStore, trainable: bool, qs: Var, states: Var) -> Result<Var, AutodiffError> {
        let mut get = |id| if trainable { tape.param(store, id) } else { tape.frozen(store, id) };
        let p: Vec<Var> = self.param_ids().iter().map(|&id| get(id)).collect();
        let [w1_a, w1_a_b, w1_b, w1_b_b, b1, b1_b, w2_a, w2_a_b, w2_b, w2_b_b, v_a, v_a_b, v_b, v_b_b] = p[..] else {
            unreachable!()
        };
        if tape.value(qs).cols() != self.n_agents {
            return Err(AutodiffError::ShapeMismatch {
                op: "qmix agents",
                lhs: tape.value(qs).shape(),
                rhs: [tape.value(qs).rows(), self.n_agents],
            });
        }
        let lin = |tape: &mut Tape<'a>, x: Var, w: Var, b: Var| -> Result<Var, AutodiffError> {
            let y = tape.matmul(x, w)?;
            tape.add_row(y, b)
        };

        let h = lin(tape, states, w1_a, w1_a_b)?;
        let h = tape.elu(h);
        let w1 = lin(tape, h, w1_b, w1_b_b)?;
        let w1 = tape.abs(w1);
        let bias1 = lin(tape, states, b1, b1_b)?;
        let hidden = tape.row_vec_mat(qs, w1)?;
        let hidden = tape.add(hidden, bias1)?;
        let hidden = tape.elu(hidden);

        let h2 = lin(tape, states, w2_a, w2_a_b)?;
        let h2 = tape.elu(h2);
        let w2 = lin(tape, h2, w2_b, w2_b_b)?;
        let w2 = tape.abs(w2);

        let v = self.state_value_vars(tape, states, v_a, v_a_b, v_b, v_b_b)?;
        let y = tape.row_dot(hidden, w2)?;
        tape.add(y, v)
    }

    fn state_value_vars(&self, tape: &mut Tape<'_>, states: Var, v_a: Var, v_a_b: Var, v_b: Var, v_b_b: Var) -> Result<Var, AutodiffError> {
        let v = tape.matmul(states, v_a)?;
        let v = tape.add_row(v, v_a_b)?;
        let v = tape.relu(v);
        let v = tape.matmul(v, v_b)?;
        tape.add_row(v, v_b_b)
    }

    /// The state-dependent bias `V(s)` added after mixing.
    pub fn state_value(&self, store: &ParamStore, state: &[f64]) -> Result<f64, AutodiffError> {
        let mut tape = Tape::new();
        let s = tape.constant(Tensor::row(state.to_vec()));
        let [v_a, v_a_b, v_b, v_b_b] = [self.v_a, self.v_a_b, self.v_b, self.v_b_b].map(|id| tape.frozen(store, id));
        let v = self.state_value_vars(&mut tape, s, v_a, v_a_b, v_b, v_b_b)?;
        Ok(tape.value(v).data()[0])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Mixer {
    Vdn { n_agents: usize },
    Qmix(QmixMixer),
}

impl Mixer {
    pub fn kind(&self) -> MixerKind {
        match self {
            Mixer::Vdn { .. } => MixerKind::Vdn,
            Mixer::Qmix(_) => MixerKind::Qmix,
        }
    }

    /// Joint value for each row of `qs` (`n x n_agents`).
    pub fn forward<'a>(&self, tape: &mut Tape<'a>, store: &'a ParamStore, trainable: bool, qs: Var, states: Var) -> Result<Var, AutodiffError> {
        match self {
            Mixer::Vdn { n_agents } => {
                let ones = tape.constant(Tensor::full([*n_agents, 1], 1.0));
                tape.matmul(qs, ones)
            }
            Mixer::Qmix(m) => m.forward(tape, store, trainable, qs, states),
        }
    }

    /// Joint value of one `(chosen_q, state)` pair, without gradients.
    pub fn mix(&self, store: &ParamStore, chosen_q: &[f64], state: &[f64]) -> Result<f64, AutodiffError> {
        let mut tape = Tape::new();
        let q = tape.constant(Tensor::row(chosen_q.to_vec()));
        let s = tape.constant(Tensor::row(state.to_vec()));
        let out = self.forward(&mut tape, store, false, q, s)?;
        Ok(tape.value(out).data()[0])
    }
}

/// Sum of the chosen per-agent values.
pub fn vdn_mix(chosen_q: &[f64]) -> f64 {
    chosen_q.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qmix(seed: u64) -> (ParamStore, QmixMixer) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let m = QmixMixer::new(&mut store, 3, 5, 4, 6, &mut rng);
        (store, m)
    }

    #[test]
    fn vdn_examples() {
        assert_eq!(vdn_mix(&[2.0]), 2.0);
        assert_eq!(vdn_mix(&[1.0, 2.0, 3.0]), 6.0);
        let store = ParamStore::new();
        let m = Mixer::Vdn { n_agents: 3 };
        assert_eq!(m.mix(&store, &[1.0, 2.0, 3.0], &[]).unwrap(), 6.0);
    }

    #[test]
    fn vdn_gradient_is_one_per_agent() {
        let mut store = ParamStore::new();
        let id = store.add("q", Tensor::row(vec![0.3, -1.0, 4.0]));
        let m = Mixer::Vdn { n_agents: 3 };
        let mut tape = Tape::new();
        let q = tape.param(&store, id);
        let s = tape.constant(Tensor::zeros([1, 0]));
        let out = m.forward(&mut tape, &store, true, q, s).unwrap();
        let g = tape.backward(out, &store).unwrap();
        assert_eq!(g.get(id).data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn zeroed_weight_heads_leave_state_bias() {
        let (mut store, m) = qmix(1);
        for id in m.weight_head_ids() {
            store.get_mut(id).data_mut().fill(0.0);
        }
        let state = [0.5, -0.1, 0.0, 1.0, 2.0];
        let mixer = Mixer::Qmix(m.clone());
        let q = mixer.mix(&store, &[3.0, -7.0, 1.0], &state).unwrap();
        assert_eq!(q, m.state_value(&store, &state).unwrap());
    }

    #[test]
    fn doubling_a_positive_utility_never_lowers_joint_value() {
        let (store, m) = qmix(2);
        let mixer = Mixer::Qmix(m);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let q: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..5.0)).collect();
            let s: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let base = mixer.mix(&store, &q, &s).unwrap();
            let mut q2 = q.clone();
            q2[rng.gen_range(0..3)] *= 2.0;
            assert!(mixer.mix(&store, &q2, &s).unwrap() >= base);
        }
    }

    #[test]
    fn rejects_wrong_agent_count() {
        let (store, m) = qmix(4);
        assert!(Mixer::Qmix(m).mix(&store, &[1.0, 2.0], &[0.0; 5]).is_err());
    }
}

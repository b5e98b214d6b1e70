//! Recurrent per-agent utility network: FC -> ReLU -> GRU cell -> FC.
//!
//! Parameters are shared across agents; each input row is the agent's
//! observation, a one-hot of its previous action and a one-hot of its id.

use crate::autodiff::{AutodiffError, ParamId, ParamStore, Tape, Tensor, Var};
use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct AgentNetwork {
    pub obs_dim: usize,
    pub n_actions: usize,
    pub n_agents: usize,
    pub hidden: usize,
    fc1_w: ParamId,
    fc1_b: ParamId,
    w_z: ParamId,
    u_z: ParamId,
    b_z: ParamId,
    w_r: ParamId,
    u_r: ParamId,
    b_r: ParamId,
    w_n: ParamId,
    u_n: ParamId,
    b_in: ParamId,
    b_hn: ParamId,
    fc2_w: ParamId,
    fc2_b: ParamId,
}

/// Agent parameters loaded onto one tape.
#[derive(Clone, Copy, Debug)]
pub struct AgentVars {
    fc1_w: Var,
    fc1_b: Var,
    w_z: Var,
    u_z: Var,
    b_z: Var,
    w_r: Var,
    u_r: Var,
    b_r: Var,
    w_n: Var,
    u_n: Var,
    b_in: Var,
    b_hn: Var,
    fc2_w: Var,
    fc2_b: Var,
}

impl AgentNetwork {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, obs_dim: usize, n_actions: usize, n_agents: usize, hidden: usize, rng: &mut R) -> Self {
        let input = obs_dim + n_actions + n_agents;
        let h = hidden;
        Self {
            obs_dim,
            n_actions,
            n_agents,
            hidden,
            fc1_w: store.add_uniform("agent.fc1.w", [input, h], input, rng),
            fc1_b: store.add_uniform("agent.fc1.b", [1, h], input, rng),
            w_z: store.add_uniform("agent.gru.w_z", [h, h], h, rng),
            u_z: store.add_uniform("agent.gru.u_z", [h, h], h, rng),
            b_z: store.add_uniform("agent.gru.b_z", [1, h], h, rng),
            w_r: store.add_uniform("agent.gru.w_r", [h, h], h, rng),
            u_r: store.add_uniform("agent.gru.u_r", [h, h], h, rng),
            b_r: store.add_uniform("agent.gru.b_r", [1, h], h, rng),
            w_n: store.add_uniform("agent.gru.w_n", [h, h], h, rng),
            u_n: store.add_uniform("agent.gru.u_n", [h, h], h, rng),
            b_in: store.add_uniform("agent.gru.b_in", [1, h], h, rng),
            b_hn: store.add_uniform("agent.gru.b_hn", [1, h], h, rng),
            fc2_w: store.add_uniform("agent.fc2.w", [h, n_actions], h, rng),
            fc2_b: store.add_uniform("agent.fc2.b", [1, n_actions], h, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.obs_dim + self.n_actions + self.n_agents
    }

    pub fn output_bias(&self) -> ParamId {
        self.fc2_b
    }

    pub fn param_ids(&self) -> [ParamId; 14] {
        [
            self.fc1_w, self.fc1_b, self.w_z, self.u_z, self.b_z, self.w_r, self.u_r, self.b_r, self.w_n, self.u_n, self.b_in,
            self.b_hn, self.fc2_w, self.fc2_b,
        ]
    }

    /// Put the parameters on `tape`, tracked for gradients or frozen.
    pub fn load<'a>(&self, tape: &mut Tape<'a>, store: &'a ParamStore, trainable: bool) -> AgentVars {
        let mut get = |id| if trainable { tape.param(store, id) } else { tape.frozen(store, id) };
        AgentVars {
            fc1_w: get(self.fc1_w),
            fc1_b: get(self.fc1_b),
            w_z: get(self.w_z),
            u_z: get(self.u_z),
            b_z: get(self.b_z),
            w_r: get(self.w_r),
            u_r: get(self.u_r),
            b_r: get(self.b_r),
            w_n: get(self.w_n),
            u_n: get(self.u_n),
            b_in: get(self.b_in),
            b_hn: get(self.b_hn),
            fc2_w: get(self.fc2_w),
            fc2_b: get(self.fc2_b),
        }
    }

    /// One step for a batch of rows: `inputs` is `n x input_dim`, `hidden`
    /// is `n x hidden`. Returns `(q, new_hidden)`.
    pub fn step(&self, tape: &mut Tape<'_>, p: &AgentVars, inputs: Var, hidden: Var) -> Result<(Var, Var), AutodiffError> {
        let x = tape.matmul(inputs, p.fc1_w)?;
        let x = tape.add_row(x, p.fc1_b)?;
        let x = tape.relu(x);

        let gate = |tape: &mut Tape<'_>, w: Var, u: Var, b: Var| -> Result<Var, AutodiffError> {
            let a = tape.matmul(x, w)?;
            let c = tape.matmul(hidden, u)?;
            let s = tape.add(a, c)?;
            let s = tape.add_row(s, b)?;
            Ok(tape.sigmoid(s))
        };
        let z = gate(tape, p.w_z, p.u_z, p.b_z)?;
        let r = gate(tape, p.w_r, p.u_r, p.b_r)?;

        let xn = tape.matmul(x, p.w_n)?;
        let xn = tape.add_row(xn, p.b_in)?;
        let hn = tape.matmul(hidden, p.u_n)?;
        let hn = tape.add_row(hn, p.b_hn)?;
        let rhn = tape.mul(r, hn)?;
        let n = tape.add(xn, rhn)?;
        let n = tape.tanh(n);

        let keep = tape.one_minus(z);
        let a = tape.mul(keep, n)?;
        let b = tape.mul(z, hidden)?;
        let h_new = tape.add(a, b)?;

        let q = tape.matmul(h_new, p.fc2_w)?;
        let q = tape.add_row(q, p.fc2_b)?;
        Ok((q, h_new))
    }

    /// Build one input row: observation, previous-action one-hot, agent one-hot.
    pub fn input_row(&self, obs: &[f64], last_action: Option<usize>, agent: usize, out: &mut Vec<f64>) {
        out.extend_from_slice(obs);
        let start = out.len();
        out.resize(start + self.n_actions + self.n_agents, 0.0);
        if let Some(a) = last_action {
            out[start + a] = 1.0;
        }
        out[start + self.n_actions + agent] = 1.0;
    }

    /// Q-values and next hidden state for a single agent, without gradients.
    pub fn agent_q(
        &self,
        store: &ParamStore,
        obs: &[f64],
        last_action: Option<usize>,
        agent: usize,
        hidden: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>), AutodiffError> {
        if obs.len() != self.obs_dim {
            return Err(AutodiffError::BadLength {
                shape: [1, self.obs_dim],
                len: obs.len(),
            });
        }
        if hidden.len() != self.hidden {
            return Err(AutodiffError::BadLength {
                shape: [1, self.hidden],
                len: hidden.len(),
            });
        }
        let mut row = Vec::with_capacity(self.input_dim());
        self.input_row(obs, last_action, agent, &mut row);
        let mut tape = Tape::new();
        let p = self.load(&mut tape, store, false);
        let x = tape.constant(Tensor::row(row));
        let h = tape.constant(Tensor::row(hidden.to_vec()));
        let (q, h) = self.step(&mut tape, &p, x, h)?;
        Ok((tape.value(q).data().to_vec(), tape.value(h).data().to_vec()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(store: &mut ParamStore, seed: u64) -> AgentNetwork {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        AgentNetwork::new(store, 3, 4, 2, 5, &mut rng)
    }

    #[test]
    fn zero_weights_output_the_bias() {
        let mut store = ParamStore::new();
        let n = net(&mut store, 1);
        for id in n.param_ids() {
            if id != n.output_bias() {
                store.get_mut(id).data_mut().fill(0.0);
            }
        }
        let bias = store.get(n.output_bias()).data().to_vec();
        let (q, _) = n.agent_q(&store, &[1.0, -2.0, 0.5], Some(2), 1, &[0.3; 5]).unwrap();
        assert_eq!(q, bias);
    }

    #[test]
    fn deterministic_forward() {
        let mut store = ParamStore::new();
        let n = net(&mut store, 2);
        let a = n.agent_q(&store, &[0.1, 0.2, 0.3], None, 0, &[0.0; 5]).unwrap();
        let b = n.agent_q(&store, &[0.1, 0.2, 0.3], None, 0, &[0.0; 5]).unwrap();
        assert_eq!(a, b);
        assert!(n.agent_q(&store, &[0.1], None, 0, &[0.0; 5]).is_err());
        assert!(n.agent_q(&store, &[0.1, 0.2, 0.3], None, 0, &[0.0; 4]).is_err());
    }

    /// Scalar reference GRU cell written directly from the gate equations.
    fn reference_step(store: &ParamStore, n: &AgentNetwork, input: &[f64], h: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let ids = n.param_ids();
        let m = |id: ParamId| store.get(id);
        let hid = n.hidden;
        let lin = |x: &[f64], w: &Tensor, b: Option<&Tensor>| -> Vec<f64> {
            (0..w.cols())
                .map(|j| x.iter().enumerate().map(|(k, xv)| xv * w.get(k, j)).sum::<f64>() + b.map_or(0.0, |b| b.get(0, j)))
                .collect()
        };
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let x: Vec<f64> = lin(input, m(ids[0]), Some(m(ids[1]))).into_iter().map(|v| v.max(0.0)).collect();
        let (xz, hz) = (lin(&x, m(ids[2]), Some(m(ids[4]))), lin(h, m(ids[3]), None));
        let (xr, hr) = (lin(&x, m(ids[5]), Some(m(ids[7]))), lin(h, m(ids[6]), None));
        let (xn, hn) = (lin(&x, m(ids[8]), Some(m(ids[10]))), lin(h, m(ids[9]), Some(m(ids[11]))));
        let mut h_new = vec![0.0; hid];
        for j in 0..hid {
            let z = sig(xz[j] + hz[j]);
            let r = sig(xr[j] + hr[j]);
            let nn = (xn[j] + r * hn[j]).tanh();
            h_new[j] = (1.0 - z) * nn + z * h[j];
        }
        let q = lin(&h_new, m(ids[12]), Some(m(ids[13])));
        (q, h_new)
    }

    #[test]
    fn gru_step_matches_reference_cell() {
        let mut store = ParamStore::new();
        let n = net(&mut store, 3);
        let obs = [0.4, -1.1, 0.9];
        let h0 = [0.1, -0.2, 0.3, 0.0, 0.5];
        let (q, h) = n.agent_q(&store, &obs, Some(1), 1, &h0).unwrap();
        let mut row = Vec::new();
        n.input_row(&obs, Some(1), 1, &mut row);
        let (rq, rh) = reference_step(&store, &n, &row, &h0);
        for (a, b) in q.iter().zip(&rq).chain(h.iter().zip(&rh)) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn input_row_layout() {
        let mut store = ParamStore::new();
        let n = net(&mut store, 4);
        let mut row = Vec::new();
        n.input_row(&[7.0, 8.0, 9.0], Some(3), 1, &mut row);
        assert_eq!(row, vec![7.0, 8.0, 9.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
    }
}

//! Gradient and invariant checks shared by the `check` subcommand and the
//! test suites.

use crate::aela::{action_entropy, always_extend_reach_step, fit_trend, recommend_window, softmax_policy, LengthSchedule};
use crate::autodiff::{grad_check, ParamStore, Tensor};
use crate::learners::{AgentNetwork, Mixer, QmixMixer};
use crate::theory::Check;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn check(name: &str, computed: f64, bound: f64, pass: bool) -> Check {
    Check {
        name: name.into(),
        computed,
        bound,
        pass,
    }
}

/// Worst relative gradient error of the agent network (one GRU step with a
/// non-zero incoming hidden state) and of the QMIX mixer over random
/// instances.
pub fn gradient_checks(seed: u64, instances: usize) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut agent_err, mut mixer_err) = (0.0_f64, 0.0_f64);
    for _ in 0..instances {
        let (obs, acts, agents, hidden) = (rng.gen_range(1..5), rng.gen_range(2..5), rng.gen_range(1..4), rng.gen_range(2..6));
        let mut store = ParamStore::new();
        let net = AgentNetwork::new(&mut store, obs, acts, agents, hidden, &mut rng);
        let rows = rng.gen_range(1..4);
        let x = Tensor::uniform([rows, net.input_dim()], 1.0, &mut rng);
        let h0 = Tensor::uniform([rows, hidden], 1.0, &mut rng);
        let wq = Tensor::uniform([rows, acts], 1.0, &mut rng);
        let wh = Tensor::uniform([rows, hidden], 1.0, &mut rng);
        let e = grad_check(
            |tape, s| {
                let p = net.load(tape, s, true);
                let xi = tape.constant(x.clone());
                let hi = tape.constant(h0.clone());
                let (q, h) = net.step(tape, &p, xi, hi)?;
                let a = tape.constant(wq.clone());
                let b = tape.constant(wh.clone());
                let q = tape.mul(q, a)?;
                let h = tape.mul(h, b)?;
                let sq = tape.sum(q);
                let sh = tape.sum(h);
                tape.add(sq, sh)
            },
            &store,
            1e-6,
        )
        .unwrap_or(f64::INFINITY);
        agent_err = agent_err.max(e);

        let (n_agents, state_dim) = (rng.gen_range(1..5), rng.gen_range(1..6));
        let mut store = ParamStore::new();
        let mixer = QmixMixer::new(&mut store, n_agents, state_dim, rng.gen_range(1..5), rng.gen_range(1..6), &mut rng);
        let rows = rng.gen_range(1..4);
        let qs = Tensor::uniform([rows, n_agents], 2.0, &mut rng);
        let st = Tensor::uniform([rows, state_dim], 1.0, &mut rng);
        let wy = Tensor::uniform([rows, 1], 1.0, &mut rng);
        let e = grad_check(
            |tape, s| {
                let q = tape.constant(qs.clone());
                let x = tape.constant(st.clone());
                let y = mixer.forward(tape, s, true, q, x)?;
                let w = tape.constant(wy.clone());
                let y = tape.mul(y, w)?;
                Ok(tape.sum(y))
            },
            &store,
            1e-6,
        )
        .unwrap_or(f64::INFINITY);
        mixer_err = mixer_err.max(e);
    }
    vec![
        check("grad_agent_max_rel_error", agent_err, 1e-4, agent_err <= 1e-4),
        check("grad_qmix_max_rel_error", mixer_err, 1e-4, mixer_err <= 1e-4),
    ]
}

/// Smallest central-difference slope of the QMIX joint value with respect to
/// any agent utility over random `(q, state)` points.
pub fn monotonicity_check(seed: u64, points: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n_agents, state_dim) = (4, 6);
    let mut min_slope = f64::INFINITY;
    let mut per_net = 0;
    let mut store = ParamStore::new();
    let mut mixer = Mixer::Vdn { n_agents };
    let h = 1e-5;
    for _ in 0..points {
        if per_net == 0 {
            store = ParamStore::new();
            mixer = Mixer::Qmix(QmixMixer::new(&mut store, n_agents, state_dim, 8, 16, &mut rng));
            per_net = 50;
        }
        per_net -= 1;
        let q: Vec<f64> = (0..n_agents).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let s: Vec<f64> = (0..state_dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        for i in 0..n_agents {
            let mut up = q.clone();
            let mut down = q.clone();
            up[i] += h;
            down[i] -= h;
            let slope = (mixer.mix(&store, &up, &s).expect("shapes") - mixer.mix(&store, &down, &s).expect("shapes")) / (2.0 * h);
            min_slope = min_slope.min(slope);
        }
    }
    check("qmix_min_fd_slope", min_slope, -1e-9, min_slope >= -1e-9)
}

/// Softmax, entropy, trend-fit and length-schedule identities.
pub fn controller_checks() -> Vec<Check> {
    let mut out = Vec::new();
    let mut exact = |name: &str, got: f64, want: f64, tol: f64| out.push(check(name, (got - want).abs(), tol, (got - want).abs() <= tol));

    for n in [2usize, 4, 6] {
        let p = softmax_policy(&vec![1.7; n], 1.0).expect("valid");
        exact(&format!("entropy_uniform_{n}"), action_entropy(&p).expect("valid"), (n as f64).ln(), 1e-12);
    }
    exact("entropy_deterministic", action_entropy(&[1.0, 0.0, 0.0]).expect("valid"), 0.0, 0.0);
    let shifted = softmax_policy(&[1.0, 2.0, 3.5], 0.5).expect("valid");
    let base = softmax_policy(&[101.0, 102.0, 103.5], 0.5).expect("valid");
    let shift_err = shifted.iter().zip(&base).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    exact("softmax_shift_invariance", shift_err, 0.0, 1e-12);

    for (slope, icept, w) in [(-1.0, 3.0, 3usize), (0.0, 5.0, 4), (0.25, -2.0, 8), (-0.5, 10.0, 16)] {
        let ys: Vec<f64> = (0..w).map(|x| slope * x as f64 + icept).collect();
        let fit = fit_trend(&ys).expect("w >= 2");
        exact(&format!("ols_slope_{slope}_{w}"), fit.alpha, slope, 0.0);
        exact(&format!("ols_intercept_{slope}_{w}"), fit.beta, icept, 0.0);
    }
    exact("ols_slope_1_2_1.5", fit_trend(&[1.0, 2.0, 1.5]).expect("w >= 2").alpha, 0.25, 0.0);

    let cases: [(usize, f64, usize, usize); 3] = [(10, -0.01, 50, 11), (50, -1.0, 50, 50), (10, 0.0, 50, 10)];
    for (e_l, alpha, e_max, want) in cases {
        let mut s = LengthSchedule::new(e_l, e_max).expect("valid");
        s.maybe_extend(alpha);
        exact(&format!("extend_{e_l}_{alpha}_{e_max}"), s.current() as f64, want as f64, 0.0);
    }
    let mut s = LengthSchedule::new(1, 7).expect("valid");
    for _ in 0..100 {
        s.maybe_extend(-1.0);
    }
    exact("extend_clamps_at_e_max", s.current() as f64, 7.0, 0.0);
    out
}

/// Recommended window and the always-extend pace for a budget. Returns the
/// window, the closed-form bound `w * mean_len * delta_l`, and the simulated
/// step at which the limit first reaches `e_max`.
pub fn window_pacing_check(total_steps: u64, e_max: usize, e_l0: usize) -> (usize, Vec<Check>) {
    let t_budget = 0.8 * total_steps as f64;
    let w = recommend_window(t_budget, e_max, e_l0).expect("e_l0 < e_max");
    let closed = w as f64 * (e_max + e_l0) as f64 / 2.0 * (e_max - e_l0) as f64;
    let simulated = always_extend_reach_step(w, e_l0, e_max) as f64;
    let mean_closed = if w > 1 { (w - 1) as f64 * (e_max + e_l0) as f64 / 2.0 * (e_max - e_l0) as f64 } else { 0.0 };
    (
        w,
        vec![
            check("window_closed_form_reach", closed, t_budget, closed >= t_budget),
            check("window_simulated_reach", simulated, t_budget, simulated >= t_budget),
            check("window_is_minimal", mean_closed, t_budget, mean_closed < t_budget),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_gradient_suite_passes() {
        for c in gradient_checks(1, 5) {
            assert!(c.pass, "{c:?}");
        }
    }

    #[test]
    fn monotone_on_a_few_points() {
        assert!(monotonicity_check(2, 100).pass);
    }

    #[test]
    fn controller_identities_hold() {
        for c in controller_checks() {
            assert!(c.pass, "{c:?}");
        }
    }

    #[test]
    fn pacing_for_desk_budget() {
        let (w, checks) = window_pacing_check(200_000, 100, 25);
        assert_eq!(w, 35);
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");
    }
}

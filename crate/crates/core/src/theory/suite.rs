//! Randomized validation of the closed forms.

use super::{
    aggregate_dead_probs, assumption_check, delta_ns, expected_secure_visits, mc_visit_oracle, regret, regret_derivative, secure_prob, ChainModel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One line of the validation report.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub computed: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &str, computed: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            computed,
            bound,
            pass: computed <= bound,
        }
    }

    fn above(name: &str, computed: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            computed,
            bound,
            pass: computed > bound,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub max_horizon: usize,
    pub monotone_models: usize,
    pub regret_models: usize,
    pub mc_models: usize,
    pub mc_episodes: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_horizon: 50,
            monotone_models: 10_000,
            regret_models: 1_000,
            mc_models: 20,
            mc_episodes: 100_000,
        }
    }
}

/// A chain model with horizon in `min_t..=max_t`. Dead-end schedules mix
/// dense, sparse, tiny and saturated probabilities so the edge cases
/// (`0` and `1`) show up regularly.
pub fn random_model<R: Rng + ?Sized>(rng: &mut R, min_t: usize, max_t: usize) -> ChainModel {
    let t = rng.gen_range(min_t..=max_t);
    let style = rng.gen_range(0..4);
    let p_dead = (0..t)
        .map(|_| match style {
            0 => rng.gen::<f64>(),
            1 => rng.gen_range(0.0..0.1),
            2 => {
                if rng.gen_bool(0.7) {
                    0.0
                } else {
                    rng.gen()
                }
            }
            _ => match rng.gen_range(0..10) {
                0 => 1.0,
                1..=3 => 0.0,
                _ => rng.gen(),
            },
        })
        .collect();
    let step_rewards = (0..t).map(|_| rng.gen_range(-2.0..2.0)).collect();
    ChainModel::new(p_dead, rng.gen(), rng.gen_range(0.0..20.0), step_rewards).expect("generated model is valid")
}

/// Constant-probability model satisfying the goal-reward assumption with
/// `r_g > 0`, `T >= 2` and `p_g > 0`.
fn random_regret_model<R: Rng + ?Sized>(rng: &mut R, max_t: usize) -> (ChainModel, f64, f64) {
    let t = rng.gen_range(2..=max_t.max(2));
    let step_rewards: Vec<f64> = (0..t).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let best = super::max_subarray(&step_rewards).unwrap_or(0.0).max(0.0);
    let r_goal = best + rng.gen_range(0.01..5.0);
    let p_d = rng.gen::<f64>();
    let p_g = 1.0 - rng.gen::<f64>();
    let mut m = ChainModel::new(vec![p_d; t], p_g, r_goal, step_rewards).expect("valid");
    m.optimal_rewards = (0..t).map(|_| rng.gen_range(0.0..1.0)).collect();
    (m, p_d, p_g)
}

/// Derivative of `f` at `x` by central differences refined with Richardson
/// extrapolation (Ridders' tableau). Returns the estimate and its error
/// estimate.
pub fn ridders<F: Fn(f64) -> f64>(f: F, x: f64, h0: f64) -> (f64, f64) {
    const N: usize = 10;
    const CON: f64 = 1.4;
    const CON2: f64 = CON * CON;
    let mut a = [[0.0_f64; N]; N];
    let mut h = h0;
    a[0][0] = (f(x + h) - f(x - h)) / (2.0 * h);
    let (mut best, mut err) = (a[0][0], f64::INFINITY);
    for i in 1..N {
        h /= CON;
        a[0][i] = (f(x + h) - f(x - h)) / (2.0 * h);
        let mut fac = CON2;
        for j in 1..=i {
            a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
            fac *= CON2;
            let e = (a[j][i] - a[j - 1][i]).abs().max((a[j][i] - a[j - 1][i - 1]).abs());
            if e <= err {
                err = e;
                best = a[j][i];
            }
        }
        if (a[i][i] - a[i - 1][i - 1]).abs() >= 2.0 * err {
            break;
        }
    }
    (best, err)
}

fn rng_for(cfg: &SuiteConfig, salt: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
    r.set_stream(salt);
    r
}

/// Secure probability never increases with the interaction step.
pub fn secure_monotonicity(cfg: &SuiteConfig) -> Check {
    let mut rng = rng_for(cfg, 1);
    let mut violations = 0usize;
    for _ in 0..cfg.monotone_models {
        let m = random_model(&mut rng, 1, cfg.max_horizon);
        let ps = m.secure_probs();
        violations += ps.windows(2).filter(|w| w[1] > w[0]).count();
        // The per-call form must agree with the cached product.
        for (l, &p) in ps.iter().enumerate() {
            if secure_prob(&m, l + 1).expect("in range") != p {
                violations += 1;
            }
        }
    }
    Check::at_most("secure_monotonicity_violations", violations as f64, 0.0)
}

/// Growing the episode length never adds secure visits, and the closed-form
/// change equals the direct difference.
pub fn secure_visit_delta(cfg: &SuiteConfig) -> [Check; 2] {
    let mut rng = rng_for(cfg, 2);
    let mut max_delta = f64::NEG_INFINITY;
    let mut max_gap = 0.0_f64;
    for _ in 0..cfg.monotone_models {
        let m = random_model(&mut rng, 2, cfg.max_horizon);
        let n_total = rng.gen_range(1.0..1000.0);
        let mut prev = expected_secure_visits(&m, 1, n_total).expect("in range");
        for e in 1..m.horizon() {
            let next = expected_secure_visits(&m, e + 1, n_total).expect("in range");
            let d = delta_ns(&m, e, n_total).expect("in range");
            max_delta = max_delta.max(d);
            max_gap = max_gap.max((d - (next - prev)).abs());
            prev = next;
        }
    }
    [Check::at_most("secure_visit_delta_max_delta_ns", max_delta, 0.0), Check::at_most("secure_visit_delta_max_abs_error", max_gap, 1e-12)]
}

/// Aggregate dead-end probability never decreases as episodes get longer.
pub fn dead_end_aggregate(cfg: &SuiteConfig) -> [Check; 2] {
    let mut rng = rng_for(cfg, 3);
    let mut violations = 0usize;
    let mut max_gap = 0.0_f64;
    for _ in 0..cfg.monotone_models {
        let m = random_model(&mut rng, 1, cfg.max_horizon);
        let agg = aggregate_dead_probs(&m);
        violations += agg.windows(2).filter(|w| w[1] < w[0]).count();
        for (e, &a) in agg.iter().enumerate() {
            let direct = 1.0 - expected_secure_visits(&m, e + 1, 1.0).expect("in range");
            max_gap = max_gap.max((a - direct).abs());
        }
    }
    [Check::at_most("dead_end_aggregate_violations", violations as f64, 0.0), Check::at_most("dead_end_aggregate_max_abs_error", max_gap, 1e-12)]
}

/// Under the goal-reward assumption the regret grows with the dead-end
/// probability; the analytic derivative agrees with finite differences.
pub fn regret_sensitivity(cfg: &SuiteConfig) -> [Check; 3] {
    let mut rng = rng_for(cfg, 4);
    let mut min_deriv = f64::INFINITY;
    let mut max_err = 0.0_f64;
    let mut skipped = 0usize;
    for _ in 0..cfg.regret_models {
        let (m, p_d, p_g) = random_regret_model(&mut rng, cfg.max_horizon);
        if !assumption_check(&m.step_rewards, m.r_goal) {
            skipped += 1;
            continue;
        }
        let t = m.horizon();
        let d = regret_derivative(&m, t, p_d, p_g).expect("in range");
        min_deriv = min_deriv.min(d);
        let (fd, _) = ridders(|x| regret(&m, t, x, p_g).expect("in range"), p_d, 0.05);
        max_err = max_err.max((d - fd).abs() / d.abs().max(1.0));
    }
    [
        Check::above("regret_sensitivity_min_derivative", min_deriv, 0.0),
        Check::at_most("regret_sensitivity_max_fd_error", max_err, 1e-8),
        Check::at_most("regret_sensitivity_models_skipped", skipped as f64, 0.0),
    ]
}

/// Largest z-score of Monte Carlo secure visits against the closed form.
pub fn monte_carlo(cfg: &SuiteConfig) -> Check {
    let mut rng = rng_for(cfg, 5);
    let mut worst = 0.0_f64;
    for _ in 0..cfg.mc_models {
        let m = random_model(&mut rng, 1, cfg.max_horizon);
        let e_l = rng.gen_range(1..=m.horizon());
        let s = mc_visit_oracle(&m, e_l, cfg.mc_episodes, &mut rng).expect("valid arguments");
        let exact = expected_secure_visits(&m, e_l, s.n_total).expect("in range");
        let z = if s.n_s_se > 0.0 {
            (s.n_s - exact).abs() / s.n_s_se
        } else if (s.n_s - exact).abs() <= 1e-9 * s.n_total {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(z);
    }
    Check::at_most("mc_max_z_score", worst, 3.0)
}

/// Hand-worked examples with known answers.
pub fn examples() -> Vec<Check> {
    let exact = |name: &str, got: f64, want: f64| Check::at_most(name, (got - want).abs(), 1e-12);
    let m2 = ChainModel::new(vec![0.1, 0.2], 0.5, 10.0, vec![0.0; 2]).expect("valid");
    let half = ChainModel::new(vec![0.0, 0.5], 0.5, 10.0, vec![0.0; 2]).expect("valid");
    let one = ChainModel::new(vec![0.0], 1.0, 10.0, vec![0.0]).expect("valid");
    let two = ChainModel::new(vec![0.5; 2], 0.5, 10.0, vec![0.0; 2]).expect("valid");
    vec![
        exact("example_secure_prob", secure_prob(&m2, 2).expect("in range"), 0.72),
        exact("example_secure_visits", expected_secure_visits(&half, 2, 100.0).expect("in range"), 75.0),
        exact("example_delta_ns", delta_ns(&half, 1, 100.0).expect("in range"), -25.0),
        exact("example_regret_sure_goal", regret(&one, 1, 0.0, 1.0).expect("in range"), 0.0),
        exact("example_regret_no_goal", regret(&one, 1, 0.0, 0.0).expect("in range"), 10.0),
        exact("example_regret_two_steps", regret(&two, 2, 0.5, 0.5).expect("in range"), 2.5),
        exact("example_regret_derivative", regret_derivative(&two, 2, 0.3, 0.5).expect("in range"), 5.0),
        exact("example_assumption_fails", f64::from(u8::from(assumption_check(&[6.0, 5.0], 10.0))), 0.0),
        exact("example_assumption_holds", f64::from(u8::from(assumption_check(&[-1.0, 4.0], 5.0))), 1.0),
    ]
}

pub fn run_suite(cfg: &SuiteConfig) -> Vec<Check> {
    let mut out = examples();
    out.push(secure_monotonicity(cfg));
    out.extend(secure_visit_delta(cfg));
    out.extend(dead_end_aggregate(cfg));
    out.extend(regret_sensitivity(cfg));
    out.push(monte_carlo(cfg));
    out
}

pub fn suite_csv(checks: &[Check]) -> String {
    let mut s = String::from("name,computed,bound,pass\n");
    for c in checks {
        s.push_str(&format!("{},{},{},{}\n", c.name, c.computed, c.bound, c.pass));
    }
    s
}

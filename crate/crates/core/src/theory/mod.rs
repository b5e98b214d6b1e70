//! Closed forms for dead-end chains: secure-state probabilities, expected
//! secure visits under a fixed sample budget, and the regret expansion with
//! its derivative in the dead-end probability.

mod oracle;
mod suite;

pub use oracle::{mc_visit_oracle, McVisitStats};
pub use suite::{dead_end_aggregate, examples, secure_monotonicity, monte_carlo, random_model, ridders, run_suite, suite_csv, secure_visit_delta, regret_sensitivity, Check, SuiteConfig};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("{what} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: usize,
        lo: usize,
        hi: usize,
    },
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

/// Episodic process where each step may fall into an absorbing dead end with
/// probability `p_dead[l-1]`, and from a secure state reaches the goal with
/// probability `p_goal`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainModel {
    pub p_dead: Vec<f64>,
    pub p_goal: f64,
    pub r_goal: f64,
    pub step_rewards: Vec<f64>,
    /// Rewards of the optimal policy; equal to `step_rewards` unless set.
    pub optimal_rewards: Vec<f64>,
}

impl ChainModel {
    pub fn new(p_dead: Vec<f64>, p_goal: f64, r_goal: f64, step_rewards: Vec<f64>) -> Result<Self, TheoryError> {
        let m = Self {
            optimal_rewards: step_rewards.clone(),
            p_dead,
            p_goal,
            r_goal,
            step_rewards,
        };
        m.validate()?;
        Ok(m)
    }

    /// Constant dead-end probability and zero step rewards.
    pub fn constant(horizon: usize, p_dead: f64, p_goal: f64, r_goal: f64) -> Result<Self, TheoryError> {
        Self::new(vec![p_dead; horizon], p_goal, r_goal, vec![0.0; horizon])
    }

    pub fn horizon(&self) -> usize {
        self.p_dead.len()
    }

    pub fn validate(&self) -> Result<(), TheoryError> {
        let t = self.horizon();
        if t == 0 {
            return Err(TheoryError::InvalidModel("horizon must be >= 1".into()));
        }
        if self.step_rewards.len() != t || self.optimal_rewards.len() != t {
            return Err(TheoryError::InvalidModel("reward sequences must have one entry per step".into()));
        }
        if let Some(p) = self.p_dead.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(TheoryError::InvalidModel(format!("dead-end probability {p} outside [0, 1]")));
        }
        if !(0.0..=1.0).contains(&self.p_goal) {
            return Err(TheoryError::InvalidModel(format!("goal probability {} outside [0, 1]", self.p_goal)));
        }
        if !self.r_goal.is_finite() || self.step_rewards.iter().chain(&self.optimal_rewards).any(|r| !r.is_finite()) {
            return Err(TheoryError::InvalidModel("rewards must be finite".into()));
        }
        Ok(())
    }

    /// `P_s(1..=T)`.
    pub fn secure_probs(&self) -> Vec<f64> {
        let mut acc = 1.0;
        self.p_dead
            .iter()
            .map(|p| {
                acc *= 1.0 - p;
                acc
            })
            .collect()
    }
}

fn check_range(what: &'static str, value: usize, lo: usize, hi: usize) -> Result<(), TheoryError> {
    if value < lo || value > hi {
        return Err(TheoryError::OutOfRange { what, value, lo, hi });
    }
    Ok(())
}

/// Probability of still being secure at interaction step `l` (1-based).
pub fn secure_prob(model: &ChainModel, l: usize) -> Result<f64, TheoryError> {
    check_range("l", l, 1, model.horizon())?;
    Ok(model.p_dead[..l].iter().fold(1.0, |acc, p| acc * (1.0 - p)))
}

/// Expected secure visits when `n_total` samples are spent on episodes of
/// length `e_l`.
pub fn expected_secure_visits(model: &ChainModel, e_l: usize, n_total: f64) -> Result<f64, TheoryError> {
    check_range("e_l", e_l, 1, model.horizon())?;
    let sum: f64 = model.secure_probs()[..e_l].iter().sum();
    Ok(n_total / e_l as f64 * sum)
}

/// Change of expected secure visits when the episode length grows from
/// `e_l` to `e_l + 1`.
///
/// The numerator is summed as `sum_l (P_s(E+1) - P_s(l))`: every term is
/// non-positive even after rounding, so the sign is exact.
pub fn delta_ns(model: &ChainModel, e_l: usize, n_total: f64) -> Result<f64, TheoryError> {
    check_range("e_l", e_l, 1, model.horizon().saturating_sub(1))?;
    let ps = model.secure_probs();
    let next = ps[e_l];
    let numer: f64 = ps[..e_l].iter().map(|p| next - p).sum();
    let e = e_l as f64;
    Ok(n_total / (e * (e + 1.0)) * numer)
}

/// Aggregate dead-end visit probability `1 - N_s / N_total` for every
/// episode length `1..=T`.
///
/// Computed as a running mean of `1 - P_s(l)`. The true mean always lies
/// between the previous mean and the newest term, so each update is clamped
/// to that interval to keep rounding from breaking the ordering.
pub fn aggregate_dead_probs(model: &ChainModel) -> Vec<f64> {
    let mut out = Vec::with_capacity(model.horizon());
    let mut mean = 0.0_f64;
    for (k, ps) in model.secure_probs().into_iter().enumerate() {
        let d = 1.0 - ps;
        mean = if k == 0 {
            d
        } else {
            let lo = mean.min(d);
            let hi = mean.max(d);
            (mean + (d - mean) / (k + 1) as f64).clamp(lo, hi)
        };
        out.push(mean);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct VisitStats {
    pub p_s: Vec<f64>,
    pub n_s: f64,
    pub n_total: f64,
    pub e_n: f64,
    pub p_d_agg: f64,
}

impl VisitStats {
    pub fn n_d(&self) -> f64 {
        self.n_total - self.n_s
    }
}

pub fn visit_stats(model: &ChainModel, e_l: usize, n_total: f64) -> Result<VisitStats, TheoryError> {
    let n_s = expected_secure_visits(model, e_l, n_total)?;
    Ok(VisitStats {
        p_s: model.secure_probs()[..e_l].to_vec(),
        n_s,
        n_total,
        e_n: n_total / e_l as f64,
        p_d_agg: aggregate_dead_probs(model)[e_l - 1],
    })
}

fn regret_horizon(model: &ChainModel, t: usize) -> Result<(), TheoryError> {
    check_range("T", t, 1, model.horizon())
}

fn suffix_gap(model: &ChainModel, t: usize) -> Vec<f64> {
    // sum_{t'=k+1..T} r_t' - r_g for k = 1..=T
    let mut out = vec![0.0; t];
    let mut tail = 0.0;
    for k in (0..t).rev() {
        out[k] = tail - model.r_goal;
        tail += model.step_rewards[k];
    }
    out
}

/// Regret over `t` steps with constant dead-end and goal probabilities.
pub fn regret(model: &ChainModel, t: usize, p_d: f64, p_g: f64) -> Result<f64, TheoryError> {
    regret_horizon(model, t)?;
    let base: f64 = model.optimal_rewards[..t].iter().zip(&model.step_rewards[..t]).map(|(a, b)| a - b).sum();
    let gaps = suffix_gap(model, t);
    let mut survive = 1.0;
    let mut goal_term = 0.0;
    for g in gaps {
        goal_term += survive * p_g * g;
        survive *= 1.0 - p_d;
    }
    Ok(base + goal_term + model.r_goal)
}

/// Derivative of [`regret`] with respect to `p_d`.
pub fn regret_derivative(model: &ChainModel, t: usize, p_d: f64, p_g: f64) -> Result<f64, TheoryError> {
    regret_horizon(model, t)?;
    let gaps = suffix_gap(model, t);
    let mut total = 0.0;
    let mut pow = 1.0; // (1 - p_d)^(k-2), starting at k = 2
    for (k0, g) in gaps.iter().enumerate().skip(1) {
        total += -(k0 as f64) * pow * p_g * g;
        pow *= 1.0 - p_d;
    }
    Ok(total)
}

/// Whether every non-empty contiguous reward sum stays below `r_g`.
pub fn assumption_check(step_rewards: &[f64], r_g: f64) -> bool {
    max_subarray(step_rewards).is_none_or(|m| m < r_g)
}

fn max_subarray(xs: &[f64]) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut run = f64::NEG_INFINITY;
    for &x in xs {
        run = if run > 0.0 { run + x } else { x };
        best = Some(best.map_or(run, |b| b.max(run)));
    }
    best
}

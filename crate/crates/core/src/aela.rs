//! Entropy-trend episode-length controller.
//!
//! Each learner update contributes one total softmax entropy of the online
//! Q-values over the sampled batch. After every `w` readings a least-squares
//! line is fit to the last `w` of them; a negative slope grows the episode
//! limit by one step, up to the task horizon.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AelaError {
    #[error("temperature must be positive, got {0}")]
    BadTemperature(f64),
    #[error("q-values must be finite")]
    NonFiniteQ,
    #[error("probabilities must be non-negative, got {0}")]
    NegativeProbability(f64),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("trend fit needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("initial length {e_l0} must be below the horizon {e_max}")]
    NoRoomToGrow { e_l0: usize, e_max: usize },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
}

/// Boltzmann distribution over `q / tau`, computed with max-subtraction.
pub fn softmax_policy(q: &[f64], tau: f64) -> Result<Vec<f64>, AelaError> {
    if !(tau > 0.0) {
        return Err(AelaError::BadTemperature(tau));
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(AelaError::NonFiniteQ);
    }
    let max = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = q.iter().map(|&v| ((v - max) / tau).exp()).collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= z);
    Ok(p)
}

/// Shannon entropy in nats, with `0 log 0 = 0`.
pub fn action_entropy(p: &[f64]) -> Result<f64, AelaError> {
    let mut h = 0.0;
    for &v in p {
        if v < 0.0 {
            return Err(AelaError::NegativeProbability(v));
        }
        if v > 0.0 {
            h -= v * v.ln();
        }
    }
    Ok(h.max(0.0))
}

/// Q-values laid out as `(batch, time, agent, action)`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct QValueBatch {
    pub batch: usize,
    pub time: usize,
    pub agents: usize,
    pub actions: usize,
    pub values: Vec<f64>,
}

impl QValueBatch {
    pub fn q(&self, b: usize, t: usize, i: usize) -> &[f64] {
        let off = ((b * self.time + t) * self.agents + i) * self.actions;
        &self.values[off..off + self.actions]
    }
}

/// Sum of per-(episode, step, agent) softmax entropies over filled steps.
/// `filled` is laid out `(batch, time)`.
pub fn batch_total_entropy(q: &QValueBatch, filled: &[bool], tau: f64) -> Result<f64, AelaError> {
    let expected = q.batch * q.time * q.agents * q.actions;
    if q.values.len() != expected {
        return Err(AelaError::Shape(format!("{} q-values for {} slots", q.values.len(), expected)));
    }
    if filled.len() != q.batch * q.time {
        return Err(AelaError::Shape(format!("mask has {} entries, expected {}", filled.len(), q.batch * q.time)));
    }
    let mut total = 0.0;
    for b in 0..q.batch {
        for t in 0..q.time {
            if !filled[b * q.time + t] {
                continue;
            }
            for i in 0..q.agents {
                total += action_entropy(&softmax_policy(q.q(b, t, i), tau)?)?;
            }
        }
    }
    Ok(total)
}

/// Least-squares line `alpha * x + beta` over abscissae `0..w`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrendFit {
    pub alpha: f64,
    pub beta: f64,
}

pub fn fit_trend(values: &[f64]) -> Result<TrendFit, AelaError> {
    let n = values.len();
    if n < 2 {
        return Err(AelaError::TooFewPoints(n));
    }
    let x_mean = (n - 1) as f64 / 2.0;
    let y_mean = values.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, &y) in values.iter().enumerate() {
        let dx = k as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    let alpha = sxy / sxx;
    Ok(TrendFit {
        alpha,
        beta: y_mean - alpha * x_mean,
    })
}

/// Current episode-length limit and its bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LengthSchedule {
    e_l: usize,
    e_l0: usize,
    e_max: usize,
}

impl LengthSchedule {
    pub fn new(e_l0: usize, e_max: usize) -> Result<Self, AelaError> {
        if e_l0 < 1 || e_l0 > e_max {
            return Err(AelaError::InvalidSchedule(format!("need 1 <= e_l0 ({e_l0}) <= e_max ({e_max})")));
        }
        Ok(Self { e_l: e_l0, e_l0, e_max })
    }

    pub fn current(&self) -> usize {
        self.e_l
    }

    pub fn initial(&self) -> usize {
        self.e_l0
    }

    pub fn max(&self) -> usize {
        self.e_max
    }

    pub fn delta_l(&self) -> usize {
        self.e_max - self.e_l0
    }

    /// Grow by one step iff the slope is negative and there is room.
    pub fn maybe_extend(&mut self, alpha: f64) -> bool {
        if alpha < 0.0 && self.e_l < self.e_max {
            self.e_l += 1;
            true
        } else {
            false
        }
    }
}

/// `max(1, floor(fraction * e_max))`.
pub fn initial_length(e_max: usize, fraction: f64) -> Result<usize, AelaError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(AelaError::InvalidSchedule(format!("fraction {fraction} not in (0, 1]")));
    }
    Ok(((fraction * e_max as f64).floor() as usize).max(1))
}

/// Smallest window for which even an always-extending controller, on
/// episodes averaging `(e_max + e_l0) / 2` steps, cannot reach `e_max` before
/// `t_budget` environment steps: `ceil(t / (mean_len * (e_max - e_l0)))`.
pub fn recommend_window(t_budget: f64, e_max: usize, e_l0: usize) -> Result<usize, AelaError> {
    if e_l0 >= e_max {
        return Err(AelaError::NoRoomToGrow { e_l0, e_max });
    }
    if !(t_budget > 0.0) || !t_budget.is_finite() {
        return Err(AelaError::InvalidSchedule(format!("t_budget {t_budget} must be positive")));
    }
    let mean_len = (e_max + e_l0) as f64 / 2.0;
    let delta = (e_max - e_l0) as f64;
    Ok(((t_budget / (mean_len * delta)).ceil() as usize).max(1))
}

/// Environment step at which a controller that extends on every fit reaches
/// `e_max`, when every episode runs the full current limit and each episode
/// yields one update.
pub fn always_extend_reach_step(window: usize, e_l0: usize, e_max: usize) -> u64 {
    let mut schedule = LengthSchedule::new(e_l0, e_max).expect("valid schedule");
    let (mut t, mut updates) = (0u64, 0usize);
    while schedule.current() < e_max {
        t += schedule.current() as u64;
        updates += 1;
        if updates % window == 0 {
            schedule.maybe_extend(-1.0);
        }
    }
    t
}

/// Window policy: how many entropy readings form one trend fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowSize {
    Fixed(usize),
    /// Never fit; the limit stays at its initial value.
    Never,
}

/// Entropy history plus the fit cadence.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyWindow {
    history: Vec<f64>,
    window: WindowSize,
    fits_done: usize,
}

impl EntropyWindow {
    pub fn new(window: WindowSize) -> Result<Self, AelaError> {
        if let WindowSize::Fixed(w) = window {
            if w < 2 {
                return Err(AelaError::TooFewPoints(w));
            }
        }
        Ok(Self {
            history: Vec::new(),
            window,
            fits_done: 0,
        })
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn fits_done(&self) -> usize {
        self.fits_done
    }

    pub fn window(&self) -> WindowSize {
        self.window
    }

    /// Append a reading; returns a fit over the last `w` readings whenever the
    /// history length is a multiple of `w`.
    pub fn push(&mut self, h_total: f64) -> Option<TrendFit> {
        debug_assert!(h_total >= 0.0);
        self.history.push(h_total);
        let WindowSize::Fixed(w) = self.window else {
            return None;
        };
        if self.history.len() % w != 0 {
            return None;
        }
        self.fits_done += 1;
        fit_trend(&self.history[self.history.len() - w..]).ok()
    }
}

/// Schedule plus entropy window, as driven by the training loop.
#[derive(Clone, Debug, PartialEq)]
pub struct Controller {
    pub schedule: LengthSchedule,
    pub window: EntropyWindow,
    pub tau: f64,
    last_fit: Option<TrendFit>,
}

impl Controller {
    pub fn new(schedule: LengthSchedule, window: WindowSize, tau: f64) -> Result<Self, AelaError> {
        if !(tau > 0.0) {
            return Err(AelaError::BadTemperature(tau));
        }
        Ok(Self {
            schedule,
            window: EntropyWindow::new(window)?,
            tau,
            last_fit: None,
        })
    }

    pub fn limit(&self) -> usize {
        self.schedule.current()
    }

    pub fn last_fit(&self) -> Option<TrendFit> {
        self.last_fit
    }

    /// Record one entropy reading and apply the length rule if a fit is due.
    pub fn observe(&mut self, h_total: f64) -> Option<TrendFit> {
        let fit = self.window.push(h_total)?;
        self.schedule.maybe_extend(fit.alpha);
        self.last_fit = Some(fit);
        Some(fit)
    }
}

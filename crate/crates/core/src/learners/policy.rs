use super::LearnerError;
use rand::Rng;

/// Linear exploration schedule from `start` to `finish` over `anneal_steps`
/// environment steps, constant afterwards.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub finish: f64,
    pub anneal_steps: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            finish: 0.05,
            anneal_steps: 50_000,
        }
    }
}

impl EpsilonSchedule {
    pub fn at(&self, t: u64) -> f64 {
        if self.anneal_steps == 0 || t >= self.anneal_steps {
            return self.finish;
        }
        let frac = t as f64 / self.anneal_steps as f64;
        (self.start + (self.finish - self.start) * frac).clamp(0.0, 1.0)
    }
}

/// With probability `epsilon` a uniform legal action, otherwise the legal
/// argmax of `q` (ties go to the lowest index).
pub fn epsilon_greedy<R: Rng + ?Sized>(q: &[f64], epsilon: f64, legal: &[bool], rng: &mut R) -> Result<usize, LearnerError> {
    if legal.len() != q.len() {
        return Err(LearnerError::Shape(format!("{} q-values, {} legality flags", q.len(), legal.len())));
    }
    let n_legal = legal.iter().filter(|&&l| l).count();
    if n_legal == 0 {
        return Err(LearnerError::NoLegalAction);
    }
    let explore: f64 = rng.gen();
    if explore < epsilon {
        let pick = rng.gen_range(0..n_legal);
        return Ok(legal.iter().enumerate().filter(|(_, &l)| l).nth(pick).map(|(a, _)| a).expect("pick < n_legal"));
    }
    Ok(greedy(q, legal).expect("at least one legal action"))
}

/// Legal argmax with lowest-index tie breaking.
pub fn greedy(q: &[f64], legal: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (a, (&v, &l)) in q.iter().zip(legal).enumerate() {
        if l && best.is_none_or(|b| v > q[b]) {
            best = Some(a);
        }
    }
    best
}

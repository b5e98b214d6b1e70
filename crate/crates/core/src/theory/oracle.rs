use super::{check_range, ChainModel, TheoryError};
use rand::Rng;

/// Empirical counterpart of [`super::VisitStats`].
#[derive(Clone, Debug, PartialEq)]
pub struct McVisitStats {
    pub episodes: usize,
    pub e_l: usize,
    /// Fraction of episodes still secure at each step `1..=e_l`.
    pub p_s: Vec<f64>,
    /// Secure visits scaled to `n_total = episodes * e_l`.
    pub n_s: f64,
    pub n_total: f64,
    /// Standard error of `n_s` from the per-episode sample variance.
    pub n_s_se: f64,
}

impl McVisitStats {
    pub fn secure_fraction(&self) -> f64 {
        self.n_s / self.n_total
    }
}

/// Simulate the dead-end lottery for `episodes` episodes of `e_l` steps each.
/// A step counts as a secure visit when no dead end has been drawn at or
/// before it.
pub fn mc_visit_oracle<R: Rng + ?Sized>(model: &ChainModel, e_l: usize, episodes: usize, rng: &mut R) -> Result<McVisitStats, TheoryError> {
    check_range("e_l", e_l, 1, model.horizon())?;
    check_range("episodes", episodes, 1, usize::MAX)?;
    let mut alive = vec![0u64; e_l];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..episodes {
        let mut visits = 0usize;
        for (l, &p) in model.p_dead[..e_l].iter().enumerate() {
            if rng.gen::<f64>() < p {
                break;
            }
            alive[l] += 1;
            visits += 1;
        }
        let v = visits as f64;
        sum += v;
        sum_sq += v * v;
    }
    let n = episodes as f64;
    let mean = sum / n;
    let var = if episodes > 1 { (sum_sq - n * mean * mean).max(0.0) / (n - 1.0) } else { 0.0 };
    Ok(McVisitStats {
        episodes,
        e_l,
        p_s: alive.iter().map(|&c| c as f64 / n).collect(),
        n_s: sum,
        n_total: n * e_l as f64,
        n_s_se: (var * n).sqrt(),
    })
}

use super::{AutodiffError, Gradients, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RmsPropConfig {
    pub lr: f64,
    /// Smoothing constant for the running mean of squared gradients.
    pub alpha: f64,
    pub eps: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            alpha: 0.99,
            eps: 1e-5,
        }
    }
}

/// RMS-scaled gradient descent:
/// `v <- alpha*v + (1-alpha)*g^2`, `p <- p - lr * g / (sqrt(v) + eps)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RmsProp {
    cfg: RmsPropConfig,
    square_avg: Vec<Vec<f64>>,
}

impl RmsProp {
    pub fn new(cfg: RmsPropConfig, store: &ParamStore) -> Self {
        Self {
            cfg,
            square_avg: store.values().iter().map(|t| vec![0.0; t.len()]).collect(),
        }
    }

    pub fn config(&self) -> &RmsPropConfig {
        &self.cfg
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) -> Result<(), AutodiffError> {
        for (i, g) in grads.all().iter().enumerate() {
            if !g.is_finite() {
                return Err(AutodiffError::NonFinite(format!(
                    "gradient of parameter '{}'",
                    store.name(store.ids().nth(i).expect("aligned"))
                )));
            }
        }
        let RmsPropConfig { lr, alpha, eps } = self.cfg;
        for (id, (g, v)) in store.ids().collect::<Vec<_>>().into_iter().zip(grads.all().iter().zip(self.square_avg.iter_mut())) {
            let p = store.get_mut(id).data_mut();
            for ((pv, &gv), sv) in p.iter_mut().zip(g.data()).zip(v.iter_mut()) {
                *sv = alpha * *sv + (1.0 - alpha) * gv * gv;
                *pv -= lr * gv / (sv.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Rescale `grads` so their global L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_grad_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads
        .all()
        .iter()
        .flat_map(|t| t.data().iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm.is_finite() {
        let k = max_norm / (norm + 1e-6);
        for t in grads.all_mut() {
            t.data_mut().iter_mut().for_each(|v| *v *= k);
        }
    }
    norm
}

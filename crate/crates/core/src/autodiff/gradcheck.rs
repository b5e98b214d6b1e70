use super::{AutodiffError, ParamStore, Tape, Var};

/// Value of `f` at `store`.
fn eval<F>(f: &mut F, store: &ParamStore) -> Result<f64, AutodiffError>
where
    F: for<'s> FnMut(&mut Tape<'s>, &'s ParamStore) -> Result<Var, AutodiffError>,
{
    let mut tape = Tape::new();
    let out = f(&mut tape, store)?;
    let v = tape.value(out).item().ok_or(AutodiffError::NonScalarLoss(tape.value(out).shape()))?;
    if !v.is_finite() {
        return Err(AutodiffError::NonFinite("function value".into()));
    }
    Ok(v)
}

/// Central finite-difference gradient of `f` for every parameter scalar.
pub fn central_difference<F>(mut f: F, store: &ParamStore, eps: f64) -> Result<Vec<Vec<f64>>, AutodiffError>
where
    F: for<'s> FnMut(&mut Tape<'s>, &'s ParamStore) -> Result<Var, AutodiffError>,
{
    let mut work = store.clone();
    let mut out = Vec::with_capacity(store.len());
    for id in store.ids() {
        let n = store.get(id).len();
        let mut g = Vec::with_capacity(n);
        for k in 0..n {
            let orig = store.get(id).data()[k];
            work.get_mut(id).data_mut()[k] = orig + eps;
            let plus = eval(&mut f, &work)?;
            work.get_mut(id).data_mut()[k] = orig - eps;
            let minus = eval(&mut f, &work)?;
            work.get_mut(id).data_mut()[k] = orig;
            g.push((plus - minus) / (2.0 * eps));
        }
        out.push(g);
    }
    Ok(out)
}

/// Max over all parameter scalars of `|analytic - numeric| / max(1, |numeric|)`.
pub fn grad_check<F>(mut f: F, store: &ParamStore, eps: f64) -> Result<f64, AutodiffError>
where
    F: for<'s> FnMut(&mut Tape<'s>, &'s ParamStore) -> Result<Var, AutodiffError>,
{
    assert!(eps > 0.0, "eps must be positive");
    let mut tape = Tape::new();
    let out = f(&mut tape, store)?;
    let analytic = tape.backward(out, store)?;
    if analytic.all().iter().any(|t| !t.is_finite()) {
        return Err(AutodiffError::NonFinite("analytic gradient".into()));
    }
    let numeric = central_difference(&mut f, store, eps)?;
    let mut worst: f64 = 0.0;
    for (a, n) in analytic.all().iter().zip(&numeric) {
        for (&av, &nv) in a.data().iter().zip(n) {
            worst = worst.max((av - nv).abs() / nv.abs().max(1.0));
        }
    }
    Ok(worst)
}

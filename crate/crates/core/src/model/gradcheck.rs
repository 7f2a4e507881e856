use super::{Model, Sample};
use crate::error::{Error, Result};

/// Default central-difference step for gradient checks.
pub const GRAD_FD_STEP: f64 = 1e-5;

/// Gradient entries smaller than this are compared on an absolute scale of
/// `REL_ERR_FLOOR`, so near-zero partials do not blow up the ratio.
pub const REL_ERR_FLOOR: f64 = 1e-3;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Central-difference gradient of `f` at `w`.
pub fn fd_gradient<F>(w: &[f64], step: f64, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let mut probe = w.to_vec();
    let mut grad = Vec::with_capacity(w.len());
    for i in 0..w.len() {
        let orig = probe[i];
        probe[i] = orig + step;
        let plus = f(&probe)?;
        probe[i] = orig - step;
        let minus = f(&probe)?;
        probe[i] = orig;
        grad.push((plus - minus) / (2.0 * step));
    }
    Ok(grad)
}

/// Max relative error between the analytic per-sample gradient and central
/// finite differences of the per-sample loss, over all coordinates.
pub fn check_grad_fd(model: &Model, w: &[f64], s: &Sample, step: f64) -> Result<f64> {
    let analytic = model.per_sample_grad(w, s)?;
    let numeric = fd_gradient(w, step, |p| model.per_sample_loss(p, s))?;
    Ok(analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| relative_error(*a, *n))
        .fold(0.0, f64::max))
}

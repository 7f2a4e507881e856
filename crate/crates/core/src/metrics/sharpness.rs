use std::borrow::Borrow;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::avg_sq_grad_norm;
use crate::error::{Error, Result};
use crate::model::{batch_loss, lambda_max, EigenEstimate, Model, Sample};
use crate::params::ParamVector;

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharpnessEstimate {
    pub value: f64,
    pub std_error: f64,
    pub draws: usize,
}

/// Expected loss increase under Gaussian perturbation,
/// `S_σ(w) = E_{γ∼N(0, σ I)}[F(w+γ) − F(w)]`.
///
/// `sigma` is the per-coordinate *variance*. Each of the `draws` samples is
/// an antithetic pair `±γ`, whose average is one observation.
pub fn gaussian_sharpness<S: Borrow<Sample> + Sync>(
    model: &Model,
    w: &[f64],
    data: &[S],
    sigma: f64,
    draws: usize,
    seed: u64,
) -> Result<SharpnessEstimate> {
    gaussian_sharpness_of(|p| batch_loss(model, p, data), w, sigma, draws, seed)
}

/// [`gaussian_sharpness`] for an arbitrary objective.
pub fn gaussian_sharpness_of<F>(
    mut objective: F,
    w: &[f64],
    sigma: f64,
    draws: usize,
    seed: u64,
) -> Result<SharpnessEstimate>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    if draws == 0 {
        return Err(Error::invalid("need at least one draw"));
    }
    let normal = Normal::new(0.0, sigma.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = objective(w)?;
    let mut plus = w.to_vec();
    let mut minus = w.to_vec();
    // Welford running mean / variance of the pair averages
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 1..=draws {
        for ((p, m), wi) in plus.iter_mut().zip(minus.iter_mut()).zip(w) {
            let g = normal.sample(&mut rng);
            *p = wi + g;
            *m = wi - g;
        }
        let pair = 0.5 * ((objective(&plus)? - base) + (objective(&minus)? - base));
        let delta = pair - mean;
        mean += delta / k as f64;
        m2 += delta * (pair - mean);
    }
    let std_error = if draws > 1 {
        (m2 / (draws - 1) as f64 / draws as f64).sqrt()
    } else {
        0.0
    };
    Ok(SharpnessEstimate {
        value: mean,
        std_error,
        draws,
    })
}

/// Data-relevant sharpness along `±η∇f_ξ`:
/// `E_ξ[F(w − η∇f_ξ) − F(w)] + E_ξ[F(w + η∇f_ξ) − F(w)]`, with `ξ` running
/// over `data` and `F` the mean objective over `data`.
pub fn data_relevant_sharpness<S: Borrow<Sample> + Sync>(
    model: &Model,
    w: &[f64],
    data: &[S],
    eta: f64,
) -> Result<f64> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::invalid(format!("eta must be positive, got {eta}")));
    }
    if data.is_empty() {
        return Err(Error::invalid("sharpness needs a non-empty dataset"));
    }
    let base = batch_loss(model, w, data)?;
    let mut probe = ParamVector::zeros(w.len());
    let mut total = 0.0;
    for s in data {
        let g = model.per_sample_grad(w, s.borrow())?;
        let mut pair = 0.0;
        for sign in [-1.0, 1.0] {
            probe.copy_from_slice(w);
            probe.axpy(sign * eta, &g);
            pair += batch_loss(model, &probe, data)? - base;
        }
        total += pair;
    }
    Ok(total / data.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharpnessBound {
    /// `η² · λ_max · E_i‖∇f_i(w)‖²`
    pub value: f64,
    pub lambda: EigenEstimate,
}

const BOUND_POWER_ITERS: usize = 10_000;
const BOUND_POWER_TOL: f64 = 1e-12;

/// `η² λ_max(H_w) E_i‖∇f_i(w)‖²`, the Rayleigh-quotient upper bound of the
/// data-relevant sharpness. `lambda.converged` tells whether the power
/// iteration settled.
pub fn sharpness_upper_bound<S: Borrow<Sample> + Sync>(
    model: &Model,
    w: &[f64],
    data: &[S],
    eta: f64,
) -> Result<SharpnessBound> {
    sharpness_upper_bound_with(model, w, data, eta, BOUND_POWER_ITERS, BOUND_POWER_TOL)
}

pub fn sharpness_upper_bound_with<S: Borrow<Sample> + Sync>(
    model: &Model,
    w: &[f64],
    data: &[S],
    eta: f64,
    iters: usize,
    tol: f64,
) -> Result<SharpnessBound> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::invalid(format!("eta must be positive, got {eta}")));
    }
    let avg = avg_sq_grad_norm(model, w, data)?;
    let lambda = lambda_max(model, w, data, iters, tol)?;
    Ok(SharpnessBound {
        value: eta * eta * lambda.value * avg,
        lambda,
    })
}

//! Batch-level reductions and curvature probes.
//!
//! Reductions run over fixed chunks of [`CHUNK`] consecutive samples: each
//! chunk is summed in index order and the chunk sums are then added in chunk
//! order. The chunking does not depend on the thread count, so sequential and
//! parallel execution give bit-identical results.

use std::borrow::Borrow;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{Model, Sample};
use crate::error::{ensure_len, Error, Result};
use crate::params::{axpy, dot, ParamVector};

/// Central-difference step for Hessian-vector products of non-quadratic
/// families, measured along the unit direction.
pub const HVP_FD_STEP: f64 = 1e-4;

const CHUNK: usize = 32;
/// Below this many samples the chunks are reduced on the calling thread.
const PAR_THRESHOLD: usize = 4 * CHUNK;

fn chunk_grad_sum<S: Borrow<Sample>>(model: &Model, w: &[f64], chunk: &[S]) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; w.len()];
    let mut g = vec![0.0; w.len()];
    for s in chunk {
        model.grad_into(w, s.borrow(), &mut g)?;
        axpy(&mut acc, 1.0, &g);
    }
    Ok(acc)
}

fn add_in_order(parts: Vec<Vec<f64>>, len: usize) -> Vec<f64> {
    let mut total = vec![0.0; len];
    for part in parts {
        axpy(&mut total, 1.0, &part);
    }
    total
}

/// `Σ_i ∇f_i(w)` over the batch with the fixed chunked reduction order.
pub fn batch_grad_sum<S: Borrow<Sample> + Sync>(model: &Model, w: &[f64], batch: &[S]) -> Result<ParamVector> {
    ensure_len("parameter vector", model.num_params(), w.len())?;
    let parts: Vec<Vec<f64>> = if batch.len() >= PAR_THRESHOLD {
        batch
            .par_chunks(CHUNK)
            .map(|c| chunk_grad_sum(model, w, c))
            .collect::<Result<_>>()?
    } else {
        batch
            .chunks(CHUNK)
            .map(|c| chunk_grad_sum(model, w, c))
            .collect::<Result<_>>()?
    };
    Ok(add_in_order(parts, w.len()).into())
}

/// Mean gradient `(1/|batch|) Σ_i ∇f_i(w)`.
pub fn batch_grad<S: Borrow<Sample> + Sync>(model: &Model, w: &[f64], batch: &[S]) -> Result<ParamVector> {
    if batch.is_empty() {
        return Err(Error::invalid("batch_grad needs a non-empty batch"));
    }
    let mut g = batch_grad_sum(model, w, batch)?;
    g.scale(1.0 / batch.len() as f64);
    Ok(g)
}

/// Mean training objective over the batch.
pub fn batch_loss<S: Borrow<Sample> + Sync>(model: &Model, w: &[f64], batch: &[S]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("batch_loss needs a non-empty batch"));
    }
    let sum = map_reduce(batch, |s| model.per_sample_loss(w, s))?;
    Ok(sum / batch.len() as f64)
}

/// Sums a per-sample scalar with the same fixed chunking as the gradients.
pub(crate) fn map_reduce<S, F>(batch: &[S], f: F) -> Result<f64>
where
    S: Borrow<Sample> + Sync,
    F: Fn(&Sample) -> Result<f64> + Sync,
{
    let chunk_sum = |c: &[S]| -> Result<f64> {
        let mut acc = 0.0;
        for s in c {
            acc += f(s.borrow())?;
        }
        Ok(acc)
    };
    let parts: Vec<f64> = if batch.len() >= PAR_THRESHOLD {
        batch.par_chunks(CHUNK).map(chunk_sum).collect::<Result<_>>()?
    } else {
        batch.chunks(CHUNK).map(chunk_sum).collect::<Result<_>>()?
    };
    Ok(parts.into_iter().fold(0.0, |a, b| a + b))
}

/// Hessian of the batch-mean objective applied to `v`.
///
/// Exact for the quadratic family (`A v`, independent of `w` and the batch);
/// otherwise a central difference of batch gradients with step
/// [`HVP_FD_STEP`] along `v/‖v‖`.
pub fn hvp<S: Borrow<Sample> + Sync>(model: &Model, w: &[f64], batch: &[S], v: &[f64]) -> Result<ParamVector> {
    ensure_len("parameter vector", model.num_params(), w.len())?;
    ensure_len("hvp direction", w.len(), v.len())?;
    let norm = dot(v, v).sqrt();
    if norm == 0.0 {
        return Ok(ParamVector::zeros(v.len()));
    }
    if let Model::MeanQuadratic(q) = model {
        let mut out = ParamVector::zeros(v.len());
        q.apply(v, &mut out);
        return Ok(out);
    }
    let t = HVP_FD_STEP / norm;
    let mut plus = w.to_vec();
    axpy(&mut plus, t, v);
    let mut minus = w.to_vec();
    axpy(&mut minus, -t, v);
    let mut out = batch_grad(model, &plus, batch)?;
    let gm = batch_grad(model, &minus, batch)?;
    out.axpy(-1.0, &gm);
    out.scale(1.0 / (2.0 * t));
    Ok(out)
}

/// Outcome of a power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenEstimate {
    /// Largest absolute eigenvalue.
    pub value: f64,
    /// Last Rayleigh quotient (carries the sign of the dominant eigenvalue).
    pub rayleigh: f64,
    pub iterations: usize,
    pub converged: bool,
}

const POWER_START_SEED: u64 = 0x5eed_1e55;

/// Power iteration on a symmetric linear operator. Converged once two
/// successive Rayleigh quotients differ by at most `tol`; otherwise the last
/// estimate is returned with `converged = false`.
pub fn power_iteration<F>(dim: usize, iters: usize, tol: f64, mut apply: F) -> Result<EigenEstimate>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if iters == 0 {
        return Err(Error::invalid("power iteration needs at least one iteration"));
    }
    if dim == 0 {
        return Err(Error::invalid("power iteration on an empty operator"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_START_SEED);
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let n = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);

    let mut prev = f64::NAN;
    for k in 1..=iters {
        let hv = apply(&v)?;
        let rq = dot(&v, &hv);
        let norm = dot(&hv, &hv).sqrt();
        if norm == 0.0 {
            return Ok(EigenEstimate {
                value: 0.0,
                rayleigh: 0.0,
                iterations: k,
                converged: true,
            });
        }
        if (rq - prev).abs() <= tol {
            return Ok(EigenEstimate {
                value: rq.abs(),
                rayleigh: rq,
                iterations: k,
                converged: true,
            });
        }
        prev = rq;
        v = hv.into_iter().map(|x| x / norm).collect();
    }
    Ok(EigenEstimate {
        value: prev.abs(),
        rayleigh: prev,
        iterations: iters,
        converged: false,
    })
}

/// Largest absolute eigenvalue of the batch-mean Hessian at `w`.
pub fn lambda_max<S: Borrow<Sample> + Sync>(
    model: &Model,
    w: &[f64],
    batch: &[S],
    iters: usize,
    tol: f64,
) -> Result<EigenEstimate> {
    power_iteration(w.len(), iters, tol, |v| {
        hvp(model, w, batch, v).map(ParamVector::into_vec)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LogisticRegression, MeanQuadratic};

    fn centers(cs: &[f64]) -> Vec<Sample> {
        cs.iter().map(|c| Sample::center(vec![*c])).collect()
    }

    #[test]
    fn batch_grad_of_two_centers() {
        let m = Model::MeanQuadratic(MeanQuadratic::identity(1, 1.0));
        let g = batch_grad(&m, &[0.0], &centers(&[1.0, 3.0])).unwrap();
        assert_eq!(g.as_slice(), &[-2.0]);
    }

    #[test]
    fn single_sample_batch_equals_per_sample() {
        let m = Model::Logistic(LogisticRegression::new(3, 3, 0.1));
        let w = m.init_params(5);
        let s = Sample::labeled(vec![0.1, 0.2, -0.3], 1);
        let g = batch_grad(&m, &w, std::slice::from_ref(&s)).unwrap();
        assert_eq!(g, m.per_sample_grad(&w, &s).unwrap());
    }

    #[test]
    fn empty_batch_rejected() {
        let m = Model::MeanQuadratic(MeanQuadratic::identity(1, 1.0));
        let empty: Vec<Sample> = vec![];
        assert!(batch_grad(&m, &[0.0], &empty).is_err());
        assert!(batch_loss(&m, &[0.0], &empty).is_err());
    }

    #[test]
    fn parallel_and_sequential_reductions_agree_bitwise() {
        let m = Model::Logistic(LogisticRegression::new(4, 3, 0.0));
        let w = m.init_params(2);
        let data: Vec<Sample> = (0..500)
            .map(|i| {
                let t = i as f64 * 0.37;
                Sample::labeled(vec![t.sin(), t.cos(), (2.0 * t).sin(), 1.0], i % 3)
            })
            .collect();
        let par = batch_grad_sum(&m, &w, &data).unwrap();
        let seq = ParamVector::from(add_in_order(
            data.chunks(CHUNK).map(|c| chunk_grad_sum(&m, &w, c).unwrap()).collect(),
            w.len(),
        ));
        assert_eq!(par, seq);
        let refs: Vec<&Sample> = data.iter().collect();
        assert_eq!(batch_grad_sum(&m, &w, &refs).unwrap(), par);
    }

    #[test]
    fn quadratic_hvp_is_exact_and_zero_safe() {
        let m = Model::MeanQuadratic(MeanQuadratic::diagonal(&[1.0, 4.0]).unwrap());
        let batch = vec![Sample::center(vec![0.0, 0.0])];
        assert_eq!(
            hvp(&m, &[3.0, -2.0], &batch, &[1.0, 1.0]).unwrap().as_slice(),
            &[1.0, 4.0]
        );
        assert_eq!(
            hvp(&m, &[3.0, -2.0], &batch, &[0.0, 0.0]).unwrap().as_slice(),
            &[0.0, 0.0]
        );
    }

    #[test]
    fn power_iteration_on_known_spectra() {
        let m = Model::MeanQuadratic(MeanQuadratic::diagonal(&[1.0, 4.0]).unwrap());
        let batch = vec![Sample::center(vec![0.0, 0.0])];
        let est = lambda_max(&m, &[0.0, 0.0], &batch, 1000, 1e-14).unwrap();
        assert!(est.converged);
        assert!((est.value - 4.0).abs() < 1e-8);

        let m = Model::MeanQuadratic(MeanQuadratic::identity(3, 3.0));
        let batch = vec![Sample::center(vec![0.0; 3])];
        let est = lambda_max(&m, &[0.0; 3], &batch, 1000, 1e-14).unwrap();
        assert!((est.value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn power_iteration_reports_non_convergence() {
        // eigenvalues 2 and 1.9: three iterations cannot settle the quotient
        let est = power_iteration(2, 3, 0.0, |v| Ok(vec![2.0 * v[0], 1.9 * v[1]])).unwrap();
        assert!(!est.converged);
        assert_eq!(est.iterations, 3);
        assert!(power_iteration(2, 0, 1e-9, |v| Ok(v.to_vec())).is_err());
    }

    #[test]
    fn negative_dominant_eigenvalue_reported_by_magnitude() {
        let est = power_iteration(2, 10_000, 1e-14, |v| Ok(vec![-5.0 * v[0], 4.0 * v[1]])).unwrap();
        assert!(est.converged);
        assert!((est.value - 5.0).abs() < 1e-8);
        assert!(est.rayleigh < 0.0);
    }
}

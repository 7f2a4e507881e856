use nalgebra::{DMatrix, SymmetricEigen};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamVector;

/// `f_i(w) = ½ (w − c_i)ᵀ A (w − c_i)` with one curvature `A` shared by all
/// samples; the center `c_i` is the sample's feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanQuadratic {
    dim: usize,
    /// Row-major `dim × dim`.
    curvature: Vec<f64>,
}

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-12;

impl MeanQuadratic {
    /// Builds the family from a row-major curvature matrix, rejecting
    /// matrices that are not symmetric positive semidefinite.
    pub fn new(dim: usize, curvature: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("quadratic dimension must be at least 1"));
        }
        if curvature.len() != dim * dim {
            return Err(Error::invalid(format!(
                "curvature needs {} entries for dimension {dim}, got {}",
                dim * dim,
                curvature.len()
            )));
        }
        if curvature.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("curvature has non-finite entries"));
        }
        let scale = curvature.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..dim {
            for j in 0..i {
                if (curvature[i * dim + j] - curvature[j * dim + i]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::invalid("curvature is not symmetric"));
                }
            }
        }
        let model = Self { dim, curvature };
        let min = model.eigenvalues()[0];
        if min < -PSD_TOL * scale {
            return Err(Error::invalid(format!(
                "curvature is not positive semidefinite (smallest eigenvalue {min})"
            )));
        }
        Ok(model)
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let d = diag.len();
        let mut a = vec![0.0; d * d];
        for (i, v) in diag.iter().enumerate() {
            a[i * d + i] = *v;
        }
        Self::new(d, a)
    }

    pub fn identity(dim: usize, scale: f64) -> Self {
        Self::diagonal(&vec![scale; dim]).expect("scaled identity must be PSD")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn curvature(&self) -> &[f64] {
        &self.curvature
    }

    /// Eigenvalues of `A` in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = DMatrix::from_row_slice(self.dim, self.dim, &self.curvature);
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().cloned().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Smallest eigenvalue of `A`, which is the family's P-L constant.
    pub fn pl_mu(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.curvature[i * self.dim + i]).sum()
    }

    /// `out = A v`
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (row, o) in self.curvature.chunks_exact(self.dim).zip(out.iter_mut()) {
            *o = crate::params::dot(row, v);
        }
    }

    /// `½ vᵀ A v`
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let mut av = vec![0.0; self.dim];
        self.apply(v, &mut av);
        0.5 * crate::params::dot(v, &av)
    }

    pub(crate) fn loss(&self, w: &[f64], center: &[f64]) -> f64 {
        let r: Vec<f64> = w.iter().zip(center).map(|(a, b)| a - b).collect();
        self.quad_form(&r)
    }

    pub(crate) fn grad_into(&self, w: &[f64], center: &[f64], out: &mut [f64]) -> f64 {
        let r: Vec<f64> = w.iter().zip(center).map(|(a, b)| a - b).collect();
        self.apply(&r, out);
        0.5 * crate::params::dot(&r, out)
    }

    pub(crate) fn init_params(&self, rng: &mut ChaCha8Rng) -> ParamVector {
        let mut w = ParamVector::zeros(self.dim);
        super::uniform_fill(rng, &mut w, 1.0);
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Model, Sample};

    #[test]
    fn unit_quadratic_loss_and_grad() {
        let m = Model::MeanQuadratic(MeanQuadratic::identity(1, 1.0));
        let s = Sample::center(vec![1.0]);
        assert_eq!(m.per_sample_loss(&[0.0], &s).unwrap(), 0.5);
        assert_eq!(m.per_sample_loss(&[1.0], &s).unwrap(), 0.0);
        assert_eq!(m.per_sample_grad(&[0.0], &s).unwrap().as_slice(), &[-1.0]);
    }

    #[test]
    fn diagonal_gradient_is_a_w() {
        let m = Model::MeanQuadratic(MeanQuadratic::diagonal(&[1.0, 4.0]).unwrap());
        let g = m.per_sample_grad(&[1.0, 1.0], &Sample::center(vec![0.0, 0.0])).unwrap();
        assert_eq!(g.as_slice(), &[1.0, 4.0]);
    }

    #[test]
    fn rejects_non_psd_and_asymmetric() {
        assert!(MeanQuadratic::diagonal(&[1.0, -0.5]).is_err());
        assert!(MeanQuadratic::new(2, vec![1.0, 0.5, 0.0, 1.0]).is_err());
        assert!(MeanQuadratic::new(2, vec![1.0, 2.0, 2.0, 1.0]).is_err());
        assert!(MeanQuadratic::new(2, vec![1.0; 3]).is_err());
        // semidefinite is fine
        assert!(MeanQuadratic::new(2, vec![1.0, 1.0, 1.0, 1.0]).is_ok());
    }

    #[test]
    fn pl_mu_is_smallest_eigenvalue() {
        let m = MeanQuadratic::new(2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        assert!((m.pl_mu() - 1.0).abs() < 1e-12);
        assert!((m.trace() - 4.0).abs() < 1e-15);
    }
}

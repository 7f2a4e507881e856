use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::params::ParamVector;

/// Multinomial logistic regression. Parameters are packed as the row-major
/// `classes × input_dim` weight matrix followed by `classes` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub input_dim: usize,
    pub classes: usize,
    pub l2: f64,
}

impl LogisticRegression {
    pub fn new(input_dim: usize, classes: usize, l2: f64) -> Self {
        Self { input_dim, classes, l2 }
    }

    pub fn num_params(&self) -> usize {
        self.classes * (self.input_dim + 1)
    }

    pub(crate) fn logits(&self, w: &[f64], x: &[f64]) -> Vec<f64> {
        let (weights, biases) = w.split_at(self.classes * self.input_dim);
        weights
            .chunks_exact(self.input_dim)
            .zip(biases)
            .map(|(row, b)| crate::params::dot(row, x) + b)
            .collect()
    }

    pub(crate) fn loss(&self, w: &[f64], x: &[f64], class: usize) -> Result<f64> {
        let mut z = self.logits(w, x);
        Ok(super::softmax_cross_entropy(&mut z, class))
    }

    pub(crate) fn grad_into(&self, w: &[f64], x: &[f64], class: usize, out: &mut [f64]) -> Result<f64> {
        let mut p = self.logits(w, x);
        let loss = super::softmax_cross_entropy(&mut p, class);
        p[class] -= 1.0;
        let (gw, gb) = out.split_at_mut(self.classes * self.input_dim);
        for ((row, b), delta) in gw.chunks_exact_mut(self.input_dim).zip(gb).zip(&p) {
            for (g, xi) in row.iter_mut().zip(x) {
                *g = delta * xi;
            }
            *b = *delta;
        }
        Ok(loss)
    }

    pub(crate) fn init_params(&self, rng: &mut ChaCha8Rng) -> ParamVector {
        let mut w = ParamVector::zeros(self.num_params());
        let bound = 1.0 / (self.input_dim.max(1) as f64).sqrt();
        super::uniform_fill(rng, &mut w, bound);
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Model, Sample};

    fn direct_softmax_ce(logits: &[f64], class: usize) -> f64 {
        let denom: f64 = logits.iter().map(|z| z.exp()).sum();
        -(logits[class].exp() / denom).ln()
    }

    #[test]
    fn zero_weights_give_log_k() {
        for k in [2usize, 3, 7] {
            let m = Model::Logistic(LogisticRegression::new(4, k, 0.0));
            let w = ParamVector::zeros(m.num_params());
            let s = Sample::labeled(vec![0.3, -1.0, 2.0, 0.5], k - 1);
            let loss = m.per_sample_loss(&w, &s).unwrap();
            assert!((loss - direct_softmax_ce(&vec![0.0; k], 0)).abs() < 1e-14);
            assert!((loss - (k as f64).ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn loss_matches_direct_evaluation() {
        let lr = LogisticRegression::new(3, 4, 0.0);
        let m = Model::Logistic(lr.clone());
        let w = m.init_params(9);
        let x = vec![0.5, -0.25, 1.5];
        let logits = lr.logits(&w, &x);
        let s = Sample::labeled(x, 2);
        assert!((m.per_sample_loss(&w, &s).unwrap() - direct_softmax_ce(&logits, 2)).abs() < 1e-13);
    }

    #[test]
    fn gradient_packing_order() {
        // With zero weights and two classes the softmax is uniform, so the
        // gradient rows are ±0.5·x and the biases ±0.5.
        let m = Model::Logistic(LogisticRegression::new(2, 2, 0.0));
        let w = ParamVector::zeros(6);
        let g = m.per_sample_grad(&w, &Sample::labeled(vec![2.0, 4.0], 0)).unwrap();
        assert_eq!(g.as_slice(), &[-1.0, -2.0, 1.0, 2.0, -0.5, 0.5]);
    }
}

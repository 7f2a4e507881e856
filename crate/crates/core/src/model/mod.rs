//! Differentiable model families with per-sample losses, exact gradients and
//! curvature probes.
//!
//! Every family exposes the same surface through [`Model`]: the per-sample
//! objective `f_i(w)` (including any L2 term), its analytic gradient, and a
//! regularization-free data loss used for reporting.

mod batch;
mod gradcheck;
mod logistic;
mod mlp;
mod quadratic;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::params::ParamVector;

pub(crate) use batch::map_reduce;
pub use batch::{batch_grad, batch_grad_sum, batch_loss, hvp, lambda_max, power_iteration, EigenEstimate, HVP_FD_STEP};
pub use gradcheck::{check_grad_fd, fd_gradient, relative_error, GRAD_FD_STEP, REL_ERR_FLOOR};
pub use logistic::LogisticRegression;
pub use mlp::{Activation, TwoLayerMlp};
pub use quadratic::MeanQuadratic;

/// Supervision attached to a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    Class(usize),
    /// Quadratic samples carry their center in `x` and need no label.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: Target,
}

impl Sample {
    pub fn new(x: Vec<f64>, y: Target) -> Self {
        Self { x, y }
    }

    pub fn labeled(x: Vec<f64>, class: usize) -> Self {
        Self {
            x,
            y: Target::Class(class),
        }
    }

    pub fn center(c: Vec<f64>) -> Self {
        Self { x: c, y: Target::None }
    }

    pub(crate) fn class(&self, classes: usize) -> Result<usize> {
        match self.y {
            Target::Class(k) if k < classes => Ok(k),
            Target::Class(k) => Err(Error::invalid(format!(
                "class index {k} out of range for {classes} classes"
            ))),
            Target::None => Err(Error::invalid("classification model needs a labeled sample")),
        }
    }
}

/// P-L constant of a loss family. Named `pl_mu` to keep it apart from the
/// snapshot gradient used by the optimizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlConstant {
    pub pl_mu: f64,
}

impl PlConstant {
    pub fn new(pl_mu: f64) -> Result<Self> {
        if !(pl_mu > 0.0 && pl_mu.is_finite()) {
            return Err(Error::invalid(format!("pl_mu must be positive, got {pl_mu}")));
        }
        Ok(Self { pl_mu })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    MeanQuadratic(MeanQuadratic),
    Logistic(LogisticRegression),
    Mlp(TwoLayerMlp),
}

impl Model {
    pub fn num_params(&self) -> usize {
        match self {
            Model::MeanQuadratic(m) => m.dim(),
            Model::Logistic(m) => m.num_params(),
            Model::Mlp(m) => m.num_params(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Model::MeanQuadratic(m) => m.dim(),
            Model::Logistic(m) => m.input_dim,
            Model::Mlp(m) => m.input_dim,
        }
    }

    /// Number of classes, or `None` for the quadratic family.
    pub fn classes(&self) -> Option<usize> {
        match self {
            Model::MeanQuadratic(_) => None,
            Model::Logistic(m) => Some(m.classes),
            Model::Mlp(m) => Some(m.classes),
        }
    }

    pub fn l2(&self) -> f64 {
        match self {
            Model::MeanQuadratic(_) => 0.0,
            Model::Logistic(m) => m.l2,
            Model::Mlp(m) => m.l2,
        }
    }

    /// Replace the L2 coefficient. The quadratic family has none and is
    /// returned unchanged.
    pub fn with_l2(mut self, l2: f64) -> Self {
        match &mut self {
            Model::MeanQuadratic(_) => {}
            Model::Logistic(m) => m.l2 = l2,
            Model::Mlp(m) => m.l2 = l2,
        }
        self
    }

    /// Seeded initial parameters.
    ///
    /// Layered models draw every weight and bias uniformly from
    /// `±1/sqrt(fan_in)`; the quadratic family draws from `[-1, 1]`.
    pub fn init_params(&self, seed: u64) -> ParamVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match self {
            Model::MeanQuadratic(m) => m.init_params(&mut rng),
            Model::Logistic(m) => m.init_params(&mut rng),
            Model::Mlp(m) => m.init_params(&mut rng),
        }
    }

    fn check(&self, w: &[f64], s: &Sample) -> Result<()> {
        ensure_len("parameter vector", self.num_params(), w.len())?;
        ensure_len("sample features", self.input_dim(), s.x.len())
    }

    fn l2_term(&self, w: &[f64]) -> f64 {
        let l2 = self.l2();
        if l2 == 0.0 {
            0.0
        } else {
            0.5 * l2 * crate::params::dot(w, w)
        }
    }

    /// `f_i(w)`: the training objective on one sample, L2 term included.
    pub fn per_sample_loss(&self, w: &[f64], s: &Sample) -> Result<f64> {
        Ok(self.data_loss(w, s)? + self.l2_term(w))
    }

    /// Loss without the regularization term (what gets reported as
    /// train/test loss).
    pub fn data_loss(&self, w: &[f64], s: &Sample) -> Result<f64> {
        self.check(w, s)?;
        match self {
            Model::MeanQuadratic(m) => Ok(m.loss(w, &s.x)),
            Model::Logistic(m) => m.loss(w, &s.x, s.class(m.classes)?),
            Model::Mlp(m) => m.loss(w, &s.x, s.class(m.classes)?),
        }
    }

    /// `∇f_i(w)`.
    pub fn per_sample_grad(&self, w: &[f64], s: &Sample) -> Result<ParamVector> {
        let mut out = ParamVector::zeros(self.num_params());
        self.grad_into(w, s, &mut out)?;
        Ok(out)
    }

    /// Writes `∇f_i(w)` into `out` (overwriting it) and returns `f_i(w)`.
    pub fn grad_into(&self, w: &[f64], s: &Sample, out: &mut [f64]) -> Result<f64> {
        self.check(w, s)?;
        ensure_len("gradient buffer", w.len(), out.len())?;
        let loss = match self {
            Model::MeanQuadratic(m) => m.grad_into(w, &s.x, out),
            Model::Logistic(m) => m.grad_into(w, &s.x, s.class(m.classes)?, out)?,
            Model::Mlp(m) => m.grad_into(w, &s.x, s.class(m.classes)?, out)?,
        };
        let l2 = self.l2();
        if l2 != 0.0 {
            crate::params::axpy(out, l2, w);
        }
        Ok(loss + self.l2_term(w))
    }

    /// Arg-max class prediction; `None` for the quadratic family.
    pub fn predict(&self, w: &[f64], x: &[f64]) -> Result<Option<usize>> {
        ensure_len("parameter vector", self.num_params(), w.len())?;
        ensure_len("sample features", self.input_dim(), x.len())?;
        let logits = match self {
            Model::MeanQuadratic(_) => return Ok(None),
            Model::Logistic(m) => m.logits(w, x),
            Model::Mlp(m) => m.logits(w, x),
        };
        Ok(Some(argmax(&logits)))
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Softmax cross-entropy of `logits` against `class`. Overwrites `logits`
/// with the softmax probabilities.
pub(crate) fn softmax_cross_entropy(logits: &mut [f64], class: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let shifted = logits[class] - max;
    let mut sum = 0.0;
    for z in logits.iter_mut() {
        *z = (*z - max).exp();
        sum += *z;
    }
    for p in logits.iter_mut() {
        *p /= sum;
    }
    sum.ln() - shifted
}

/// Uniform draws in `±bound`.
pub(crate) fn uniform_fill(rng: &mut ChaCha8Rng, out: &mut [f64], bound: f64) {
    use rand::Rng;
    for v in out.iter_mut() {
        *v = rng.random_range(-bound..=bound);
    }
}

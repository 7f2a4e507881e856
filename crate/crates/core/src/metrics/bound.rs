use std::borrow::Borrow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{avg_sq_grad_norm, full_sq_grad_norm, mean_data_loss};
use crate::error::{Error, Result};
use crate::model::{Model, Sample};

/// Which population term enters the right-hand side.
///
/// The two `Exact*` forms are the rigorous chain on a finite population; the
/// `*Approx` forms swap the population quantity for its training estimate
/// and are not guaranteed to hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundForm {
    /// `½μ⁻¹‖∇F(w)‖²` (training gradient in place of the population one).
    TrainGradientApprox,
    /// `½μ⁻¹ E_i‖∇f_i(w)‖²` (training average in place of the population one).
    TrainSquaredNormApprox,
    /// `½μ⁻¹‖∇𝓕(w)‖²`
    ExactPopulationGradient,
    /// `½μ⁻¹ E_𝒟‖∇f_ξ(w)‖²`
    ExactPopulationSquaredNorm,
}

impl BoundForm {
    pub const ALL: [BoundForm; 4] = [
        BoundForm::TrainGradientApprox,
        BoundForm::TrainSquaredNormApprox,
        BoundForm::ExactPopulationGradient,
        BoundForm::ExactPopulationSquaredNorm,
    ];

    pub fn is_exact(self) -> bool {
        matches!(
            self,
            BoundForm::ExactPopulationGradient | BoundForm::ExactPopulationSquaredNorm
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BoundForm::TrainGradientApprox => "train_gradient_approx",
            BoundForm::TrainSquaredNormApprox => "train_squared_norm_approx",
            BoundForm::ExactPopulationGradient => "exact_population_gradient",
            BoundForm::ExactPopulationSquaredNorm => "exact_population_squared_norm",
        }
    }
}

impl fmt::Display for BoundForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train_gradient_approx" => Ok(BoundForm::TrainGradientApprox),
            "train_squared_norm_approx" => Ok(BoundForm::TrainSquaredNormApprox),
            "exact" | "exact_population_gradient" => Ok(BoundForm::ExactPopulationGradient),
            "exact_population_squared_norm" => Ok(BoundForm::ExactPopulationSquaredNorm),
            other => Err(Error::invalid(format!("unknown bound form '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub form: BoundForm,
    /// `|F(w) − 𝓕(w)|`
    pub lhs: f64,
    pub term_avg: f64,
    pub term_pop: f64,
    pub term_min: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluates the generalization bound for a P-L family with constant
/// `pl_mu` on a finite `population`.
///
/// Only the mean-quadratic family is supported: its per-sample minimizers
/// are the centers (with value zero) and the population minimizer is the
/// centroid of the population centers.
pub fn generalization_bound_check<S, P>(
    model: &Model,
    w: &[f64],
    train: &[S],
    population: &[P],
    pl_mu: f64,
    form: BoundForm,
) -> Result<BoundReport>
where
    S: Borrow<Sample> + Sync,
    P: Borrow<Sample> + Sync,
{
    if !(pl_mu > 0.0 && pl_mu.is_finite()) {
        return Err(Error::invalid(format!("pl_mu must be positive, got {pl_mu}")));
    }
    if !matches!(model, Model::MeanQuadratic(_)) {
        return Err(Error::Unsupported(
            "the generalization bound is only checkable for the mean-quadratic family".into(),
        ));
    }
    if model.l2() != 0.0 {
        return Err(Error::Unsupported(
            "the generalization bound assumes an unregularized objective".into(),
        ));
    }
    if train.is_empty() || population.is_empty() {
        return Err(Error::invalid("bound check needs non-empty train and population sets"));
    }

    let half_inv_mu = 0.5 / pl_mu;
    let train_loss = mean_data_loss(model, w, train)?;
    let pop_loss = mean_data_loss(model, w, population)?;
    let lhs = (train_loss - pop_loss).abs();

    let train_avg = avg_sq_grad_norm(model, w, train)?;
    let term_avg = half_inv_mu * train_avg;
    let term_pop = half_inv_mu
        * match form {
            BoundForm::TrainGradientApprox => full_sq_grad_norm(model, w, train)?,
            BoundForm::TrainSquaredNormApprox => train_avg,
            BoundForm::ExactPopulationGradient => full_sq_grad_norm(model, w, population)?,
            BoundForm::ExactPopulationSquaredNorm => avg_sq_grad_norm(model, w, population)?,
        };

    // f_i(w_i*) = 0 for every i, so the mean of |f_i(w_i*) − 𝓕(w_*)| is |𝓕(w_*)|.
    let dim = model.num_params();
    let mut w_star = vec![0.0; dim];
    for p in population {
        for (a, c) in w_star.iter_mut().zip(&p.borrow().x) {
            *a += c;
        }
    }
    let inv = 1.0 / population.len() as f64;
    w_star.iter_mut().for_each(|a| *a *= inv);
    let pop_min = mean_data_loss(model, &w_star, population)?;
    let term_min = pop_min.abs();

    let rhs = term_avg + term_pop + term_min;
    Ok(BoundReport {
        form,
        lhs,
        term_avg,
        term_pop,
        term_min,
        rhs,
        holds: lhs <= rhs,
    })
}

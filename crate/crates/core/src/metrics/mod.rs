//! Generalization and flatness measurements.
//!
//! The two gradient statistics at the center of the analysis are the average
//! squared per-sample gradient norm `E_i‖∇f_i(w)‖²` and the squared norm of
//! the average gradient `‖∇F(w)‖²`. The first bounds the data-relevant
//! sharpness; together they bound the generalization error for P-L losses.

mod bound;
mod sharpness;

use std::borrow::Borrow;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{batch_grad, Model, Sample, Target};

use crate::model::map_reduce;

pub use bound::{generalization_bound_check, BoundForm, BoundReport};
pub use sharpness::{
    data_relevant_sharpness, gaussian_sharpness, gaussian_sharpness_of, sharpness_upper_bound,
    sharpness_upper_bound_with, SharpnessBound, SharpnessEstimate,
};

/// Smoothing window used for the emitted curves.
pub const DEFAULT_SMOOTH_WINDOW: usize = 5;

/// `E_i‖∇f_i(w)‖² = (1/n) Σ_i ‖∇f_i(w)‖²`.
pub fn avg_sq_grad_norm<S: Borrow<Sample> + Sync>(model: &Model, w: &[f64], data: &[S]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("gradient statistics need a non-empty dataset"));
    }
    let sum = map_reduce(data, |s| Ok(model.per_sample_grad(w, s)?.norm_sq()))?;
    Ok(sum / data.len() as f64)
}

/// `‖∇F(w)‖²` of the dataset-mean gradient.
pub fn full_sq_grad_norm<S: Borrow<Sample> + Sync>(model: &Model, w: &[f64], data: &[S]) -> Result<f64> {
    Ok(batch_grad(model, w, data)?.norm_sq())
}

/// Mean regularization-free loss.
pub fn mean_data_loss<S: Borrow<Sample> + Sync>(model: &Model, w: &[f64], data: &[S]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("loss needs a non-empty dataset"));
    }
    Ok(map_reduce(data, |s| model.data_loss(w, s))? / data.len() as f64)
}

/// Fraction of arg-max-correct predictions; NaN for unlabeled families.
pub fn accuracy<S: Borrow<Sample> + Sync>(model: &Model, w: &[f64], data: &[S]) -> Result<f64> {
    if model.classes().is_none() {
        return Ok(f64::NAN);
    }
    let correct = map_reduce(data, |s| {
        let hit = match (model.predict(w, &s.x)?, s.y) {
            (Some(p), Target::Class(k)) => p == k,
            _ => false,
        };
        Ok(if hit { 1.0 } else { 0.0 })
    })?;
    Ok(correct / data.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapMetrics {
    pub train_loss: f64,
    pub test_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    /// test loss − train loss
    pub loss_gap: f64,
    /// train accuracy − test accuracy
    pub acc_gap: f64,
}

/// Losses exclude the regularization term.
pub fn gap_metrics(model: &Model, w: &[f64], train: &Dataset, test: &Dataset) -> Result<GapMetrics> {
    let train_loss = mean_data_loss(model, w, train.samples())?;
    let test_loss = mean_data_loss(model, w, test.samples())?;
    let train_acc = accuracy(model, w, train.samples())?;
    let test_acc = accuracy(model, w, test.samples())?;
    Ok(GapMetrics {
        train_loss,
        test_loss,
        train_acc,
        test_acc,
        loss_gap: test_loss - train_loss,
        acc_gap: train_acc - test_acc,
    })
}

/// Trailing moving average; position `i` averages the last
/// `min(i + 1, window)` values.
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::invalid("moving average window must be at least 1"));
    }
    Ok((0..series.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            let part = &series[lo..=i];
            part.iter().sum::<f64>() / part.len() as f64
        })
        .collect())
}

/// One evaluation point of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub epoch: usize,
    pub lr: f64,
    pub grad_evals: u64,
    pub train_loss: f64,
    pub test_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub avg_sq_grad_norm: f64,
    pub full_sq_grad_norm: f64,
    pub loss_gap: f64,
    pub acc_gap: f64,
}

impl MetricRecord {
    /// Evaluates every metric at `w`. The two gradient statistics use
    /// `grad_subset` (indices into `train`) when given, else all of `train`.
    #[allow(clippy::too_many_arguments)]
    pub fn evaluate(
        model: &Model,
        w: &[f64],
        train: &Dataset,
        test: &Dataset,
        grad_subset: Option<&[usize]>,
        epoch: usize,
        lr: f64,
        grad_evals: u64,
    ) -> Result<Self> {
        let gaps = gap_metrics(model, w, train, test)?;
        let (avg, full) = match grad_subset {
            Some(idx) => {
                let sub = train.select(idx);
                (avg_sq_grad_norm(model, w, &sub)?, full_sq_grad_norm(model, w, &sub)?)
            }
            None => (
                avg_sq_grad_norm(model, w, train.samples())?,
                full_sq_grad_norm(model, w, train.samples())?,
            ),
        };
        Ok(Self {
            epoch,
            lr,
            grad_evals,
            train_loss: gaps.train_loss,
            test_loss: gaps.test_loss,
            train_acc: gaps.train_acc,
            test_acc: gaps.test_acc,
            avg_sq_grad_norm: avg,
            full_sq_grad_norm: full,
            loss_gap: gaps.loss_gap,
            acc_gap: gaps.acc_gap,
        })
    }
}

use super::{check_lr, OptimizerState, SignVariant, SnapshotCaching};
use crate::data::{BatchPlan, Dataset};
use crate::error::{Error, Result};
use crate::model::{batch_grad, batch_grad_sum, Model};
use crate::params::ParamVector;

/// Everything an observer may want to see about one inner update.
#[derive(Debug)]
pub struct InnerStep<'a> {
    /// 1-based inner step index.
    pub t: usize,
    pub slice: &'a [usize],
    /// `w_{t−1}`
    pub w_prev: &'a [f64],
    /// Slice-mean gradient at `w_{t−1}`.
    pub current_grad: &'a [f64],
    /// Slice-mean gradient at the snapshot minus `μ`.
    pub control_variate: &'a [f64],
    /// The update direction; `w_t = w_{t−1} − lr·term`.
    pub term: &'a [f64],
}

/// One outer iteration of B-SVRG (`Minus`) or BP-SVRG (`Plus`).
pub fn svrg_outer_iteration(
    state: &mut OptimizerState,
    model: &Model,
    data: &Dataset,
    plan: &BatchPlan,
    lr: f64,
    variant: SignVariant,
    caching: SnapshotCaching,
) -> Result<()> {
    svrg_outer_iteration_traced(state, model, data, plan, lr, variant, caching, |_| {})
}

/// [`svrg_outer_iteration`] with a callback invoked after every inner update.
///
/// The snapshot is the current `w`; `μ` is the mean gradient there over the
/// whole outer batch. The outer-batch pass sums gradients slice by slice (the
/// remainder last), so with caching on each slice's snapshot gradient is the
/// same reduction a fresh evaluation would produce.
#[allow(clippy::too_many_arguments)]
pub fn svrg_outer_iteration_traced<F>(
    state: &mut OptimizerState,
    model: &Model,
    data: &Dataset,
    plan: &BatchPlan,
    lr: f64,
    variant: SignVariant,
    caching: SnapshotCaching,
    mut observe: F,
) -> Result<()>
where
    F: FnMut(&InnerStep<'_>),
{
    check_lr(lr)?;
    if plan.inner_slice_count() == 0 {
        return Err(Error::invalid("batch plan has no inner slices"));
    }
    if let Some(&bad) = plan.outer().iter().find(|&&i| i >= data.len()) {
        return Err(Error::invalid(format!(
            "batch index {bad} out of range for {} samples",
            data.len()
        )));
    }

    let snapshot = state.w.clone();
    let mut total = ParamVector::zeros(snapshot.len());
    let mut cached = Vec::new();
    for slice in plan.slices() {
        let sum = batch_grad_sum(model, &snapshot, &data.select(slice))?;
        total.axpy(1.0, &sum);
        if caching == SnapshotCaching::On {
            cached.push(sum);
        }
    }
    if !plan.remainder().is_empty() {
        let sum = batch_grad_sum(model, &snapshot, &data.select(plan.remainder()))?;
        total.axpy(1.0, &sum);
    }
    let mut mu = total;
    mu.scale(1.0 / plan.outer_size() as f64);
    state.grad_evals += plan.outer_size() as u64;

    let sign = match variant {
        SignVariant::Minus => -1.0,
        SignVariant::Plus => 1.0,
    };
    for (t, slice) in plan.slices().enumerate() {
        let batch = data.select(slice);
        let current = batch_grad(model, &state.w, &batch)?;
        state.grad_evals += slice.len() as u64;
        let mut snap_grad = match caching {
            SnapshotCaching::On => {
                let mut g = cached[t].clone();
                g.scale(1.0 / slice.len() as f64);
                g
            }
            SnapshotCaching::Off => {
                state.grad_evals += slice.len() as u64;
                batch_grad(model, &snapshot, &batch)?
            }
        };
        // The term is formed as (g_cur ∓ g_snap) ± μ rather than g_cur ∓ (g_snap − μ):
        // at t = 1, where g_cur and g_snap agree bitwise, B-SVRG then yields
        // exactly μ and BP-SVRG exactly 2·g_snap − μ.
        let mut term = current.clone();
        term.axpy(sign, &snap_grad);
        term.axpy(-sign, &mu);
        // control variate ∇f_Ĩ(w̃) − μ
        snap_grad.axpy(-1.0, &mu);
        let control = snap_grad;

        let w_prev = state.w.clone();
        state.w.axpy(-lr, &term);
        observe(&InnerStep {
            t: t + 1,
            slice,
            w_prev: &w_prev,
            current_grad: &current,
            control_variate: &control,
            term: &term,
        });
    }
    state.snapshot = snapshot;
    state.mu = mu;
    Ok(())
}

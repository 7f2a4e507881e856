use std::borrow::Borrow;

use super::{check_lr, OptimizerState};
use crate::data::{BatchPlan, Dataset};
use crate::error::{ensure_len, Error, Result};
use crate::model::{batch_grad, batch_loss, Model, Sample};

/// One (momentum) SGD step on the batch-mean gradient `g`.
///
/// * `momentum == 0`: `w ← w − lr·g`
/// * heavy ball: `v ← m·v + g`, `w ← w − lr·v`
/// * Nesterov (Sutskever form, no dampening): `v ← m·v + g`,
///   `w ← w − lr·(g + m·v)`
pub fn sgd_step<S: Borrow<Sample> + Sync>(
    state: &mut OptimizerState,
    model: &Model,
    batch: &[S],
    lr: f64,
    momentum: f64,
    nesterov: bool,
) -> Result<()> {
    check_lr(lr)?;
    if !(0.0..1.0).contains(&momentum) {
        return Err(Error::invalid(format!("momentum must lie in [0, 1), got {momentum}")));
    }
    ensure_len("parameter vector", model.num_params(), state.w.len())?;
    let g = batch_grad(model, &state.w, batch)?;
    state.grad_evals += batch.len() as u64;
    if momentum == 0.0 {
        state.w.axpy(-lr, &g);
        return Ok(());
    }
    for (v, gi) in state.velocity.iter_mut().zip(g.iter()) {
        *v = momentum * *v + gi;
    }
    if nesterov {
        for ((w, v), gi) in state.w.iter_mut().zip(state.velocity.iter()).zip(g.iter()) {
            *w -= lr * (gi + momentum * v);
        }
    } else {
        state.w.axpy(-lr, &state.velocity);
    }
    Ok(())
}

/// Modified-SGD outer iteration: a loss-only pass over the inner slices
/// (kept for cost parity; it leaves `w` untouched), then plain SGD steps over
/// the same slices.
pub fn modified_sgd_outer_iteration(
    state: &mut OptimizerState,
    model: &Model,
    data: &Dataset,
    plan: &BatchPlan,
    lr: f64,
) -> Result<()> {
    check_lr(lr)?;
    if plan.inner_slice_count() == 0 {
        return Err(Error::invalid("batch plan has no inner slices"));
    }
    for slice in plan.slices() {
        batch_loss(model, &state.w, &data.select(slice))?;
        state.loss_evals += slice.len() as u64;
    }
    for slice in plan.slices() {
        sgd_step(state, model, &data.select(slice), lr, 0.0, false)?;
    }
    Ok(())
}

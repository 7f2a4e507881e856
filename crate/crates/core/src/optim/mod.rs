//! Optimizer step rules: SGD with optional heavy-ball or Nesterov momentum,
//! the B-SVRG / BP-SVRG outer iteration, and Modified-SGD.

mod schedule;
mod sgd;
mod svrg;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamVector;

pub use schedule::Schedule;
pub use sgd::{modified_sgd_outer_iteration, sgd_step};
pub use svrg::{svrg_outer_iteration, svrg_outer_iteration_traced, InnerStep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sgd,
    Momentum,
    Nag,
    Bsvrg,
    Bpsvrg,
    ModifiedSgd,
}

impl Method {
    pub fn is_svrg_family(self) -> bool {
        matches!(self, Method::Bsvrg | Method::Bpsvrg)
    }

    pub fn variant(self) -> Option<SignVariant> {
        match self {
            Method::Bsvrg => Some(SignVariant::Minus),
            Method::Bpsvrg => Some(SignVariant::Plus),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Sgd => "sgd",
            Method::Momentum => "momentum",
            Method::Nag => "nag",
            Method::Bsvrg => "bsvrg",
            Method::Bpsvrg => "bpsvrg",
            Method::ModifiedSgd => "modified_sgd",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sgd" => Method::Sgd,
            "momentum" => Method::Momentum,
            "nag" => Method::Nag,
            "bsvrg" => Method::Bsvrg,
            "bpsvrg" => Method::Bpsvrg,
            "modified_sgd" => Method::ModifiedSgd,
            other => return Err(Error::invalid(format!("unknown method `{other}`"))),
        })
    }
}

/// Sign of the control variate in the inner update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignVariant {
    /// `∇f(w_{t−1}) − (∇f(w̃) − μ)`: B-SVRG.
    Minus,
    /// `∇f(w_{t−1}) + (∇f(w̃) − μ)`: BP-SVRG.
    Plus,
}

/// Whether per-slice snapshot gradients from the `μ` pass are kept and reused
/// in the inner steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnapshotCaching {
    #[default]
    On,
    Off,
}

impl SnapshotCaching {
    pub fn from_flag(on: bool) -> Self {
        if on {
            SnapshotCaching::On
        } else {
            SnapshotCaching::Off
        }
    }
}

/// Mutable state of one optimizer run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    method: Method,
    pub(crate) w: ParamVector,
    pub(crate) snapshot: ParamVector,
    pub(crate) mu: ParamVector,
    pub(crate) velocity: ParamVector,
    pub(crate) epoch: usize,
    pub(crate) grad_evals: u64,
    pub(crate) loss_evals: u64,
}

impl OptimizerState {
    pub fn new(method: Method, w: ParamVector) -> Self {
        let d = w.len();
        Self {
            method,
            snapshot: w.clone(),
            w,
            mu: ParamVector::zeros(d),
            velocity: ParamVector::zeros(d),
            epoch: 0,
            grad_evals: 0,
            loss_evals: 0,
        }
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn w(&self) -> &ParamVector {
        &self.w
    }

    /// Snapshot point of the latest outer iteration.
    pub fn snapshot(&self) -> &ParamVector {
        &self.snapshot
    }

    /// Snapshot gradient `μ` of the latest outer iteration.
    pub fn mu(&self) -> &ParamVector {
        &self.mu
    }

    pub fn velocity(&self) -> &ParamVector {
        &self.velocity
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn advance_epoch(&mut self) {
        self.epoch += 1;
    }

    /// Per-sample gradient evaluations so far.
    pub fn grad_evals(&self) -> u64 {
        self.grad_evals
    }

    /// Per-sample loss-only evaluations (the Modified-SGD statistics pass).
    pub fn loss_evals(&self) -> u64 {
        self.loss_evals
    }
}

/// Per-sample gradient evaluations of one outer iteration with outer batch
/// `B` and inner batch `b`.
///
/// SVRG family: `B + 2·b·⌊B/b⌋` without snapshot caching, `B + b·⌊B/b⌋`
/// with it. Every other method: `b·⌊B/b⌋`.
pub fn grad_evals_for(method: Method, outer: usize, inner: usize, caching: SnapshotCaching) -> u64 {
    assert!(inner >= 1 && outer >= inner, "need B >= b >= 1");
    let updated = (inner * (outer / inner)) as u64;
    if method.is_svrg_family() {
        match caching {
            SnapshotCaching::On => outer as u64 + updated,
            SnapshotCaching::Off => outer as u64 + 2 * updated,
        }
    } else {
        updated
    }
}

pub(crate) fn check_lr(lr: f64) -> Result<()> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::invalid(format!("learning rate must be positive, got {lr}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_counts() {
        assert_eq!(grad_evals_for(Method::Bsvrg, 4, 2, SnapshotCaching::Off), 12);
        assert_eq!(grad_evals_for(Method::Bpsvrg, 4, 2, SnapshotCaching::On), 8);
        assert_eq!(grad_evals_for(Method::Sgd, 4, 2, SnapshotCaching::On), 4);
        assert_eq!(grad_evals_for(Method::Nag, 5, 2, SnapshotCaching::Off), 4);
        assert_eq!(grad_evals_for(Method::Bsvrg, 5, 2, SnapshotCaching::On), 9);
    }

    #[test]
    fn method_names_round_trip() {
        for m in [
            Method::Sgd,
            Method::Momentum,
            Method::Nag,
            Method::Bsvrg,
            Method::Bpsvrg,
            Method::ModifiedSgd,
        ] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("adam".parse::<Method>().is_err());
        assert_eq!(Method::Bsvrg.variant(), Some(SignVariant::Minus));
        assert_eq!(Method::Bpsvrg.variant(), Some(SignVariant::Plus));
        assert_eq!(Method::Nag.variant(), None);
    }
}

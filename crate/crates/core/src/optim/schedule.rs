use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step-decay learning-rate schedule.
///
/// The milestone at fraction `p` of `total_epochs` divides the rate by
/// `factor` from epoch `⌈p·T⌉` onward (epochs are 0-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub initial_lr: f64,
    pub milestones: Vec<f64>,
    pub factor: f64,
    pub total_epochs: usize,
}

/// Guards `⌈p·T⌉` against products like `0.6 · 100` landing a hair above an
/// integer.
const CEIL_SLACK: f64 = 1e-9;

impl Schedule {
    pub fn new(initial_lr: f64, milestones: Vec<f64>, factor: f64, total_epochs: usize) -> Result<Self> {
        if !(initial_lr > 0.0 && initial_lr.is_finite()) {
            return Err(Error::invalid(format!("initial lr must be positive, got {initial_lr}")));
        }
        if total_epochs == 0 {
            return Err(Error::invalid("schedule needs at least one epoch"));
        }
        if milestones.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return Err(Error::invalid("milestones must lie strictly inside (0, 1)"));
        }
        if milestones.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("milestones must be strictly increasing"));
        }
        if !milestones.is_empty() && !(factor > 1.0 && factor.is_finite()) {
            return Err(Error::invalid(format!("decay factor must exceed 1, got {factor}")));
        }
        Ok(Self {
            initial_lr,
            milestones,
            factor,
            total_epochs,
        })
    }

    pub fn constant(lr: f64, total_epochs: usize) -> Result<Self> {
        Self::new(lr, Vec::new(), 1.0, total_epochs)
    }

    /// First epoch at which each milestone is in effect.
    pub fn milestone_epochs(&self) -> Vec<usize> {
        self.milestones
            .iter()
            .map(|p| (p * self.total_epochs as f64 - CEIL_SLACK).ceil() as usize)
            .collect()
    }

    pub fn lr_at_epoch(&self, epoch: usize) -> Result<f64> {
        if epoch >= self.total_epochs {
            return Err(Error::invalid(format!(
                "epoch {epoch} outside schedule of {} epochs",
                self.total_epochs
            )));
        }
        let passed = self.milestone_epochs().iter().filter(|&&m| epoch >= m).count();
        Ok(self.initial_lr / self.factor.powi(passed as i32))
    }
}

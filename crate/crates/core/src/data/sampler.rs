use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// One outer batch `I` and the inner slice width `b`.
///
/// Inner slice `t` (1-based) covers outer positions `[(t−1)·b, t·b)`; the
/// trailing `B mod b` positions belong to no slice but still count towards
/// the snapshot gradient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPlan {
    outer: Vec<usize>,
    inner: usize,
}

impl BatchPlan {
    pub fn new(outer: Vec<usize>, inner: usize) -> Result<Self> {
        if inner == 0 {
            return Err(Error::invalid("inner batch size must be at least 1"));
        }
        if outer.len() < inner {
            return Err(Error::invalid(format!(
                "outer batch size {} is smaller than inner batch size {inner}",
                outer.len()
            )));
        }
        let mut seen = outer.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("outer batch indices must be distinct"));
        }
        Ok(Self { outer, inner })
    }

    pub fn outer(&self) -> &[usize] {
        &self.outer
    }

    /// `B`
    pub fn outer_size(&self) -> usize {
        self.outer.len()
    }

    /// `b`
    pub fn inner_size(&self) -> usize {
        self.inner
    }

    /// `⌊B/b⌋`
    pub fn inner_slice_count(&self) -> usize {
        self.outer.len() / self.inner
    }

    /// Outer positions past the last full slice.
    pub fn remainder(&self) -> &[usize] {
        &self.outer[self.inner_slice_count() * self.inner..]
    }

    pub fn slices(&self) -> std::slice::ChunksExact<'_, usize> {
        self.outer.chunks_exact(self.inner)
    }
}

/// Draws `B` distinct indices from `0..n` uniformly without replacement, in
/// random order.
pub fn sample_outer_batch<R: Rng + ?Sized>(n: usize, outer: usize, inner: usize, rng: &mut R) -> Result<BatchPlan> {
    if outer == 0 || outer > n {
        return Err(Error::invalid(format!(
            "outer batch size must lie in [1, {n}], got {outer}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let (chosen, _) = idx.partial_shuffle(rng, outer);
    BatchPlan::new(chosen.to_vec(), inner)
}

/// The `⌊B/b⌋` contiguous inner slices of a plan, in order.
pub fn inner_slices(plan: &BatchPlan) -> Vec<Vec<usize>> {
    plan.slices().map(<[usize]>::to_vec).collect()
}

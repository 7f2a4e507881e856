//! Datasets, synthetic generators, CSV ingestion and the outer-batch /
//! inner-slice sampling used by the snapshot optimizers.

mod csv;
mod generate;
mod sampler;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Sample, Target};

pub use self::csv::{load_csv, LabelColumn};
pub use generate::{flip_labels, gen_blobs, gen_quadratic_family, CurvatureSpec};
pub use sampler::{inner_slices, sample_outer_batch, BatchPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Test,
    Population,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    role: Role,
}

impl Dataset {
    /// Rejects empty sample lists and mixed feature dimensions.
    pub fn new(samples: Vec<Sample>, role: Role) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::invalid("dataset must not be empty"));
        };
        let dim = first.x.len();
        if let Some(i) = samples.iter().position(|s| s.x.len() != dim) {
            return Err(Error::invalid(format!(
                "sample {i} has {} features, expected {dim}",
                samples[i].x.len()
            )));
        }
        Ok(Self { samples, role })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].x.len()
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn get(&self, i: usize) -> &Sample {
        &self.samples[i]
    }

    /// Borrowed view of the samples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Vec<&Sample> {
        indices.iter().map(|&i| &self.samples[i]).collect()
    }

    /// Subset by index, as an owned dataset with the same role.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        Dataset::new(self.select(indices).into_iter().cloned().collect(), self.role)
    }

    /// One more than the largest class label, or `None` when unlabeled.
    pub fn class_count(&self) -> Option<usize> {
        self.samples
            .iter()
            .filter_map(|s| match s.y {
                Target::Class(k) => Some(k + 1),
                Target::None => None,
            })
            .max()
    }

    /// Seeded shuffle-and-cut into train and test parts.
    pub fn split(&self, spec: &SplitSpec) -> Result<(Dataset, Option<Dataset>)> {
        if !(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0) {
            return Err(Error::invalid(format!(
                "train fraction must lie in (0, 1], got {}",
                spec.train_fraction
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
        let n_train = ((self.len() as f64 * spec.train_fraction).round() as usize).clamp(1, self.len());
        let (tr, te) = order.split_at(n_train);
        let train = self.subset(tr)?.with_role(Role::Train);
        let test = if te.is_empty() {
            None
        } else {
            Some(self.subset(te)?.with_role(Role::Test))
        };
        Ok((train, test))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

/// Per-feature standardization fitted on one dataset (the training set) and
/// applied to any other.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation per feature. Constant features
    /// get a unit scale so they map to zero.
    pub fn fit(data: &Dataset) -> Self {
        let d = data.dim();
        let n = data.len() as f64;
        let mut mean = vec![0.0; d];
        for s in data.samples() {
            crate::params::axpy(&mut mean, 1.0, &s.x);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for s in data.samples() {
            for ((v, x), m) in var.iter_mut().zip(&s.x).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, data: &mut Dataset) -> Result<()> {
        crate::error::ensure_len("standardized features", self.mean.len(), data.dim())?;
        for s in &mut data.samples {
            for ((x, m), sd) in s.x.iter_mut().zip(&self.mean).zip(&self.std) {
                *x = (*x - m) / sd;
            }
        }
        Ok(())
    }
}

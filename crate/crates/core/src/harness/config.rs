use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::CurvatureSpec;
use crate::error::{Error, Result};
use crate::model::Activation;
use crate::optim::{Method, Schedule, SnapshotCaching};

/// A complete experiment, read from TOML.
///
/// ```toml
/// epochs = 40
/// repeats = 5
///
/// [model]
/// kind = "mlp"
/// hidden = 100
///
/// [data]
/// train_fraction = 0.5
/// [data.source]
/// kind = "blobs"
/// n = 2000
/// dim = 10
/// classes = 4
/// separation = 2.0
///
/// [[method]]
/// name = "bpsvrg"
/// kind = "bpsvrg"
/// lr = 0.1
/// inner_batch = 10
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Base epoch count `N`; SGD-family methods get `round(1.5·N)` when
    /// `budget_match` is on.
    pub epochs: usize,
    /// Explicit seeds. When absent, `seed, seed + 1, …` (`repeats` of them).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeats: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Record metrics every `cadence` epochs.
    #[serde(default = "one")]
    pub cadence: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Reuse the snapshot gradients of the outer-batch pass in the inner
    /// steps.
    #[serde(default = "yes")]
    pub caching: bool,
    #[serde(default = "yes")]
    pub budget_match: bool,
    /// Evaluate the two gradient-norm metrics on a fixed seeded subsample of
    /// this many training points instead of the whole training set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_subsample: Option<usize>,
    pub model: ModelSpec,
    pub data: DataSpec,
    #[serde(rename = "method")]
    pub methods: Vec<MethodSpec>,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Requires the `quadratic` data source.
    Quadratic {
        curvature: CurvatureSpec,
    },
    Logistic,
    Mlp {
        #[serde(default = "default_hidden")]
        hidden: usize,
        #[serde(default)]
        activation: Activation,
    },
}

fn default_hidden() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub source: DataSource,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Fraction of training labels replaced by a uniformly drawn class.
    #[serde(default)]
    pub label_noise: f64,
    /// Dataset seed; defaults to the run seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_train_fraction() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Gaussian class clusters.
    Blobs {
        n: usize,
        dim: usize,
        classes: usize,
        separation: f64,
    },
    /// Centers `c_i ∼ N(0, center_spread²·I)` for the mean-quadratic family.
    Quadratic {
        n: usize,
        dim: usize,
        #[serde(default = "default_spread")]
        center_spread: f64,
    },
    /// Numeric table; features are standardized with training statistics.
    Csv {
        path: PathBuf,
        /// Column index or header name.
        label_column: String,
        #[serde(default = "yes")]
        normalize: bool,
    },
}

fn default_spread() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    /// Used in output file names: ASCII letters, digits, `-` and `_`.
    pub name: String,
    pub kind: Method,
    #[serde(default = "default_lr")]
    pub lr: f64,
    /// Defaults to 0.9 for `momentum`/`nag`; must be 0 for other kinds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<f64>,
    /// `B`; defaults to `2b`. Ignored by `sgd`/`momentum`/`nag`, which sweep a
    /// fresh permutation of the training set every epoch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer_batch: Option<usize>,
    /// `b`
    pub inner_batch: usize,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default)]
    pub schedule: ScheduleSpec,
}

fn default_lr() -> f64 {
    0.1
}

/// Step decay: the learning rate is divided by `factor` at each milestone
/// (a fraction of the run's epochs). No milestones means a constant rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    #[serde(default)]
    pub milestones: Vec<f64>,
    #[serde(default = "default_factor")]
    pub factor: f64,
}

fn default_factor() -> f64 {
    10.0
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self {
            milestones: Vec::new(),
            factor: default_factor(),
        }
    }
}

impl ScheduleSpec {
    /// Decay at 50% and 75% of training.
    pub fn half_three_quarters(factor: f64) -> Self {
        Self {
            milestones: vec![0.5, 0.75],
            factor,
        }
    }

    /// Decay at 40%, 60% and 80% of training.
    pub fn forty_sixty_eighty(factor: f64) -> Self {
        Self {
            milestones: vec![0.4, 0.6, 0.8],
            factor,
        }
    }

    pub fn build(&self, lr: f64, total_epochs: usize) -> Result<Schedule> {
        Schedule::new(lr, self.milestones.clone(), self.factor, total_epochs)
    }
}

impl MethodSpec {
    pub fn momentum(&self) -> f64 {
        self.momentum.unwrap_or(match self.kind {
            Method::Momentum | Method::Nag => 0.9,
            _ => 0.0,
        })
    }

    pub fn outer_batch(&self) -> usize {
        self.outer_batch.unwrap_or(2 * self.inner_batch)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("method '{}': {msg}", self.name)));
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return bad("name must be non-empty ASCII letters, digits, '-' or '_'".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        let m = self.momentum();
        if !(0.0..1.0).contains(&m) {
            return bad(format!("momentum must lie in [0, 1), got {m}"));
        }
        if m != 0.0 && !matches!(self.kind, Method::Momentum | Method::Nag) {
            return bad(format!("momentum is not supported by {}", self.kind));
        }
        if self.inner_batch == 0 {
            return bad("inner_batch must be at least 1".into());
        }
        if self.outer_batch() < self.inner_batch {
            return bad(format!(
                "outer_batch ({}) must be >= inner_batch ({})",
                self.outer_batch(),
                self.inner_batch
            ));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        match self.schedule.build(self.lr, 1) {
            Ok(_) => Ok(()),
            Err(e) => bad(e.to_string()),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        // relative CSV paths are resolved against the config file
        if let DataSource::Csv { path: csv, .. } = &mut cfg.data.source {
            if csv.is_relative() {
                if let Some(dir) = path.parent() {
                    *csv = dir.join(&*csv);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The run seeds, in order.
    pub fn seeds(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (0..self.repeats.unwrap_or(1) as u64)
                .map(|k| self.seed.wrapping_add(k))
                .collect(),
        }
    }

    /// Replaces the seed list by `seed, seed + 1, …`, keeping the repeat
    /// count.
    pub fn override_seed(&mut self, seed: u64) {
        let repeats = self.seeds().len();
        self.seeds = None;
        self.repeats = Some(repeats);
        self.seed = seed;
    }

    /// Epochs actually run by `method`.
    pub fn epochs_for(&self, method: Method) -> usize {
        if self.budget_match {
            super::budget_matched_epochs(self.epochs, method)
        } else {
            self.epochs
        }
    }

    pub fn caching(&self) -> SnapshotCaching {
        SnapshotCaching::from_flag(self.caching)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |msg: String| Err(Error::Config(msg));
        if self.epochs == 0 {
            return cfg_err("epochs must be at least 1".into());
        }
        if self.cadence == 0 {
            return cfg_err("cadence must be at least 1".into());
        }
        if self.repeats == Some(0) {
            return cfg_err("repeats must be at least 1".into());
        }
        let seeds = self.seeds();
        if seeds.is_empty() {
            return cfg_err("at least one seed is required".into());
        }
        if let (Some(s), Some(r)) = (&self.seeds, self.repeats) {
            if s.len() != r {
                return cfg_err(format!("{} seeds listed but repeats = {r}", s.len()));
            }
        }
        if seeds.iter().collect::<HashSet<_>>().len() != seeds.len() {
            return cfg_err("seeds must be distinct".into());
        }
        if self.metric_subsample == Some(0) {
            return cfg_err("metric_subsample must be at least 1".into());
        }
        if self.methods.is_empty() {
            return cfg_err("at least one [[method]] is required".into());
        }
        let mut names = HashSet::new();
        for m in &self.methods {
            m.validate()?;
            if !names.insert(m.name.as_str()) {
                return cfg_err(format!("duplicate method name '{}'", m.name));
            }
        }
        self.validate_model_and_data()
    }

    fn validate_model_and_data(&self) -> Result<()> {
        let cfg_err = |msg: String| Err(Error::Config(msg));
        let d = &self.data;
        if !(d.train_fraction > 0.0 && d.train_fraction <= 1.0) {
            return cfg_err(format!("train_fraction must lie in (0, 1], got {}", d.train_fraction));
        }
        if !(0.0..1.0).contains(&d.label_noise) {
            return cfg_err(format!("label_noise must lie in [0, 1), got {}", d.label_noise));
        }
        match (&self.model, &d.source) {
            (ModelSpec::Quadratic { .. }, DataSource::Quadratic { n, dim, center_spread }) => {
                if *n == 0 || *dim == 0 {
                    return cfg_err("quadratic data needs n >= 1 and dim >= 1".into());
                }
                if !(*center_spread >= 0.0 && center_spread.is_finite()) {
                    return cfg_err(format!("center_spread must be >= 0, got {center_spread}"));
                }
                if d.label_noise != 0.0 {
                    return cfg_err("label_noise needs a classification task".into());
                }
            }
            (ModelSpec::Quadratic { .. }, _) => {
                return cfg_err("the quadratic model needs the quadratic data source".into());
            }
            (_, DataSource::Quadratic { .. }) => {
                return cfg_err("the quadratic data source needs the quadratic model".into());
            }
            (ModelSpec::Mlp { hidden, .. }, _) if *hidden == 0 => {
                return cfg_err("mlp hidden width must be at least 1".into());
            }
            (
                _,
                DataSource::Blobs {
                    n,
                    dim,
                    classes,
                    separation,
                },
            ) => {
                if *dim == 0 || *classes == 0 || n < classes {
                    return cfg_err("blobs need dim >= 1, classes >= 1 and n >= classes".into());
                }
                if !(*separation > 0.0 && separation.is_finite()) {
                    return cfg_err(format!("blob separation must be positive, got {separation}"));
                }
            }
            (_, DataSource::Csv { .. }) => {}
        }
        Ok(())
    }
}

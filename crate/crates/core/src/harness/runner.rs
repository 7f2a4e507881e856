use std::time::Instant;

use log::{info, warn};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{DataSource, ExperimentConfig, MethodSpec, ModelSpec};
use super::derive_seed;
use crate::data::{
    flip_labels, gen_blobs, gen_quadratic_family, load_csv, sample_outer_batch, Dataset, LabelColumn, Role, SplitSpec,
    Standardizer,
};
use crate::error::{Error, Result};
use crate::metrics::MetricRecord;
use crate::model::{LogisticRegression, Model, TwoLayerMlp};
use crate::optim::{
    grad_evals_for, modified_sgd_outer_iteration, sgd_step, svrg_outer_iteration, Method, OptimizerState,
    SnapshotCaching,
};

const DATA_STREAM: u64 = 1;
const SPLIT_STREAM: u64 = 2;
const NOISE_STREAM: u64 = 3;
const INIT_STREAM: u64 = 4;
const SAMPLING_STREAM: u64 = 5;
const SUBSAMPLE_STREAM: u64 = 6;

/// Model and data of one seed, shared by every method arm.
#[derive(Debug, Clone)]
pub struct Task {
    pub model: Model,
    pub train: Dataset,
    pub test: Dataset,
    /// Training indices used for the gradient-norm metrics.
    pub grad_subset: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    /// A non-finite parameter or loss appeared; records stop there.
    Diverged,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Diverged => "diverged",
        }
    }
}

/// One method trained from one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub method: String,
    pub seed: u64,
    pub records: Vec<MetricRecord>,
    pub status: RunStatus,
    pub grad_evals: u64,
}

impl Trajectory {
    pub fn last(&self) -> Option<&MetricRecord> {
        self.records.last()
    }
}

/// `method, best, mean, std, total_grad_evals`. The statistic is final test
/// accuracy (best = max) for classifiers and final test loss (best = min)
/// otherwise; diverged seeds are left out of best/mean/std.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub best: f64,
    pub mean: f64,
    pub std: f64,
    pub total_grad_evals: u64,
}

impl SummaryRow {
    /// `best (mean±std)`
    pub fn display(&self) -> String {
        format!("{:.4} ({:.4}±{:.4})", self.best, self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub config: ExperimentConfig,
    /// Method-major, seeds in config order.
    pub trajectories: Vec<Trajectory>,
}

impl RunResult {
    pub fn summary(&self) -> Vec<SummaryRow> {
        summarize(&self.trajectories)
    }

    /// Methods for which every seed diverged.
    pub fn fully_diverged(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in &self.trajectories {
            if out.contains(&t.method) {
                continue;
            }
            if self
                .trajectories
                .iter()
                .filter(|u| u.method == t.method)
                .all(|u| u.status == RunStatus::Diverged)
            {
                out.push(t.method.clone());
            }
        }
        out
    }
}

/// Per-method summary rows, methods in order of first appearance.
pub fn summarize(trajectories: &[Trajectory]) -> Vec<SummaryRow> {
    let mut methods: Vec<&str> = Vec::new();
    for t in trajectories {
        if !methods.contains(&t.method.as_str()) {
            methods.push(&t.method);
        }
    }
    methods
        .into_iter()
        .map(|name| {
            let runs: Vec<&Trajectory> = trajectories.iter().filter(|t| t.method == name).collect();
            let total_grad_evals = runs.iter().map(|t| t.grad_evals).sum();
            let finals: Vec<&MetricRecord> = runs
                .iter()
                .filter(|t| t.status == RunStatus::Ok)
                .filter_map(|t| t.last())
                .collect();
            let classify = finals.iter().any(|r| !r.test_acc.is_nan());
            let values: Vec<f64> = finals
                .iter()
                .map(|r| if classify { r.test_acc } else { r.test_loss })
                .collect();
            let (best, mean, std) = if values.is_empty() {
                (f64::NAN, f64::NAN, f64::NAN)
            } else {
                let best = if classify {
                    values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                } else {
                    values.iter().cloned().fold(f64::INFINITY, f64::min)
                };
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                let std = if values.len() > 1 {
                    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
                } else {
                    0.0
                };
                (best, mean, std)
            };
            SummaryRow {
                method: name.to_string(),
                best,
                mean,
                std,
                total_grad_evals,
            }
        })
        .collect()
}

/// Builds the model and the train/test split for `seed`.
///
/// Without a test part (`train_fraction = 1`) the training set doubles as the
/// test set.
pub fn prepare_task(cfg: &ExperimentConfig, seed: u64) -> Result<Task> {
    let data_seed = cfg.data.seed.unwrap_or(seed);
    let (full, model) = match (&cfg.model, &cfg.data.source) {
        (ModelSpec::Quadratic { curvature }, DataSource::Quadratic { n, dim, center_spread }) => {
            gen_quadratic_family(*n, *dim, curvature, *center_spread, derive_seed(data_seed, DATA_STREAM))?
        }
        (ModelSpec::Quadratic { .. }, _) | (_, DataSource::Quadratic { .. }) => {
            return Err(Error::Config("quadratic model and data source go together".into()));
        }
        (spec, source) => {
            let (data, classes) = match source {
                DataSource::Blobs {
                    n,
                    dim,
                    classes,
                    separation,
                } => (
                    gen_blobs(*n, *dim, *classes, *separation, derive_seed(data_seed, DATA_STREAM))?,
                    *classes,
                ),
                DataSource::Csv { path, label_column, .. } => {
                    let label: LabelColumn = label_column.parse().unwrap_or_else(|e| match e {});
                    let data = load_csv(path, &label, false)?;
                    let classes = data
                        .class_count()
                        .ok_or_else(|| Error::Config("CSV data has no labels".into()))?;
                    (data, classes)
                }
                DataSource::Quadratic { .. } => unreachable!(),
            };
            let model = match spec {
                ModelSpec::Logistic => Model::Logistic(LogisticRegression::new(data.dim(), classes, 0.0)),
                ModelSpec::Mlp { hidden, activation } => {
                    Model::Mlp(TwoLayerMlp::new(data.dim(), *hidden, classes, *activation))
                }
                ModelSpec::Quadratic { .. } => unreachable!(),
            };
            (data, model)
        }
    };

    let split = SplitSpec {
        train_fraction: cfg.data.train_fraction,
        seed: derive_seed(data_seed, SPLIT_STREAM),
    };
    let (mut train, test) = full.split(&split)?;
    let mut test = match test {
        Some(t) => t,
        None => train.clone().with_role(Role::Test),
    };
    if let DataSource::Csv { normalize: true, .. } = cfg.data.source {
        let st = Standardizer::fit(&train);
        st.apply(&mut train)?;
        st.apply(&mut test)?;
    }
    if cfg.data.label_noise > 0.0 {
        let classes = model.classes().expect("validated: label noise needs classes");
        train = flip_labels(
            &train,
            cfg.data.label_noise,
            classes,
            derive_seed(data_seed, NOISE_STREAM),
        )?;
    }
    let grad_subset = match cfg.metric_subsample {
        Some(k) if k < train.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SUBSAMPLE_STREAM));
            let mut idx = sample(&mut rng, train.len(), k).into_vec();
            idx.sort_unstable();
            Some(idx)
        }
        _ => None,
    };
    Ok(Task {
        model,
        train,
        test,
        grad_subset,
    })
}

fn check_batches(spec: &MethodSpec, n: usize) -> Result<()> {
    let need = if matches!(spec.kind, Method::Sgd | Method::Momentum | Method::Nag) {
        spec.inner_batch
    } else {
        spec.outer_batch()
    };
    if need > n {
        return Err(Error::Config(format!(
            "method '{}': batch size {need} exceeds the {n} training samples",
            spec.name
        )));
    }
    Ok(())
}

/// Trains one method arm for `epochs` epochs from `seed`.
///
/// SGD, momentum and NAG sweep a fresh permutation of the training set each
/// epoch in `⌊n/b⌋` steps. The SVRG family and Modified-SGD run
/// `⌈n/(b·⌊B/b⌋)⌉` outer iterations per epoch, each on a fresh outer batch.
/// Metrics are recorded after every `cadence`-th epoch, and at divergence.
pub fn train(
    task: &Task,
    spec: &MethodSpec,
    epochs: usize,
    cadence: usize,
    caching: SnapshotCaching,
    seed: u64,
) -> Result<Trajectory> {
    if epochs == 0 || cadence == 0 {
        return Err(Error::invalid("epochs and cadence must be at least 1"));
    }
    let n = task.train.len();
    check_batches(spec, n)?;
    let model = task.model.clone().with_l2(spec.weight_decay);
    let schedule = spec.schedule.build(spec.lr, epochs)?;
    let mut state = OptimizerState::new(spec.kind, model.init_params(derive_seed(seed, INIT_STREAM)));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SAMPLING_STREAM));
    let b = spec.inner_batch;
    let big_b = spec.outer_batch();
    let outer_per_epoch = n.div_ceil(b * (big_b / b));
    let momentum = spec.momentum();

    let started = Instant::now();
    let mut records = Vec::with_capacity(epochs / cadence + 1);
    let mut status = RunStatus::Ok;
    let mut outer_iterations = 0u64;
    for epoch in 0..epochs {
        let lr = schedule.lr_at_epoch(epoch)?;
        match spec.kind {
            Method::Sgd | Method::Momentum | Method::Nag => {
                let plan = sample_outer_batch(n, n, b, &mut rng)?;
                for slice in plan.slices() {
                    let batch = task.train.select(slice);
                    sgd_step(&mut state, &model, &batch, lr, momentum, spec.kind == Method::Nag)?;
                }
                outer_iterations += 1;
            }
            Method::Bsvrg | Method::Bpsvrg | Method::ModifiedSgd => {
                for _ in 0..outer_per_epoch {
                    let plan = sample_outer_batch(n, big_b, b, &mut rng)?;
                    match spec.kind.variant() {
                        Some(variant) => {
                            svrg_outer_iteration(&mut state, &model, &task.train, &plan, lr, variant, caching)?
                        }
                        None => modified_sgd_outer_iteration(&mut state, &model, &task.train, &plan, lr)?,
                    }
                    outer_iterations += 1;
                    if !state.w().is_finite() {
                        break;
                    }
                }
            }
        }
        state.advance_epoch();
        let mut diverged = !state.w().is_finite();
        if diverged || (epoch + 1) % cadence == 0 {
            let rec = MetricRecord::evaluate(
                &model,
                state.w(),
                &task.train,
                &task.test,
                task.grad_subset.as_deref(),
                epoch + 1,
                lr,
                state.grad_evals(),
            )?;
            diverged |= !(rec.train_loss.is_finite() && rec.test_loss.is_finite());
            records.push(rec);
        }
        if diverged {
            warn!("{} (seed {seed}) diverged in epoch {}", spec.name, epoch + 1);
            status = RunStatus::Diverged;
            break;
        }
    }
    info!(
        "{} (seed {seed}): {} epochs in {:.2?}",
        spec.name,
        state.epoch(),
        started.elapsed()
    );
    debug_assert!(
        status == RunStatus::Diverged || {
            let per = if matches!(spec.kind, Method::Sgd | Method::Momentum | Method::Nag) {
                grad_evals_for(spec.kind, n, b, caching)
            } else {
                grad_evals_for(spec.kind, big_b, b, caching)
            };
            per * outer_iterations == state.grad_evals()
        }
    );
    Ok(Trajectory {
        method: spec.name.clone(),
        seed,
        records,
        status,
        grad_evals: state.grad_evals(),
    })
}

/// Runs every method × seed. Jobs run in parallel; results do not depend on
/// scheduling. The whole configuration is validated (including batch sizes
/// against each seed's training set) before any training starts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    let seeds = cfg.seeds();
    let tasks: Vec<Task> = seeds.par_iter().map(|&s| prepare_task(cfg, s)).collect::<Result<_>>()?;
    for task in &tasks {
        for spec in &cfg.methods {
            check_batches(spec, task.train.len())?;
        }
    }
    let jobs: Vec<(&MethodSpec, usize)> = cfg
        .methods
        .iter()
        .flat_map(|m| (0..seeds.len()).map(move |k| (m, k)))
        .collect();
    let trajectories = jobs
        .par_iter()
        .map(|&(spec, k)| {
            train(
                &tasks[k],
                spec,
                cfg.epochs_for(spec.kind),
                cfg.cadence,
                cfg.caching(),
                seeds[k],
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunResult {
        config: cfg.clone(),
        trajectories,
    })
}

//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed; the
//! process exits non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vrlab::data::{gen_blobs, gen_quadratic_family, sample_outer_batch, CurvatureSpec, Dataset};
use vrlab::harness::{
    budget_matched_epochs, prepare_task, run_experiment, write_results, ExperimentConfig, RunResult, Trajectory,
};
use vrlab::metrics::{
    data_relevant_sharpness, gaussian_sharpness, generalization_bound_check, sharpness_upper_bound, BoundForm,
};
use vrlab::model::{Activation, LogisticRegression, MeanQuadratic, TwoLayerMlp};
use vrlab::optim::{
    grad_evals_for, sgd_step, svrg_outer_iteration, svrg_outer_iteration_traced, Method, OptimizerState, SignVariant,
    SnapshotCaching,
};
use vrlab::{Model, Result, Sample};

// Pinned tolerances.
const GRAD_TOL: f64 = 1e-5;
const GRAD_TOL_QUADRATIC: f64 = 1e-8;
const GRAD_STEP: f64 = 1e-5;
/// Central differences are exact for quadratics up to rounding, so a wider
/// step only reduces cancellation error.
const GRAD_STEP_QUADRATIC: f64 = 1e-3;
const REL_FLOOR: f64 = 1e-3;
const DEGENERATION_TOL: f64 = 1e-12;
const CANCELLATION_TOL: f64 = 1e-12;
const SVRG_TARGET: f64 = 1e-10;
const SGD_FLOOR: f64 = 1e-4;
const SHARPNESS_TOL: f64 = 1e-10;
const SHARPNESS_SIGMAS: f64 = 3.0;
const MAJORITY: usize = 4;

type Criterion = (&'static str, fn() -> Result<Verdict>);

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { passed, detail })
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("gradient correctness", criterion_1),
        ("degeneration at B = b", criterion_2),
        ("quadratic variance cancellation", criterion_3),
        ("convergence separation", criterion_4),
        ("sharpness oracles", criterion_5),
        ("generalization bound, exact forms", criterion_6),
        ("BP-SVRG vs B-SVRG flatness and gap", criterion_7),
        ("lr decay helps B-SVRG", criterion_8),
        ("determinism and accounting", criterion_9),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let (passed, detail) = match run() {
            Ok(v) => (v.passed, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failed += 1;
        }
        println!(
            "criterion {} {:<36} {}  ({detail}; {:.1?})",
            k + 1,
            name,
            if passed { "PASS" } else { "FAIL" },
            started.elapsed()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn central_difference(model: &Model, w: &[f64], s: &Sample, h: f64) -> Result<Vec<f64>> {
    let mut p = w.to_vec();
    let mut out = Vec::with_capacity(w.len());
    for i in 0..w.len() {
        p[i] = w[i] + h;
        let up = model.per_sample_loss(&p, s)?;
        p[i] = w[i] - h;
        let down = model.per_sample_loss(&p, s)?;
        p[i] = w[i];
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

fn max_rel_err(a: &[f64], n: &[f64]) -> f64 {
    a.iter()
        .zip(n)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR))
        .fold(0.0, f64::max)
}

fn criterion_1() -> Result<Verdict> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (_, quad) = gen_quadratic_family(
        1,
        6,
        &CurvatureSpec::RandomSpd {
            min_eig: 0.1,
            max_eig: 5.0,
        },
        1.0,
        7,
    )?;
    let quad = quad.with_l2(0.01);
    let logistic = Model::Logistic(LogisticRegression::new(8, 4, 1e-3));
    let mlp = Model::Mlp(TwoLayerMlp::new(8, 20, 4, Activation::Relu).with_l2(1e-3));

    let mut worst = [0.0f64; 3];
    for _ in 0..100 {
        let w = uniform(&mut rng, 6, 3.0);
        let s = Sample::center(uniform(&mut rng, 6, 3.0));
        let a = quad.per_sample_grad(&w, &s)?;
        worst[0] = worst[0].max(max_rel_err(
            &a,
            &central_difference(&quad, &w, &s, GRAD_STEP_QUADRATIC)?,
        ));
        for (k, m) in [&logistic, &mlp].into_iter().enumerate() {
            let w = uniform(&mut rng, m.num_params(), 1.0);
            let s = Sample::labeled(uniform(&mut rng, 8, 2.0), rng.random_range(0..4));
            let a = m.per_sample_grad(&w, &s)?;
            worst[k + 1] = worst[k + 1].max(max_rel_err(&a, &central_difference(m, &w, &s, GRAD_STEP)?));
        }
    }
    let elapsed = started.elapsed();
    verdict(
        worst[0] <= GRAD_TOL_QUADRATIC
            && worst[1] <= GRAD_TOL
            && worst[2] <= GRAD_TOL
            && elapsed < Duration::from_secs(10),
        format!(
            "max rel err quadratic {:.1e}, logistic {:.1e}, mlp {:.1e}",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn criterion_2() -> Result<Verdict> {
    let data = gen_blobs(256, 5, 3, 2.0, 21)?;
    let models = [
        Model::Logistic(LogisticRegression::new(5, 3, 1e-4)),
        Model::Mlp(TwoLayerMlp::new(5, 16, 3, Activation::Relu)),
    ];
    let mut worst = 0.0f64;
    for model in &models {
        let w0 = model.init_params(3);
        for b in [1usize, 8, 32] {
            for variant in [SignVariant::Minus, SignVariant::Plus] {
                for caching in [SnapshotCaching::On, SnapshotCaching::Off] {
                    let mut rng = ChaCha8Rng::seed_from_u64(b as u64);
                    let mut svrg = OptimizerState::new(Method::Bsvrg, w0.clone());
                    let mut sgd = OptimizerState::new(Method::Sgd, w0.clone());
                    for _ in 0..200 {
                        let plan = sample_outer_batch(data.len(), b, b, &mut rng)?;
                        svrg_outer_iteration(&mut svrg, model, &data, &plan, 0.05, variant, caching)?;
                        sgd_step(&mut sgd, model, &data.select(plan.outer()), 0.05, 0.0, false)?;
                        worst = worst.max(svrg.w().max_abs_diff(sgd.w()));
                    }
                }
            }
        }
    }
    verdict(
        worst <= DEGENERATION_TOL,
        format!("max |w_svrg − w_sgd| = {worst:.1e} over 200 steps, b ∈ {{1, 8, 32}}"),
    )
}

fn criterion_3() -> Result<Verdict> {
    let spec = CurvatureSpec::RandomSpd {
        min_eig: 0.5,
        max_eig: 4.0,
    };
    let (data, model) = gen_quadratic_family(200, 6, &spec, 2.0, 31)?;
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let mut term_err = 0.0f64;
    let mut cv_mean_divisible = 0.0f64;
    let mut cv_mean_ragged = 0.0f64;
    for (outer, inner) in [(40usize, 10usize), (40, 8), (42, 8), (25, 5)] {
        let mut state = OptimizerState::new(Method::Bsvrg, model.init_params(5));
        for _ in 0..10 {
            let plan = sample_outer_batch(data.len(), outer, inner, &mut rng)?;
            let batch: Vec<&Sample> = data.select(plan.outer());
            // independent oracle: A·(w − mean of outer-batch centers)
            let Model::MeanQuadratic(q) = &model else {
                unreachable!()
            };
            let mut cbar = vec![0.0; 6];
            for s in &batch {
                for (c, x) in cbar.iter_mut().zip(&s.x) {
                    *c += x / outer as f64;
                }
            }
            let mut cv_sum = [0.0; 6];
            let mut slices = 0usize;
            svrg_outer_iteration_traced(
                &mut state,
                &model,
                &data,
                &plan,
                0.05,
                SignVariant::Minus,
                SnapshotCaching::On,
                |step| {
                    let diff: Vec<f64> = step.w_prev.iter().zip(&cbar).map(|(w, c)| w - c).collect();
                    let mut full = vec![0.0; 6];
                    q.apply(&diff, &mut full);
                    for (f, t) in full.iter().zip(step.term) {
                        term_err = term_err.max((f - t).abs());
                    }
                    for (a, c) in cv_sum.iter_mut().zip(step.control_variate) {
                        *a += c;
                    }
                    slices += 1;
                },
            )?;
            let m = cv_sum.iter().map(|c| (c / slices as f64).abs()).fold(0.0, f64::max);
            if outer % inner == 0 {
                cv_mean_divisible = cv_mean_divisible.max(m);
            } else {
                cv_mean_ragged = cv_mean_ragged.max(m);
            }
        }
    }
    verdict(
        term_err <= CANCELLATION_TOL && cv_mean_divisible <= CANCELLATION_TOL,
        format!(
            "max |term − outer gradient| = {term_err:.1e}; control-variate mean {cv_mean_divisible:.1e} when b | B \
             ({cv_mean_ragged:.1e} otherwise)"
        ),
    )
}

fn quadratic_config(epochs: usize, lr: f64) -> Result<ExperimentConfig> {
    ExperimentConfig::from_toml_str(&format!(
        r#"
epochs = {epochs}
seed = 41
budget_match = false

[model]
kind = "quadratic"
curvature = {{ kind = "random_spd", min_eig = 1.0, max_eig = 10.0 }}

[data]
train_fraction = 1.0
[data.source]
kind = "quadratic"
n = 100
dim = 10

[[method]]
name = "svrg"
kind = "bsvrg"
lr = {lr}
outer_batch = 100
inner_batch = 1

[[method]]
name = "sgd"
kind = "sgd"
lr = {lr}
inner_batch = 10
"#
    ))
}

fn eigenvalues(q: &MeanQuadratic) -> Vec<f64> {
    let d = q.dim();
    let mut ev: Vec<f64> = SymmetricEigen::new(DMatrix::from_row_slice(d, d, q.curvature()))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn criterion_4() -> Result<Verdict> {
    let started = Instant::now();
    let probe = quadratic_config(50, 1.0)?;
    let task = prepare_task(&probe, 41)?;
    let Model::MeanQuadratic(q) = &task.model else {
        unreachable!()
    };
    let ev = eigenvalues(q);
    let lambda_max = *ev.last().unwrap();
    let cfg = quadratic_config(50, 1.0 / (10.0 * lambda_max))?;
    let result = run_experiment(&cfg)?;
    let final_norm = |name: &str| -> f64 {
        let t = result.trajectories.iter().find(|t| t.method == name).unwrap();
        t.records.last().unwrap().full_sq_grad_norm
    };
    let (svrg, sgd) = (final_norm("svrg"), final_norm("sgd"));
    verdict(
        svrg <= SVRG_TARGET && sgd >= SGD_FLOOR && started.elapsed() < Duration::from_secs(30),
        format!(
            "λ_max = {lambda_max:.3}, after 50 epochs ‖∇F‖²: SVRG {svrg:.1e} (≤ {SVRG_TARGET:.0e}), SGD {sgd:.1e} (≥ {SGD_FLOOR:.0e})"
        ),
    )
}

fn criterion_5() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    // (a) exact quadratic identity
    let mut identity_err = 0.0f64;
    for k in 0..20 {
        let spec = CurvatureSpec::RandomSpd {
            min_eig: 0.0,
            max_eig: rng.random_range(0.5..5.0),
        };
        let (data, model) = gen_quadratic_family(30, 4, &spec, 1.5, 500 + k)?;
        let Model::MeanQuadratic(q) = &model else {
            unreachable!()
        };
        let w = uniform(&mut rng, 4, 2.0);
        let eta = rng.random_range(0.01..0.5);
        let got = data_relevant_sharpness(&model, &w, data.samples(), eta)?;
        let mut want = 0.0;
        for s in data.samples() {
            let g: Vec<f64> = (0..4)
                .map(|i| (0..4).map(|j| q.curvature()[i * 4 + j] * (w[j] - s.x[j])).sum::<f64>())
                .collect();
            let mut ag = vec![0.0; 4];
            q.apply(&g, &mut ag);
            want += g.iter().zip(&ag).map(|(a, b)| a * b).sum::<f64>();
        }
        want *= eta * eta / data.len() as f64;
        identity_err = identity_err.max((got - want).abs());
    }

    // (b) Gaussian sharpness against ½·σ·tr(A)
    let model = Model::MeanQuadratic(MeanQuadratic::diagonal(&[1.0, 4.0])?);
    let data = vec![Sample::center(vec![0.3, -0.2])];
    let sigma = 0.01;
    let est = gaussian_sharpness(&model, &[0.0, 0.0], &data, sigma, 100_000, 52)?;
    let closed = 0.5 * sigma * 5.0;
    let z = (est.value - closed).abs() / est.std_error;

    // (c) upper bound dominates on random PSD quadratics
    let mut below = 0;
    for k in 0..50 {
        let spec = CurvatureSpec::RandomSpd {
            min_eig: rng.random_range(0.0..1.0),
            max_eig: rng.random_range(1.0..6.0),
        };
        let (data, model) = gen_quadratic_family(20, 5, &spec, 1.0, 600 + k)?;
        let w = uniform(&mut rng, 5, 2.0);
        let s = data_relevant_sharpness(&model, &w, data.samples(), 0.1)?;
        let ub = sharpness_upper_bound(&model, &w, data.samples(), 0.1)?;
        if ub.value < s * (1.0 - 1e-12) {
            below += 1;
        }
    }
    verdict(
        identity_err <= SHARPNESS_TOL && z <= SHARPNESS_SIGMAS && below == 0,
        format!(
            "identity err {identity_err:.1e}; Gaussian {:.5} vs {closed} ({z:.2} SE); bound below sharpness in {below}/50",
            est.value
        ),
    )
}

fn criterion_6() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let mut exact_violations = 0;
    let mut approx_violations = [0usize; 2];
    let draws = 100;
    for k in 0..draws {
        let d = rng.random_range(1..=5);
        let lo = rng.random_range(0.05..1.0);
        let spec = CurvatureSpec::RandomSpd {
            min_eig: lo,
            max_eig: lo + rng.random_range(0.0..5.0),
        };
        let n_pop = rng.random_range(5..60);
        let (population, model) = gen_quadratic_family(n_pop, d, &spec, rng.random_range(0.1..3.0), 700 + k)?;
        let Model::MeanQuadratic(q) = &model else {
            unreachable!()
        };
        let pl_mu = eigenvalues(q)[0];
        let n_train = rng.random_range(1..=n_pop);
        let idx = rand::seq::index::sample(&mut rng, n_pop, n_train).into_vec();
        let train: Dataset = population.subset(&idx)?;
        let w = uniform(&mut rng, d, 4.0);
        for form in [
            BoundForm::ExactPopulationGradient,
            BoundForm::ExactPopulationSquaredNorm,
        ] {
            if !generalization_bound_check(&model, &w, train.samples(), population.samples(), pl_mu, form)?.holds {
                exact_violations += 1;
            }
        }
        for (slot, form) in [BoundForm::TrainGradientApprox, BoundForm::TrainSquaredNormApprox]
            .into_iter()
            .enumerate()
        {
            if !generalization_bound_check(&model, &w, train.samples(), population.samples(), pl_mu, form)?.holds {
                approx_violations[slot] += 1;
            }
        }
    }
    verdict(
        exact_violations == 0,
        format!(
            "exact-form violations {exact_violations}/{draws}; approximated forms (not asserted): train-gradient {}, train-squared-norm {}",
            approx_violations[0], approx_violations[1]
        ),
    )
}

const BLOB_TASK: &str = r#"
epochs = 30
repeats = 5
seed = 1

[model]
kind = "mlp"
hidden = 100

[data]
train_fraction = 0.5
label_noise = 0.1
[data.source]
kind = "blobs"
n = 2000
dim = 10
classes = 4
separation = 2.0
"#;

fn blob_result(methods: &str) -> Result<RunResult> {
    run_experiment(&ExperimentConfig::from_toml_str(&format!("{BLOB_TASK}\n{methods}"))?)
}

fn runs<'a>(result: &'a RunResult, name: &str) -> Vec<&'a Trajectory> {
    result.trajectories.iter().filter(|t| t.method == name).collect()
}

/// Mean of the last `k` recorded values (the trailing moving average at the
/// end of training).
fn trailing(t: &Trajectory, k: usize, get: fn(&vrlab::metrics::MetricRecord) -> f64) -> f64 {
    let tail = &t.records[t.records.len().saturating_sub(k)..];
    tail.iter().map(get).sum::<f64>() / tail.len() as f64
}

fn criterion_7() -> Result<Verdict> {
    let started = Instant::now();
    let result = blob_result(
        r#"
[[method]]
name = "bsvrg"
kind = "bsvrg"
lr = 0.1
inner_batch = 10

[[method]]
name = "bpsvrg"
kind = "bpsvrg"
lr = 0.1
inner_batch = 10
"#,
    )?;
    let (b, bp) = (runs(&result, "bsvrg"), runs(&result, "bpsvrg"));
    let budgets_match = b.iter().zip(&bp).all(|(x, y)| x.grad_evals == y.grad_evals);
    let mut flatter = 0;
    let mut smaller_gap = 0;
    let mut pairs = Vec::new();
    for (x, y) in b.iter().zip(&bp) {
        let (gx, gy) = (
            trailing(x, 5, |r| r.avg_sq_grad_norm),
            trailing(y, 5, |r| r.avg_sq_grad_norm),
        );
        let (lx, ly) = (trailing(x, 5, |r| r.loss_gap), trailing(y, 5, |r| r.loss_gap));
        flatter += usize::from(gy < gx);
        smaller_gap += usize::from(ly <= lx);
        pairs.push(format!("{gx:.1}/{gy:.1}"));
    }
    verdict(
        budgets_match && flatter >= MAJORITY && smaller_gap >= MAJORITY && started.elapsed() < Duration::from_secs(600),
        format!(
            "E‖∇f_i‖² lower for BP-SVRG in {flatter}/5 seeds [B/BP: {}], loss gap no larger in {smaller_gap}/5",
            pairs.join(" ")
        ),
    )
}

fn criterion_8() -> Result<Verdict> {
    let result = blob_result(
        r#"
[[method]]
name = "constant"
kind = "bsvrg"
lr = 0.1
inner_batch = 10
outer_batch = 20

[[method]]
name = "decay"
kind = "bsvrg"
lr = 0.1
inner_batch = 10
outer_batch = 20
[method.schedule]
milestones = [0.4, 0.6, 0.8]
factor = 5.0
"#,
    )?;
    let final_acc = |t: &&Trajectory| t.records.last().unwrap().test_acc;
    let constant: Vec<f64> = runs(&result, "constant").iter().map(final_acc).collect();
    let decay: Vec<f64> = runs(&result, "decay").iter().map(final_acc).collect();
    let wins = constant.iter().zip(&decay).filter(|(c, d)| d >= c).count();
    let pairs: Vec<String> = constant
        .iter()
        .zip(&decay)
        .map(|(c, d)| format!("{c:.3}/{d:.3}"))
        .collect();
    verdict(
        wins >= MAJORITY,
        format!(
            "decayed test accuracy ≥ constant in {wins}/5 seeds [const/decay: {}]",
            pairs.join(" ")
        ),
    )
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn criterion_9() -> Result<Verdict> {
    let text = r#"
epochs = 4
repeats = 3
seed = 9
cadence = 2

[model]
kind = "logistic"

[data]
train_fraction = 0.7
[data.source]
kind = "blobs"
n = 300
dim = 4
classes = 3
separation = 1.5

[[method]]
name = "bpsvrg"
kind = "bpsvrg"
inner_batch = 8
outer_batch = 20

[[method]]
name = "bsvrg_nocache"
kind = "bsvrg"
inner_batch = 8

[[method]]
name = "nag"
kind = "nag"
inner_batch = 8

[[method]]
name = "modified"
kind = "modified_sgd"
inner_batch = 8
outer_batch = 20
"#;
    let mut cfg = ExperimentConfig::from_toml_str(text)?;
    let in_pool = |threads: usize, cfg: &ExperimentConfig| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_experiment(cfg))
    };
    let a = in_pool(1, &cfg)?;
    let b = in_pool(4, &cfg)?;
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_results(&a, da.path())?;
    write_results(&b, db.path())?;
    let identical = dir_bytes(da.path()) == dir_bytes(db.path());

    // closed-form counts, computed independently of the library
    let n_train = 210usize;
    let per_iteration = |kind: Method, big_b: usize, b: usize, cache: bool| -> u64 {
        let updated = (b * (big_b / b)) as u64;
        match kind {
            Method::Bsvrg | Method::Bpsvrg if cache => big_b as u64 + updated,
            Method::Bsvrg | Method::Bpsvrg => big_b as u64 + 2 * updated,
            _ => updated,
        }
    };
    let mut counts_ok = true;
    for cache in [true, false] {
        cfg.caching = cache;
        let res = run_experiment(&cfg)?;
        for t in &res.trajectories {
            let spec = cfg.methods.iter().find(|m| m.name == t.method).unwrap();
            let epochs = (cfg.epochs * if spec.kind.is_svrg_family() { 2 } else { 3 }).div_ceil(2) as u64;
            let b = spec.inner_batch;
            let caching = SnapshotCaching::from_flag(cache);
            let expected = match spec.kind {
                Method::Sgd | Method::Momentum | Method::Nag => {
                    counts_ok &=
                        grad_evals_for(spec.kind, n_train, b, caching) == per_iteration(spec.kind, n_train, b, cache);
                    epochs * per_iteration(spec.kind, n_train, b, cache)
                }
                _ => {
                    let big_b = spec.outer_batch();
                    let iters = epochs * n_train.div_ceil(b * (big_b / b)) as u64;
                    counts_ok &=
                        grad_evals_for(spec.kind, big_b, b, caching) == per_iteration(spec.kind, big_b, b, cache);
                    iters * per_iteration(spec.kind, big_b, b, cache)
                }
            };
            counts_ok &= t.grad_evals == expected && t.records.last().unwrap().grad_evals == expected;
        }
    }
    let budget_ok = (1..=200).all(|n| {
        budget_matched_epochs(n, Method::Bpsvrg) == n
            && budget_matched_epochs(n, Method::Bsvrg) == n
            && [Method::Sgd, Method::Momentum, Method::Nag, Method::ModifiedSgd]
                .iter()
                .all(|&m| budget_matched_epochs(n, m) == (1.5 * n as f64 + 0.5).floor() as usize)
    }) && budget_matched_epochs(100, Method::Nag) == 150
        && budget_matched_epochs(1, Method::Nag) == 2;
    verdict(
        identical && counts_ok && budget_ok,
        format!(
            "CSV bytes identical across 1/4 threads: {identical}; grad_evals match closed form: {counts_ok}; \
             1.5N rule: {budget_ok}"
        ),
    )
}

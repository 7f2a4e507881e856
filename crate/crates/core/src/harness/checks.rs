use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::budget_matched_epochs;
use crate::data::{gen_blobs, gen_quadratic_family, sample_outer_batch, CurvatureSpec, Dataset};
use crate::error::Result;
use crate::metrics::{data_relevant_sharpness, generalization_bound_check, BoundForm};
use crate::model::{
    check_grad_fd, Activation, LogisticRegression, MeanQuadratic, Model, Sample, TwoLayerMlp, GRAD_FD_STEP,
};
use crate::optim::{
    grad_evals_for, sgd_step, svrg_outer_iteration, svrg_outer_iteration_traced, Method, OptimizerState, SignVariant,
    SnapshotCaching,
};

/// Result of one self-check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

/// A fast subset of the property and oracle suite, for the `check`
/// subcommand. Every check is seeded from `seed`.
pub fn run_checks(seed: u64) -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        check_gradients(seed)?,
        check_degeneration(seed)?,
        check_variance_cancellation(seed)?,
        check_sharpness(seed)?,
        check_bound(seed)?,
        check_accounting(),
    ])
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn check_gradients(seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quad = Model::MeanQuadratic(MeanQuadratic::new(
        3,
        vec![2.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 3.0],
    )?);
    let logistic = Model::Logistic(LogisticRegression::new(4, 3, 0.01));
    let mlp = Model::Mlp(TwoLayerMlp::new(4, 6, 3, Activation::Tanh).with_l2(0.01));
    let mut worst = [0.0f64; 3];
    for _ in 0..20 {
        let w = random_vec(&mut rng, quad.num_params(), 2.0);
        let s = Sample::center(random_vec(&mut rng, 3, 2.0));
        worst[0] = worst[0].max(check_grad_fd(&quad, &w, &s, 1e-3)?);
        for (k, m) in [&logistic, &mlp].into_iter().enumerate() {
            let w = random_vec(&mut rng, m.num_params(), 1.0);
            let s = Sample::labeled(random_vec(&mut rng, 4, 2.0), rng.random_range(0..3));
            worst[k + 1] = worst[k + 1].max(check_grad_fd(m, &w, &s, GRAD_FD_STEP)?);
        }
    }
    let passed = worst[0] <= 1e-8 && worst[1] <= 1e-5 && worst[2] <= 1e-5;
    Ok(outcome(
        "gradients",
        passed,
        format!(
            "max relative FD error: quadratic {:.1e}, logistic {:.1e}, mlp {:.1e}",
            worst[0], worst[1], worst[2]
        ),
    ))
}

fn check_degeneration(seed: u64) -> Result<CheckOutcome> {
    let data = gen_blobs(60, 3, 3, 2.0, seed)?;
    let model = Model::Logistic(LogisticRegression::new(3, 3, 0.0));
    let w0 = model.init_params(seed);
    let b = 6;
    let mut worst = 0.0f64;
    for variant in [SignVariant::Minus, SignVariant::Plus] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut svrg = OptimizerState::new(Method::Bsvrg, w0.clone());
        let mut sgd = OptimizerState::new(Method::Sgd, w0.clone());
        for _ in 0..50 {
            let plan = sample_outer_batch(data.len(), b, b, &mut rng)?;
            svrg_outer_iteration(&mut svrg, &model, &data, &plan, 0.1, variant, SnapshotCaching::On)?;
            sgd_step(&mut sgd, &model, &data.select(plan.outer()), 0.1, 0.0, false)?;
            worst = worst.max(svrg.w().max_abs_diff(sgd.w()));
        }
    }
    Ok(outcome(
        "degeneration",
        worst <= 1e-12,
        format!("B = b: max |w_svrg − w_sgd| = {worst:.1e} over 50 steps"),
    ))
}

fn check_variance_cancellation(seed: u64) -> Result<CheckOutcome> {
    let spec = CurvatureSpec::RandomSpd {
        min_eig: 0.5,
        max_eig: 3.0,
    };
    let (data, model) = gen_quadratic_family(40, 4, &spec, 1.0, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
    let mut state = OptimizerState::new(Method::Bsvrg, model.init_params(seed));
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let plan = sample_outer_batch(data.len(), 16, 4, &mut rng)?;
        let outer: Vec<&Sample> = data.select(plan.outer());
        let mut err = None;
        svrg_outer_iteration_traced(
            &mut state,
            &model,
            &data,
            &plan,
            0.05,
            SignVariant::Minus,
            SnapshotCaching::On,
            |step| match crate::model::batch_grad(&model, step.w_prev, &outer) {
                Ok(full) => worst = worst.max(full.max_abs_diff(step.term)),
                Err(e) => err = Some(e),
            },
        )?;
        if let Some(e) = err {
            return Err(e);
        }
    }
    Ok(outcome(
        "variance_cancellation",
        worst <= 1e-12,
        format!("max |inner term − outer-batch gradient| = {worst:.1e}"),
    ))
}

fn check_sharpness(seed: u64) -> Result<CheckOutcome> {
    let spec = CurvatureSpec::RandomSpd {
        min_eig: 0.1,
        max_eig: 2.0,
    };
    let (data, model) = gen_quadratic_family(30, 3, &spec, 1.0, seed)?;
    let Model::MeanQuadratic(q) = &model else {
        unreachable!()
    };
    let w = model.init_params(seed);
    let eta = 0.1;
    let got = data_relevant_sharpness(&model, &w, data.samples(), eta)?;
    let mut want = 0.0;
    for s in data.samples() {
        let g = model.per_sample_grad(&w, s)?;
        want += 2.0 * q.quad_form(&g);
    }
    want *= eta * eta / data.len() as f64;
    let err = (got - want).abs();
    Ok(outcome(
        "sharpness",
        err <= 1e-10,
        format!("data-relevant sharpness {got:.6e} vs η²·E[gᵀAg] {want:.6e}"),
    ))
}

fn check_bound(seed: u64) -> Result<CheckOutcome> {
    let spec = CurvatureSpec::RandomSpd {
        min_eig: 0.2,
        max_eig: 2.0,
    };
    let (population, model) = gen_quadratic_family(50, 3, &spec, 1.0, seed)?;
    let Model::MeanQuadratic(q) = &model else {
        unreachable!()
    };
    let mu = q.pl_mu();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
    let mut violations = 0;
    let draws = 20;
    for _ in 0..draws {
        let k = rng.random_range(1..=population.len());
        let idx = rand::seq::index::sample(&mut rng, population.len(), k).into_vec();
        let train: Dataset = population.subset(&idx)?;
        let w = random_vec(&mut rng, 3, 3.0);
        for form in [
            BoundForm::ExactPopulationGradient,
            BoundForm::ExactPopulationSquaredNorm,
        ] {
            let r = generalization_bound_check(&model, &w, train.samples(), population.samples(), mu, form)?;
            if !r.holds {
                violations += 1;
            }
        }
    }
    Ok(outcome(
        "generalization_bound",
        violations == 0,
        format!("{violations} violations of the exact forms in {draws} draws"),
    ))
}

fn check_accounting() -> CheckOutcome {
    let on = SnapshotCaching::On;
    let off = SnapshotCaching::Off;
    let passed = budget_matched_epochs(100, Method::Bpsvrg) == 100
        && budget_matched_epochs(100, Method::Nag) == 150
        && budget_matched_epochs(1, Method::Nag) == 2
        && grad_evals_for(Method::Bsvrg, 20, 10, on) == 40
        && grad_evals_for(Method::Bsvrg, 20, 10, off) == 60
        && grad_evals_for(Method::Bpsvrg, 25, 10, on) == 45
        && grad_evals_for(Method::Sgd, 25, 10, on) == 20;
    outcome(
        "accounting",
        passed,
        "1.5N rule and per-iteration gradient counts".into(),
    )
}

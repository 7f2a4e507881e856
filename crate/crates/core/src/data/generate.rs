use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Role};
use crate::error::{Error, Result};
use crate::model::{MeanQuadratic, Model, Sample, Target};

/// Shared curvature of a quadratic family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurvatureSpec {
    Identity {
        scale: f64,
    },
    Diagonal {
        values: Vec<f64>,
    },
    /// Row-major `d × d`.
    Dense {
        values: Vec<f64>,
    },
    /// Random rotation of a spectrum spaced evenly in `[min_eig, max_eig]`.
    RandomSpd {
        min_eig: f64,
        max_eig: f64,
    },
}

impl CurvatureSpec {
    fn build(&self, d: usize, rng: &mut ChaCha8Rng) -> Result<MeanQuadratic> {
        match self {
            CurvatureSpec::Identity { scale } => MeanQuadratic::diagonal(&vec![*scale; d]),
            CurvatureSpec::Diagonal { values } => {
                if values.len() != d {
                    return Err(Error::invalid(format!(
                        "diagonal curvature has {} entries for dimension {d}",
                        values.len()
                    )));
                }
                MeanQuadratic::diagonal(values)
            }
            CurvatureSpec::Dense { values } => MeanQuadratic::new(d, values.clone()),
            CurvatureSpec::RandomSpd { min_eig, max_eig } => {
                if !(*min_eig >= 0.0 && max_eig >= min_eig) {
                    return Err(Error::invalid(format!(
                        "random curvature needs 0 <= min_eig <= max_eig, got [{min_eig}, {max_eig}]"
                    )));
                }
                let g = DMatrix::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(rng));
                let q = g.qr().q();
                let spectrum = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(d, |i, _| {
                    if d == 1 {
                        *max_eig
                    } else {
                        min_eig + (max_eig - min_eig) * i as f64 / (d - 1) as f64
                    }
                }));
                let a = &q * spectrum * q.transpose();
                // symmetrize away rounding
                let a = (&a + a.transpose()) * 0.5;
                let values: Vec<f64> = (0..d)
                    .flat_map(|i| (0..d).map(move |j| (i, j)))
                    .map(|(i, j)| a[(i, j)])
                    .collect();
                MeanQuadratic::new(d, values)
            }
        }
    }
}

/// `n` centers with independent `N(0, center_spread²)` coordinates and a
/// quadratic model sharing the requested curvature.
pub fn gen_quadratic_family(
    n: usize,
    d: usize,
    curvature: &CurvatureSpec,
    center_spread: f64,
    seed: u64,
) -> Result<(Dataset, Model)> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("quadratic family needs n >= 1 and d >= 1"));
    }
    if !(center_spread >= 0.0 && center_spread.is_finite()) {
        return Err(Error::invalid(format!(
            "center spread must be >= 0, got {center_spread}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quad = curvature.build(d, &mut rng)?;
    let spread = Normal::new(0.0, center_spread).map_err(|e| Error::invalid(e.to_string()))?;
    let samples = (0..n)
        .map(|_| Sample::center((0..d).map(|_| spread.sample(&mut rng)).collect()))
        .collect();
    Ok((Dataset::new(samples, Role::Train)?, Model::MeanQuadratic(quad)))
}

/// Gaussian class clusters with unit within-class variance.
///
/// Class `k` is centered at `separation · e_k` when there are no more classes
/// than dimensions, otherwise at `separation` times a random unit vector.
/// Labels cycle through the classes so the classes are balanced.
pub fn gen_blobs(n: usize, d: usize, classes: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if classes == 0 || d == 0 {
        return Err(Error::invalid("blobs need at least one class and one dimension"));
    }
    if n < classes {
        return Err(Error::invalid(format!("{n} samples cannot cover {classes} classes")));
    }
    if !(separation > 0.0 && separation.is_finite()) {
        return Err(Error::invalid(format!("separation must be positive, got {separation}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|k| {
            if classes <= d {
                let mut m = vec![0.0; d];
                m[k] = separation;
                m
            } else {
                let u: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = crate::params::dot(&u, &u).sqrt();
                u.into_iter().map(|v| separation * v / norm).collect()
            }
        })
        .collect();
    let samples = (0..n)
        .map(|i| {
            let k = i % classes;
            let x = means[k]
                .iter()
                .map(|m| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m + z
                })
                .collect();
            Sample::labeled(x, k)
        })
        .collect();
    Dataset::new(samples, Role::Train)
}

/// Reassigns a seeded `fraction` of the labels uniformly to a different
/// class. Used to give small tasks an irreducible error floor.
pub fn flip_labels(data: &Dataset, fraction: f64, classes: usize, seed: u64) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid(format!(
            "label noise fraction must lie in [0, 1], got {fraction}"
        )));
    }
    if classes < 2 {
        return Ok(data.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let flips = (fraction * data.len() as f64).round() as usize;
    let mut samples = data.samples().to_vec();
    for &i in &order[..flips] {
        if let Target::Class(k) = samples[i].y {
            let shift = rng.random_range(1..classes);
            samples[i].y = Target::Class((k + shift) % classes);
        }
    }
    Dataset::new(samples, data.role())
}

//! Mini-batch SVRG variants (the variance-cancelling B-SVRG and the
//! sign-switched BP-SVRG), SGD baselines, flatness and generalization
//! metrics, and a seeded experiment harness.
//!
//! All arithmetic is `f64`. Randomness comes from ChaCha8 streams seeded
//! explicitly through [`rand_chacha::ChaCha8Rng::seed_from_u64`].

pub mod data;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod params;

pub use error::{Error, Result};
pub use model::{Model, Sample, Target};
pub use params::ParamVector;

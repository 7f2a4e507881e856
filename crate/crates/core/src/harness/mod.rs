//! Config-driven experiment runner: seeded repeats, budget-matched method
//! comparisons, metric logging, CSV persistence and SVG plots.

mod checks;
mod config;
mod output;
mod plot;
mod runner;

use crate::optim::Method;

pub use checks::{run_checks, CheckOutcome};
pub use config::{DataSource, DataSpec, ExperimentConfig, MethodSpec, ModelSpec, ScheduleSpec};
pub use output::{read_results, write_results, SUMMARY_HEADER, TRAJECTORY_HEADER};
pub use plot::emit_plots;
pub use runner::{prepare_task, run_experiment, summarize, train, RunResult, RunStatus, SummaryRow, Task, Trajectory};

/// Epochs granted to `method` in a comparison whose SVRG-family arms run
/// `n` epochs: SGD-type methods get `round(1.5·n)` (half rounds up).
pub fn budget_matched_epochs(n: usize, method: Method) -> usize {
    if method.is_svrg_family() {
        n
    } else {
        (3 * n).div_ceil(2)
    }
}

/// Independent sub-seed for one purpose of a run (splitmix64 finalizer).
pub(crate) fn derive_seed(seed: u64, purpose: u64) -> u64 {
    let mut z = seed ^ purpose.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

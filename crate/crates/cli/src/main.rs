use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;
use vrlab::harness::{
    emit_plots, read_results, run_checks, run_experiment, summarize, write_results, ExperimentConfig,
};
use vrlab::metrics::DEFAULT_SMOOTH_WINDOW;
use vrlab::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "vrlab", version, about = "Seeded mini-batch SVRG / SGD experiments")]
struct Cli {
    /// Override the base seed (`run`) or the check seed (`check`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (defaults to the config's `output`, or the results
    /// directory for `plot`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML config; writes CSVs and SVG plots.
    Run {
        config: PathBuf,
        /// Moving-average window for the plots.
        #[arg(long, default_value_t = DEFAULT_SMOOTH_WINDOW)]
        window: usize,
    },
    /// Re-plot a results directory.
    Plot {
        dir: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SMOOTH_WINDOW)]
        window: usize,
    },
    /// Run the built-in property and oracle checks.
    Check,
}

fn fail(e: Error) -> ExitCode {
    error!("{e}");
    eprintln!("error: {e}");
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Parse { .. } => ExitCode::from(EXIT_INVALID),
        _ => ExitCode::from(EXIT_FAILURE),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_INVALID);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    }
    match cli.command {
        Command::Run { config, window } => run(config, cli.seed, cli.out, window),
        Command::Plot { dir, window } => plot(dir, cli.out, window),
        Command::Check => check(cli.seed.unwrap_or(0)),
    }
}

fn run(config: PathBuf, seed: Option<u64>, out: Option<PathBuf>, window: usize) -> ExitCode {
    if window == 0 {
        return fail(Error::InvalidArgument("--window must be at least 1".into()));
    }
    let mut cfg = match ExperimentConfig::load(&config) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    if let Some(s) = seed {
        cfg.override_seed(s);
    }
    let out = out.unwrap_or_else(|| cfg.output.clone());
    let result = match run_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    if let Err(e) = write_results(&result, &out).and_then(|_| emit_plots(&result.trajectories, &out, window)) {
        return fail(e);
    }
    for row in result.summary() {
        println!(
            "{:<16} {}  grad_evals={}",
            row.method,
            row.display(),
            row.total_grad_evals
        );
    }
    println!("results written to {}", out.display());
    let diverged = result.fully_diverged();
    if !diverged.is_empty() {
        eprintln!("error: every seed diverged for: {}", diverged.join(", "));
        return ExitCode::from(EXIT_DIVERGED);
    }
    ExitCode::SUCCESS
}

fn plot(dir: PathBuf, out: Option<PathBuf>, window: usize) -> ExitCode {
    if window == 0 {
        return fail(Error::InvalidArgument("--window must be at least 1".into()));
    }
    let trajectories = match read_results(&dir) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    let out = out.unwrap_or(dir);
    match emit_plots(&trajectories, &out, window) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            for row in summarize(&trajectories) {
                println!(
                    "{:<16} {}  grad_evals={}",
                    row.method,
                    row.display(),
                    row.total_grad_evals
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn check(seed: u64) -> ExitCode {
    let outcomes = match run_checks(seed) {
        Ok(o) => o,
        Err(e) => return fail(e),
    };
    let mut ok = true;
    for c in &outcomes {
        println!("{} {:<22} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        ok &= c.passed;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILURE)
    }
}

use std::fs;
use std::path::{Path, PathBuf};

use super::runner::{RunResult, RunStatus, Trajectory};
use crate::error::{Error, Result};
use crate::metrics::MetricRecord;

pub const TRAJECTORY_HEADER: [&str; 12] = [
    "epoch",
    "lr",
    "grad_evals",
    "train_loss",
    "test_loss",
    "train_acc",
    "test_acc",
    "avg_sq_grad_norm",
    "full_sq_grad_norm",
    "loss_gap",
    "acc_gap",
    "status",
];

pub const SUMMARY_HEADER: [&str; 5] = ["method", "best", "mean", "std", "total_grad_evals"];

const SUMMARY_FILE: &str = "summary.csv";
const CONFIG_FILE: &str = "config.toml";
const SEED_MARKER: &str = ".seed";

fn trajectory_file(method: &str, seed: u64) -> String {
    format!("{method}{SEED_MARKER}{seed}.csv")
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(format!("{other:?}")),
        },
    }
}

/// Writes one CSV per method and seed (`<method>.seed<seed>.csv`),
/// `summary.csv` and the echoed `config.toml`. Returns the written paths.
///
/// Floats use Rust's shortest round-trip formatting, so the files are a pure
/// function of the result.
pub fn write_results(result: &RunResult, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    for t in &result.trajectories {
        let path = dir.join(trajectory_file(&t.method, t.seed));
        let mut w = writer(&path)?;
        w.write_record(TRAJECTORY_HEADER).map_err(|e| csv_err(&path, e))?;
        let last = t.records.len().saturating_sub(1);
        for (k, r) in t.records.iter().enumerate() {
            let status = if k == last { t.status } else { RunStatus::Ok };
            w.write_record(record_row(r, status)).map_err(|e| csv_err(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }

    let path = dir.join(SUMMARY_FILE);
    let mut w = writer(&path)?;
    w.write_record(SUMMARY_HEADER).map_err(|e| csv_err(&path, e))?;
    for row in result.summary() {
        w.write_record([
            row.method,
            row.best.to_string(),
            row.mean.to_string(),
            row.std.to_string(),
            row.total_grad_evals.to_string(),
        ])
        .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    written.push(path);

    let path = dir.join(CONFIG_FILE);
    fs::write(&path, result.config.to_toml_string()?).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

fn record_row(r: &MetricRecord, status: RunStatus) -> [String; 12] {
    [
        r.epoch.to_string(),
        r.lr.to_string(),
        r.grad_evals.to_string(),
        r.train_loss.to_string(),
        r.test_loss.to_string(),
        r.train_acc.to_string(),
        r.test_acc.to_string(),
        r.avg_sq_grad_norm.to_string(),
        r.full_sq_grad_norm.to_string(),
        r.loss_gap.to_string(),
        r.acc_gap.to_string(),
        status.as_str().to_string(),
    ]
}

/// Reads back the per-run CSVs written by [`write_results`], sorted by method
/// name and seed.
pub fn read_results(dir: impl AsRef<Path>) -> Result<Vec<Trajectory>> {
    let dir = dir.as_ref();
    let mut found = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let Some(name) = path.file_name().and_then(|s| s.to_str()) else {
            continue;
        };
        let Some(stem) = name.strip_suffix(".csv") else {
            continue;
        };
        let Some((method, seed)) = stem.rsplit_once(SEED_MARKER) else {
            continue;
        };
        let Ok(seed) = seed.parse::<u64>() else {
            continue;
        };
        found.push((method.to_string(), seed, path));
    }
    if found.is_empty() {
        return Err(Error::invalid(format!("no run CSVs found in {}", dir.display())));
    }
    found.sort();
    found
        .into_iter()
        .map(|(method, seed, path)| read_trajectory(method, seed, &path))
        .collect()
}

fn read_trajectory(method: String, seed: u64, path: &Path) -> Result<Trajectory> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(TRAJECTORY_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: format!("{}: unexpected header", path.display()),
        });
    }
    let mut records = Vec::new();
    let mut status = RunStatus::Ok;
    for (k, row) in rdr.records().enumerate() {
        let line = k + 2;
        let row = row.map_err(|e| csv_err(path, e))?;
        let num = |i: usize| -> Result<f64> {
            row[i].parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!(
                    "{}: bad number '{}' in column {}",
                    path.display(),
                    &row[i],
                    TRAJECTORY_HEADER[i]
                ),
            })
        };
        let int = |i: usize| -> Result<u64> {
            row[i].parse::<u64>().map_err(|_| Error::Parse {
                line,
                message: format!(
                    "{}: bad integer '{}' in column {}",
                    path.display(),
                    &row[i],
                    TRAJECTORY_HEADER[i]
                ),
            })
        };
        records.push(MetricRecord {
            epoch: int(0)? as usize,
            lr: num(1)?,
            grad_evals: int(2)?,
            train_loss: num(3)?,
            test_loss: num(4)?,
            train_acc: num(5)?,
            test_acc: num(6)?,
            avg_sq_grad_norm: num(7)?,
            full_sq_grad_norm: num(8)?,
            loss_gap: num(9)?,
            acc_gap: num(10)?,
        });
        status = match &row[11] {
            "ok" => RunStatus::Ok,
            "diverged" => RunStatus::Diverged,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("{}: unknown status '{other}'", path.display()),
                })
            }
        };
    }
    let grad_evals = records.last().map_or(0, |r| r.grad_evals);
    Ok(Trajectory {
        method,
        seed,
        records,
        status,
        grad_evals,
    })
}

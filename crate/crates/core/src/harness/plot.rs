use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::runner::Trajectory;
use crate::error::{Error, Result};
use crate::metrics::{moving_average, MetricRecord};

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

struct Chart {
    file: &'static str,
    title: &'static str,
    log_y: bool,
    get: fn(&MetricRecord) -> f64,
}

const CHARTS: [Chart; 6] = [
    Chart {
        file: "test_loss.svg",
        title: "test loss",
        log_y: false,
        get: |r| r.test_loss,
    },
    Chart {
        file: "avg_sq_grad_norm.svg",
        title: "E_i ‖∇f_i(w)‖²",
        log_y: true,
        get: |r| r.avg_sq_grad_norm,
    },
    Chart {
        file: "full_sq_grad_norm.svg",
        title: "‖∇F(w)‖²",
        log_y: true,
        get: |r| r.full_sq_grad_norm,
    },
    Chart {
        file: "loss_gap.svg",
        title: "loss gap (test − train)",
        log_y: false,
        get: |r| r.loss_gap,
    },
    Chart {
        file: "acc_gap.svg",
        title: "accuracy gap (train − test)",
        log_y: false,
        get: |r| r.acc_gap,
    },
    Chart {
        file: "test_acc.svg",
        title: "test accuracy",
        log_y: false,
        get: |r| r.test_acc,
    },
];

/// Mean and (sample) standard deviation across seeds at each record index.
struct Band {
    method: String,
    x: Vec<f64>,
    mean: Vec<f64>,
    std: Option<Vec<f64>>,
}

/// Writes one SVG line chart per metric (test loss, both gradient-norm
/// statistics, both gaps, test accuracy) with one series per method: the
/// across-seed mean of the `window`-point trailing moving average, with a
/// ±1 std band when there is more than one seed. Metrics that are undefined
/// for the task (accuracy on the quadratic family) are skipped.
pub fn emit_plots(trajectories: &[Trajectory], dir: impl AsRef<Path>, window: usize) -> Result<Vec<PathBuf>> {
    if trajectories.is_empty() {
        return Err(Error::invalid("nothing to plot"));
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut methods: Vec<&str> = Vec::new();
    for t in trajectories {
        if !methods.contains(&t.method.as_str()) {
            methods.push(&t.method);
        }
    }
    let mut written = Vec::new();
    for chart in &CHARTS {
        let bands = methods
            .iter()
            .map(|m| band(m, trajectories, chart.get, window))
            .collect::<Result<Vec<_>>>()?;
        if bands.iter().all(|b| b.mean.iter().all(|v| !v.is_finite())) {
            continue;
        }
        let path = dir.join(chart.file);
        fs::write(&path, render(chart, &bands)).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

fn band(method: &str, trajectories: &[Trajectory], get: fn(&MetricRecord) -> f64, window: usize) -> Result<Band> {
    let runs: Vec<&Trajectory> = trajectories.iter().filter(|t| t.method == method).collect();
    let smoothed = runs
        .iter()
        .map(|t| moving_average(&t.records.iter().map(get).collect::<Vec<_>>(), window))
        .collect::<Result<Vec<_>>>()?;
    let len = runs.iter().map(|t| t.records.len()).max().unwrap_or(0);
    let mut x = Vec::with_capacity(len);
    let mut mean = Vec::with_capacity(len);
    let mut std = Vec::with_capacity(len);
    for i in 0..len {
        let epoch = runs
            .iter()
            .find_map(|t| t.records.get(i))
            .map_or(i as f64, |r| r.epoch as f64);
        let vals: Vec<f64> = smoothed
            .iter()
            .filter_map(|s| s.get(i).copied())
            .filter(|v| v.is_finite())
            .collect();
        let (m, s) = match vals.len() {
            0 => (f64::NAN, f64::NAN),
            1 => (vals[0], 0.0),
            k => {
                let m = vals.iter().sum::<f64>() / k as f64;
                let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (k - 1) as f64;
                (m, var.sqrt())
            }
        };
        x.push(epoch);
        mean.push(m);
        std.push(s);
    }
    Ok(Band {
        method: method.to_string(),
        x,
        mean,
        std: (runs.len() > 1).then_some(std),
    })
}

fn render(chart: &Chart, bands: &[Band]) -> String {
    let finite = |v: &f64| v.is_finite();
    let mut xs = bands.iter().flat_map(|b| b.x.iter().copied()).filter(finite);
    let first = xs.next().unwrap_or(0.0);
    let (mut x_lo, mut x_hi) = xs.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if x_hi <= x_lo {
        x_lo -= 1.0;
        x_hi += 1.0;
    }

    let mut ys: Vec<f64> = Vec::new();
    for b in bands {
        for (i, &m) in b.mean.iter().enumerate() {
            if !m.is_finite() {
                continue;
            }
            ys.push(m);
            if let Some(s) = &b.std {
                ys.push(m - s[i]);
                ys.push(m + s[i]);
            }
        }
    }
    let log_y = chart.log_y && ys.iter().all(|&v| v > 0.0);
    let ty = |v: f64| if log_y { v.log10() } else { v };
    let tys: Vec<f64> = ys.iter().map(|&v| ty(v)).filter(finite).collect();
    let (mut y_lo, mut y_hi) = tys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if !(y_lo.is_finite() && y_hi.is_finite()) {
        y_lo = 0.0;
        y_hi = 1.0;
    }
    if y_hi - y_lo <= 1e-12 * y_hi.abs().max(1.0) {
        let pad = if y_lo == 0.0 { 1.0 } else { 0.1 * y_lo.abs() };
        y_lo -= pad;
        y_hi += pad;
    }

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * pw;
    let py = |y: f64| TOP + (1.0 - (ty(y) - y_lo) / (y_hi - y_lo)) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(chart.title)
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    );

    for t in linear_ticks(x_lo, x_hi) {
        let x = px(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#444"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 19.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">epoch</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0
    );
    let y_ticks: Vec<(f64, f64)> = if log_y {
        let lo = y_lo.ceil() as i32;
        let hi = y_hi.floor() as i32;
        let step = ((hi - lo) / 6).max(1);
        let mut v: Vec<(f64, f64)> = (lo..=hi)
            .step_by(step as usize)
            .map(|e| (e as f64, 10f64.powi(e)))
            .collect();
        if v.len() < 2 {
            v = vec![(y_lo, 10f64.powf(y_lo)), (y_hi, 10f64.powf(y_hi))];
        }
        v
    } else {
        linear_ticks(y_lo, y_hi).into_iter().map(|t| (t, t)).collect()
    };
    for (pos, label) in y_ticks {
        let y = TOP + (1.0 - (pos - y_lo) / (y_hi - y_lo)) * ph;
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#444"/><line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT - 5.0,
            LEFT + pw,
            LEFT - 8.0,
            y + 4.0,
            fmt_tick(label)
        );
    }

    for (k, b) in bands.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        if let Some(std) = &b.std {
            for run in finite_runs(&b.mean) {
                let mut pts = Vec::new();
                for i in run.clone() {
                    pts.push(format!("{:.2},{:.2}", px(b.x[i]), py(b.mean[i] + std[i])));
                }
                for i in run.rev() {
                    let lo = b.mean[i] - std[i];
                    let lo = if log_y && lo <= 0.0 { 10f64.powf(y_lo) } else { lo };
                    pts.push(format!("{:.2},{:.2}", px(b.x[i]), py(lo)));
                }
                let _ = writeln!(
                    svg,
                    r#"<polygon points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#,
                    pts.join(" ")
                );
            }
        }
        for run in finite_runs(&b.mean) {
            let pts: Vec<String> = run.map(|i| format!("{:.2},{:.2}", px(b.x[i]), py(b.mean[i]))).collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#,
                pts.join(" ")
            );
        }
        let ly = TOP + 12.0 + 20.0 * k as f64;
        let lx = LEFT + pw + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="3"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 22.0,
            lx + 28.0,
            ly + 4.0,
            escape(&b.method)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Maximal index ranges of consecutive finite values.
fn finite_runs(values: &[f64]) -> Vec<std::ops::Range<usize>> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, v) in values.iter().enumerate() {
        match (v.is_finite(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push(s..values.len());
    }
    runs
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        return format!("{v:.0e}");
    }
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

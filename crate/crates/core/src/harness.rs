//! Multi-restart experiments, their CSV traces and summaries.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::determinizer::mean_std;
use crate::error::{Error, Result};
use crate::model::ServiceSpec;
use crate::optimizer::{optimize, OptimizationTrace, OptimizeConfig};

pub const TRACE_COLUMNS: &str = "step,restart,rfm_value,periodic_value,seconds";
pub const SWEEP_COLUMNS: &str = "memory,restart,best_rfm,best_periodic,step_seconds";

/// Runs restarts `0..restarts` of `config` on a pool of `jobs` threads.
/// Output order is by restart index whatever the thread count.
pub fn run_restarts(spec: &ServiceSpec, config: &OptimizeConfig, restarts: usize, jobs: usize) -> Result<Vec<OptimizationTrace>> {
    if restarts == 0 {
        return Err(Error::invalid("at least one restart is required"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(|| {
        (0..restarts)
            .into_par_iter()
            .map(|r| {
                let cfg = OptimizeConfig {
                    restart: r as u64,
                    ..config.clone()
                };
                optimize(spec, &cfg)
            })
            .collect()
    })
}

/// Aggregates over restarts: the overall maxima and the mean and population
/// standard deviation of the per-restart maxima.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub restarts: usize,
    pub max_rfm: f64,
    pub mean_max_rfm: f64,
    pub std_max_rfm: f64,
    pub max_periodic: Option<f64>,
    pub mean_max_periodic: Option<f64>,
    pub std_max_periodic: Option<f64>,
}

pub fn summarize(traces: &[OptimizationTrace]) -> Summary {
    let rfm: Vec<f64> = traces.iter().map(|t| t.best_value).collect();
    let periodic: Vec<f64> = traces.iter().filter_map(|t| t.best_periodic()).collect();
    let (mean_max_rfm, std_max_rfm) = mean_std(&rfm);
    let (mp, sp) = if periodic.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_std(&periodic);
        (Some(m), Some(s))
    };
    Summary {
        restarts: traces.len(),
        max_rfm: rfm.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_max_rfm,
        std_max_rfm,
        max_periodic: periodic.iter().copied().reduce(f64::max),
        mean_max_periodic: mp,
        std_max_periodic: sp,
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), |v| format!("{v}"))
}

/// Trace CSV: a `#` comment header naming the columns, one row per step and
/// restart, then the summary as `#` comment lines.
pub fn trace_csv(traces: &[OptimizationTrace], summary: &Summary) -> String {
    let mut out = String::new();
    out.push_str("# periodic_value is nan when no periodic schedule was sampled\n");
    out.push_str("# summary maxima are per restart; mean/std are over restarts\n");
    out.push_str(TRACE_COLUMNS);
    out.push('\n');
    for t in traces {
        for s in &t.steps {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                s.step,
                t.restart,
                s.rfm_value,
                fmt_opt(s.periodic_value),
                s.seconds
            );
        }
    }
    let _ = writeln!(out, "# restarts {}", summary.restarts);
    let _ = writeln!(out, "# max_rfm {}", summary.max_rfm);
    let _ = writeln!(out, "# rfm_max_mean {} rfm_max_std {}", summary.mean_max_rfm, summary.std_max_rfm);
    let _ = writeln!(out, "# max_periodic {}", fmt_opt(summary.max_periodic));
    let _ = writeln!(
        out,
        "# periodic_max_mean {} periodic_max_std {}",
        fmt_opt(summary.mean_max_periodic),
        fmt_opt(summary.std_max_periodic)
    );
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub restart: u64,
    pub rfm_value: f64,
    pub periodic_value: Option<f64>,
    pub seconds: f64,
}

fn field<T: std::str::FromStr>(line: usize, name: &str, text: Option<&str>) -> Result<T> {
    text.and_then(|t| t.trim().parse().ok()).ok_or_else(|| Error::Parse {
        path: format!("line {line}, column {name}"),
        message: "missing or malformed value".into(),
    })
}

/// Reads the data rows of a trace CSV, skipping comments and the header.
pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() || line == TRACE_COLUMNS {
            continue;
        }
        let mut it = line.split(',');
        let step = field(i + 1, "step", it.next())?;
        let restart = field(i + 1, "restart", it.next())?;
        let rfm_value = field(i + 1, "rfm_value", it.next())?;
        let periodic: f64 = field(i + 1, "periodic_value", it.next())?;
        let seconds = field(i + 1, "seconds", it.next())?;
        rows.push(TraceRow {
            step,
            restart,
            rfm_value,
            periodic_value: (!periodic.is_nan()).then_some(periodic),
            seconds,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub memory: usize,
    pub restart: u64,
    pub best_rfm: f64,
    pub best_periodic: Option<f64>,
    /// Mean wall time of one optimization step.
    pub step_seconds: f64,
}

/// Optimization (and determinization, when configured) for each memory size.
pub fn sweep_memory(
    spec: &ServiceSpec,
    config: &OptimizeConfig,
    memories: &[usize],
    restarts: usize,
    jobs: usize,
) -> Result<Vec<SweepRow>> {
    if memories.iter().any(|&m| m == 0) {
        return Err(Error::invalid("memory sizes must be at least 1"));
    }
    let mut rows = Vec::new();
    for &memory in memories {
        let cfg = OptimizeConfig {
            memory_size: memory,
            ..config.clone()
        };
        for t in run_restarts(spec, &cfg, restarts, jobs)? {
            rows.push(SweepRow {
                memory,
                restart: t.restart,
                best_rfm: t.best_value,
                best_periodic: t.best_periodic(),
                step_seconds: t.mean_step_seconds(),
            });
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("# step_seconds is the mean wall time of one optimization step\n");
    out.push_str(SWEEP_COLUMNS);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.memory,
            r.restart,
            r.best_rfm,
            fmt_opt(r.best_periodic),
            r.step_seconds
        );
    }
    out
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() || line == SWEEP_COLUMNS {
            continue;
        }
        let mut it = line.split(',');
        let memory = field(i + 1, "memory", it.next())?;
        let restart = field(i + 1, "restart", it.next())?;
        let best_rfm = field(i + 1, "best_rfm", it.next())?;
        let periodic: f64 = field(i + 1, "best_periodic", it.next())?;
        let step_seconds = field(i + 1, "step_seconds", it.next())?;
        rows.push(SweepRow {
            memory,
            restart,
            best_rfm,
            best_periodic: (!periodic.is_nan()).then_some(periodic),
            step_seconds,
        });
    }
    Ok(rows)
}

/// Mean per-step seconds for each memory size, in sweep order.
pub fn mean_step_seconds_by_memory(rows: &[SweepRow]) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64, usize)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|(m, _, _)| *m == r.memory) {
            Some(e) => {
                e.1 += r.step_seconds;
                e.2 += 1;
            }
            None => out.push((r.memory, r.step_seconds, 1)),
        }
    }
    out.into_iter().map(|(m, s, c)| (m, s / c as f64)).collect()
}

//! Executes expanded runs on a worker pool and writes their outputs.
//!
//! Output directory layout:
//!
//! - `config.toml`: the experiment as executed (after CLI overrides)
//! - `runs/<id>.csv`: per-iteration trace
//! - `runs/<id>.json`: effective (preset-resolved) config and final metrics
//! - `summary.csv`: one row per run
//! - `budget.json`: oracle calls against the two-point budget, with
//!   diagnostic evaluations listed separately
//! - `checks.json`: results of the requested diagnostics, if any
//! - `metadata.json`: timestamps and host details, the only non-reproducible file

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use jaguar_core::diagnostics::{
    fit_convergence_slope, track_momentum_error, SlopeAxis, DEFAULT_BOUND_CONSTANT,
};
use jaguar_core::optimizers::{run, OptimizerConfig, OptimizerKind, RunTrace};
use jaguar_core::problems::{Problem, ProblemSpec};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{CheckName, ExperimentConfig, RunSpec};
use crate::error::{HarnessError, Result};

/// A finished run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub spec: RunSpec,
    pub trace: RunTrace,
}

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Report(format!("cannot start worker pool: {e}")))
}

fn build_problems(specs: &[RunSpec]) -> Result<BTreeMap<String, Arc<dyn Problem>>> {
    let mut problems = BTreeMap::new();
    for spec in specs {
        if let Entry::Vacant(slot) = problems.entry(problem_key(&spec.problem)) {
            slot.insert(spec.problem.build().map_err(|source| HarnessError::Run {
                run: spec.id(),
                source,
            })?);
        }
    }
    Ok(problems)
}

fn problem_key(spec: &ProblemSpec) -> String {
    serde_json::to_string(spec).expect("problem specs serialize")
}

/// Runs every spec on `workers` threads. Results come back in spec order,
/// and the first failure in that order is reported.
pub fn execute(specs: &[RunSpec], workers: usize) -> Result<Vec<RunOutcome>> {
    let problems = build_problems(specs)?;
    let results: Vec<Result<RunOutcome>> = thread_pool(workers)?.install(|| {
        specs
            .par_iter()
            .map(|spec| {
                let problem = &problems[&problem_key(&spec.problem)];
                log::debug!("starting {}", spec.id());
                run(spec.kind, problem.as_ref(), &spec.config)
                    .map(|trace| RunOutcome {
                        spec: spec.clone(),
                        trace,
                    })
                    .map_err(|source| HarnessError::Run {
                        run: spec.id(),
                        source,
                    })
            })
            .collect()
    });
    results.into_iter().collect()
}

/// Fixed-width float text with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

pub const TRACE_HEADER: [&str; 5] = ["t", "f_value", "grad_l1_or_s1", "momentum_err_sq", "oracle_calls"];

/// Trace CSV. Row `t = 0` is the start point, where every surrogate is zero.
pub fn write_trace(path: &Path, trace: &RunTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACE_HEADER)?;
    let init = &trace.initial;
    let initial_err = (!init.grad_sq_norm.is_nan()).then_some(init.grad_sq_norm);
    w.write_record([
        "0".to_string(),
        fmt_float(init.f_value),
        fmt_float(init.grad_norm),
        fmt_opt(initial_err),
        "0".to_string(),
    ])?;
    for r in &trace.records {
        w.write_record([
            r.t.to_string(),
            fmt_float(r.f_value),
            fmt_float(r.grad_norm),
            fmt_opt(r.momentum_err_sq),
            r.oracle_calls.to_string(),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct RunRecord<'a> {
    id: String,
    point: usize,
    label: &'a str,
    seed: u64,
    problem: &'a ProblemSpec,
    optimizer: OptimizerKind,
    effective_config: &'a OptimizerConfig,
    initial: &'a jaguar_core::optimizers::InitialMetrics,
    final_f_value: f64,
    final_grad: f64,
    selected_iterate: usize,
    selected_grad: f64,
    oracle_calls: u64,
    diagnostic_evaluations: u64,
    left_certified_region: bool,
}

pub const SUMMARY_HEADER: [&str; 19] = [
    "id",
    "point",
    "label",
    "seed",
    "optimizer",
    "gamma",
    "beta",
    "tau",
    "iterations",
    "delta",
    "noise",
    "initial_grad",
    "final_f_value",
    "final_grad",
    "selected_iterate",
    "selected_grad",
    "oracle_calls",
    "diagnostic_evaluations",
    "left_certified_region",
];

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable report");
    text.push('\n');
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Budget {
    pub runs: usize,
    pub optimizer_oracle_calls: u64,
    /// `sum over runs of 2 T`.
    pub two_point_budget: u64,
    pub within_budget: bool,
    /// Exact-gradient and objective evaluations made for the trace metrics.
    pub diagnostic_evaluations: u64,
}

pub fn budget(outcomes: &[RunOutcome]) -> Budget {
    let calls = outcomes.iter().map(|o| o.trace.oracle_calls).sum();
    let expected = outcomes
        .iter()
        .map(|o| 2 * o.trace.config.iterations as u64)
        .sum();
    Budget {
        runs: outcomes.len(),
        optimizer_oracle_calls: calls,
        two_point_budget: expected,
        within_budget: calls == expected,
        diagnostic_evaluations: outcomes.iter().map(|o| o.trace.diagnostic_evaluations).sum(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub check: CheckName,
    pub scope: String,
    pub passed: bool,
    pub detail: String,
    pub value: f64,
}

/// Evaluates the experiment's requested diagnostics over its finished runs.
pub fn run_checks(cfg: &ExperimentConfig, outcomes: &[RunOutcome]) -> Result<Vec<CheckRecord>> {
    let mut records = Vec::new();
    if cfg.checks.is_empty() {
        return Ok(records);
    }
    let problems = build_problems(&outcomes.iter().map(|o| o.spec.clone()).collect::<Vec<_>>())?;
    let mut by_point: BTreeMap<usize, Vec<&RunOutcome>> = BTreeMap::new();
    for o in outcomes {
        by_point.entry(o.spec.point).or_default().push(o);
    }
    let traces: Vec<RunTrace> = outcomes.iter().map(|o| o.trace.clone()).collect();
    for check in &cfg.checks {
        match check {
            CheckName::Lemma1 => {
                for group in by_point.values() {
                    let problem = &problems[&problem_key(&group[0].spec.problem)];
                    let traces: Vec<RunTrace> = group.iter().map(|o| o.trace.clone()).collect();
                    let report =
                        track_momentum_error(&traces, problem.as_ref(), DEFAULT_BOUND_CONSTANT)?;
                    records.push(CheckRecord {
                        check: *check,
                        scope: group[0].spec.label.clone(),
                        passed: report.violation_fraction == 0.0,
                        detail: format!(
                            "violation fraction {} with C = {}, smallest passing C = {}",
                            report.violation_fraction,
                            report.constant,
                            report.smallest_passing_constant
                        ),
                        value: report.violation_fraction,
                    });
                }
            }
            CheckName::SlopeT | CheckName::SlopeD => {
                let axis = if *check == CheckName::SlopeT {
                    SlopeAxis::Iterations
                } else {
                    SlopeAxis::Dimension
                };
                let slope = fit_convergence_slope(&traces, axis)?;
                records.push(CheckRecord {
                    check: *check,
                    scope: "all".into(),
                    passed: slope.is_finite(),
                    detail: format!("fitted log-log slope {slope}"),
                    value: slope,
                });
            }
        }
    }
    Ok(records)
}

/// Writes every reproducible output file for a finished experiment.
pub fn write_outputs(
    out: &Path,
    cfg: &ExperimentConfig,
    outcomes: &[RunOutcome],
    checks: &[CheckRecord],
) -> Result<()> {
    let runs_dir = out.join("runs");
    fs::create_dir_all(&runs_dir).map_err(|e| HarnessError::io(&runs_dir, e))?;
    let echo = out.join("config.toml");
    fs::write(&echo, cfg.to_toml_string()?).map_err(|e| HarnessError::io(&echo, e))?;

    let summary_path = out.join("summary.csv");
    let mut summary = csv::Writer::from_path(&summary_path)?;
    summary.write_record(SUMMARY_HEADER)?;
    for o in outcomes {
        let id = o.spec.id();
        let t = &o.trace;
        write_trace(&runs_dir.join(format!("{id}.csv")), t)?;
        let selected = t.selected_record();
        let last = t.final_record();
        write_json(
            &runs_dir.join(format!("{id}.json")),
            &RunRecord {
                id: id.clone(),
                point: o.spec.point,
                label: &o.spec.label,
                seed: o.spec.seed,
                problem: &o.spec.problem,
                optimizer: t.kind,
                effective_config: &t.config,
                initial: &t.initial,
                final_f_value: last.f_value,
                final_grad: last.grad_norm,
                selected_iterate: t.selected_iterate,
                selected_grad: selected.grad_norm,
                oracle_calls: t.oracle_calls,
                diagnostic_evaluations: t.diagnostic_evaluations,
                left_certified_region: t.left_certified_region,
            },
        )?;
        let c = &t.config;
        summary.write_record([
            id,
            o.spec.point.to_string(),
            o.spec.label.clone(),
            o.spec.seed.to_string(),
            t.kind.to_string(),
            fmt_float(c.gamma),
            fmt_float(c.beta),
            fmt_float(c.tau),
            c.iterations.to_string(),
            fmt_float(c.delta),
            serde_json::to_value(c.noise)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
            fmt_float(t.initial.grad_norm),
            fmt_float(last.f_value),
            fmt_float(last.grad_norm),
            t.selected_iterate.to_string(),
            fmt_float(selected.grad_norm),
            t.oracle_calls.to_string(),
            t.diagnostic_evaluations.to_string(),
            t.left_certified_region.to_string(),
        ])?;
    }
    summary.flush().map_err(|e| HarnessError::io(&summary_path, e))?;
    write_json(&out.join("budget.json"), &budget(outcomes))?;
    if !checks.is_empty() {
        write_json(&out.join("checks.json"), &checks)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Metadata {
    tool: &'static str,
    version: &'static str,
    started_at: String,
    finished_at: String,
    workers: usize,
    runs: usize,
}

pub fn write_metadata(
    out: &Path,
    started: chrono::DateTime<chrono::Utc>,
    workers: usize,
    runs: usize,
) -> Result<()> {
    write_json(
        &out.join("metadata.json"),
        &Metadata {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            started_at: started.to_rfc3339(),
            finished_at: chrono::Utc::now().to_rfc3339(),
            workers,
            runs,
        },
    )
}

/// Everything `jaguar run` does short of printing.
#[derive(Debug)]
pub struct Experiment {
    pub out: PathBuf,
    pub outcomes: Vec<RunOutcome>,
    pub checks: Vec<CheckRecord>,
    pub budget: Budget,
}

pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, workers: usize) -> Result<Experiment> {
    let started = chrono::Utc::now();
    let specs = cfg.expand()?;
    log::info!("{} runs on {workers} worker(s)", specs.len());
    let outcomes = execute(&specs, workers)?;
    let checks = run_checks(cfg, &outcomes)?;
    write_outputs(out, cfg, &outcomes, &checks)?;
    write_metadata(out, started, workers, outcomes.len())?;
    Ok(Experiment {
        out: out.to_path_buf(),
        budget: budget(&outcomes),
        outcomes,
        checks,
    })
}

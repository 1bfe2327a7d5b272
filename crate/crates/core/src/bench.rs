//! Multi-seed benchmark ensembles.
//!
//! An ensemble repeats one run specification `runs` times under seeds
//! `base_seed + i`. Each repeat rebuilds the task from its spec string with
//! the run's seed — seed-dependent targets (led patterns, texture and
//! mlpfit images, rocket apexes) are re-drawn — and starts the optimizer,
//! surrogate and RNG from scratch, so repeats share nothing but the
//! configuration. Runs execute in parallel; results are reduced in run-index
//! order, so ensembles are deterministic regardless of thread count.
//!
//! Curves from different runs are aligned on cumulative-evaluation
//! checkpoints (the union of every run's logged eval counts) by carrying
//! each run's last observation forward, then summarized by the pointwise
//! median. Export is CSV (flat rows, schema below) or JSON (adds per-run
//! metadata and the fully resolved configuration for provenance). Exports
//! are byte-stable across identical invocations except for wall-clock
//! fields.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::optimizers::{run, Method, RunConfig, RunResult, TraceRow};
use crate::stats;
use crate::tasks::parse_task_spec;

/// Bumped whenever an export field changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

/// Exact column header of the CSV export.
pub const CSV_HEADER: &str = "task,method,run,iter,evals,wall_ms,loss,grad_norm";

/// Wall-clock summary over an ensemble's runs (milliseconds).
#[derive(Debug, Clone, serde::Serialize)]
pub struct WallStats {
    pub total_ms: f64,
    pub mean_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

impl WallStats {
    fn from_runs(runs: &[RunResult]) -> Self {
        let total: f64 = runs.iter().map(|r| r.wall_ms).sum();
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for r in runs {
            min = min.min(r.wall_ms);
            max = max.max(r.wall_ms);
        }
        WallStats {
            total_ms: total,
            mean_ms: total / runs.len() as f64,
            min_ms: min,
            max_ms: max,
        }
    }
}

/// `runs` independent repeats of one (task, method) cell plus their
/// aligned-median convergence curve.
#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub task: String,
    pub method: Method,
    /// Run `i` used seed `base_seed + i`.
    pub base_seed: u64,
    pub budget_evals: u64,
    pub runs: Vec<RunResult>,
    /// (cumulative optimization evals, median loss over all runs) at every
    /// eval count any run logged, in increasing order.
    pub median_curve: Vec<(u64, f64)>,
    /// Final recorded loss of each run, in run order.
    pub final_losses: Vec<f64>,
    pub wall: WallStats,
}

/// Runs `template` `runs` times with seeds `template.seed + i`, rebuilding
/// the task from `task_spec` with each run's seed. A run that aborts (its
/// `aborted` field set) still contributes its trace; configuration errors
/// and unknown task specs fail the whole ensemble.
pub fn run_ensemble(task_spec: &str, template: &RunConfig, runs: usize) -> Result<EnsembleResult> {
    if runs == 0 {
        return Err(Error::Config("ensemble needs runs >= 1".into()));
    }
    let results: Vec<RunResult> = (0..runs as u64)
        .into_par_iter()
        .map(|i| {
            let seed = template.seed.wrapping_add(i);
            let task = parse_task_spec(task_spec, seed)?;
            let mut cfg = template.clone();
            cfg.seed = seed;
            run(&task, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let median_curve = aligned_median_curve(&results);
    let final_losses = results.iter().map(|r| r.final_loss).collect();
    let wall = WallStats::from_runs(&results);
    Ok(EnsembleResult {
        task: results[0].task.clone(),
        method: template.method,
        base_seed: template.seed,
        budget_evals: template.budget_evals,
        median_curve,
        final_losses,
        wall,
        runs: results,
    })
}

/// Pointwise median across runs, aligned on the union of their logged
/// cumulative-eval counts with each run's last observation carried forward.
/// Every run produced by `run` logs a row at zero spent evals, so each
/// series is defined at every checkpoint and the median at each checkpoint
/// covers all runs. When a run logged several rows at one eval count (a
/// final snapshot that spent nothing), the latest wins.
pub fn aligned_median_curve(runs: &[RunResult]) -> Vec<(u64, f64)> {
    let mut checkpoints: Vec<u64> = runs
        .iter()
        .flat_map(|r| r.rows.iter().map(|row| row.evals))
        .collect();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    if checkpoints.is_empty() {
        return Vec::new();
    }
    debug_assert!(
        runs.iter().all(|r| !r.rows.is_empty()),
        "a run without rows has no observation to carry forward"
    );
    let mut cursor = vec![0usize; runs.len()];
    let mut last = vec![f64::NAN; runs.len()];
    let mut curve = Vec::with_capacity(checkpoints.len());
    for &c in &checkpoints {
        for (i, r) in runs.iter().enumerate() {
            while cursor[i] < r.rows.len() && r.rows[cursor[i]].evals <= c {
                last[i] = r.rows[cursor[i]].loss;
                cursor[i] += 1;
            }
        }
        curve.push((c, stats::median(&last)));
    }
    curve
}

/// Output encodings of the export step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(Error::Config(format!(
                "unknown format `{other}` (expected csv or json)"
            ))),
        }
    }
}

/// A full (tasks x methods) benchmark: every cell is an ensemble run under
/// the same budget, seeds and template, so curves are comparable
/// eval-for-eval.
#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub tasks: Vec<String>,
    pub methods: Vec<Method>,
    pub budget_evals: u64,
    pub runs: usize,
    pub base_seed: u64,
    pub out: Option<std::path::PathBuf>,
    pub format: ExportFormat,
    /// Shared run settings; its method, budget and seed are overwritten per
    /// cell from the fields above.
    pub template: RunConfig,
}

impl BenchmarkConfig {
    pub fn new(budget_evals: u64) -> Self {
        BenchmarkConfig {
            tasks: Vec::new(),
            methods: Vec::new(),
            budget_evals,
            runs: 10,
            base_seed: 0,
            out: None,
            format: ExportFormat::Csv,
            template: RunConfig::new(Method::ZeroGrads, budget_evals, 0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tasks.is_empty() {
            return Err(Error::Config("benchmark needs at least one task".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("benchmark needs at least one method".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("benchmark needs runs >= 1".into()));
        }
        if self.budget_evals == 0 {
            return Err(Error::Config("benchmark needs a positive budget".into()));
        }
        Ok(())
    }
}

/// Runs every (task, method) cell of `cfg` and returns the ensembles in
/// row-major (task-outer) order.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<Vec<EnsembleResult>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.tasks.len() * cfg.methods.len());
    for task in &cfg.tasks {
        for &method in &cfg.methods {
            let mut template = cfg.template.clone();
            template.method = method;
            template.budget_evals = cfg.budget_evals;
            template.seed = cfg.base_seed;
            out.push(run_ensemble(task, &template, cfg.runs)?);
        }
    }
    Ok(out)
}

/// Writes all ensembles as flat CSV. A `#` comment preamble embeds the
/// schema version and, per ensemble, the seeds and fully resolved
/// configuration needed to reproduce the file; [`parse_csv`] skips it. Then
/// the header line, then one row per trace row (`grad_norm` empty for
/// rows without one) — a run with an empty trace contributes nothing. The
/// output is identical across invocations with equal inputs except for the
/// wall_ms column.
pub fn write_csv<W: Write>(results: &[EnsembleResult], mut w: W) -> Result<()> {
    writeln!(w, "# schema_version={SCHEMA_VERSION}")?;
    for (idx, e) in results.iter().enumerate() {
        writeln!(
            w,
            "# ensemble={idx} task={} method={} base_seed={} runs={} budget_evals={} (run i seeded base_seed+i)",
            e.task,
            e.method,
            e.base_seed,
            e.runs.len(),
            e.budget_evals
        )?;
        if let Some(r0) = e.runs.first() {
            let kv: Vec<String> = r0.header.iter().map(|(k, v)| format!("{k}={v}")).collect();
            writeln!(w, "# ensemble={idx} config {}", kv.join(" "))?;
        }
    }
    writeln!(w, "{CSV_HEADER}")?;
    for e in results {
        for (i, r) in e.runs.iter().enumerate() {
            for row in &r.rows {
                let grad = match row.grad_norm {
                    Some(g) => g.to_string(),
                    None => String::new(),
                };
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{}",
                    e.task, e.method, i, row.iter, row.evals, row.wall_ms, row.loss, grad
                )?;
            }
        }
    }
    Ok(())
}

pub fn export_csv(results: &[EnsembleResult], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv(results, &mut w)?;
    w.flush()?;
    Ok(())
}

/// One parsed CSV data row; field meanings match [`CSV_HEADER`].
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub task: String,
    pub method: String,
    pub run: usize,
    pub iter: u64,
    pub evals: u64,
    pub wall_ms: f64,
    pub loss: f64,
    pub grad_norm: Option<f64>,
}

/// Parses text produced by [`write_csv`]. Blank lines and `#` comments are
/// tolerated; the header line is required.
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    fn field<T: std::str::FromStr>(s: &str, line: &str) -> Result<T> {
        s.parse()
            .map_err(|_| Error::Config(format!("bad csv field `{s}` in line `{line}`")))
    }
    let mut rows = Vec::new();
    let mut saw_header = false;
    for line in text.lines() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != CSV_HEADER {
                return Err(Error::Config(format!("unexpected csv header `{line}`")));
            }
            saw_header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(Error::Config(format!(
                "expected 8 csv fields, got {} in line `{line}`",
                f.len()
            )));
        }
        rows.push(CsvRow {
            task: f[0].to_string(),
            method: f[1].to_string(),
            run: field(f[2], line)?,
            iter: field(f[3], line)?,
            evals: field(f[4], line)?,
            wall_ms: field(f[5], line)?,
            loss: field(f[6], line)?,
            grad_norm: if f[7].is_empty() {
                None
            } else {
                Some(field(f[7], line)?)
            },
        });
    }
    if !saw_header {
        return Err(Error::Config("csv header line missing".into()));
    }
    Ok(rows)
}

#[derive(serde::Serialize)]
struct JsonRun<'a> {
    run: usize,
    seed: u64,
    aborted: &'a Option<String>,
    initial_params: &'a [f64],
    final_params: &'a [f64],
    final_loss: f64,
    optimization_evals: u64,
    bookkeeping_evals: u64,
    wall_ms: f64,
    rows: &'a [TraceRow],
}

#[derive(serde::Serialize)]
struct JsonEnsemble<'a> {
    task: &'a str,
    method: &'a str,
    base_seed: u64,
    budget_evals: u64,
    /// Fully resolved settings of run 0 (identical across runs up to seed).
    config: BTreeMap<&'a str, &'a str>,
    runs: Vec<JsonRun<'a>>,
    median_curve: &'a [(u64, f64)],
    final_losses: &'a [f64],
    wall_time_stats: &'a WallStats,
}

#[derive(serde::Serialize)]
struct JsonExport<'a> {
    schema_version: u32,
    ensembles: Vec<JsonEnsemble<'a>>,
}

/// Writes the ensembles as one JSON document carrying everything the CSV
/// does plus per-run metadata and the resolved configuration.
pub fn export_json(results: &[EnsembleResult], path: &Path) -> Result<()> {
    let doc = JsonExport {
        schema_version: SCHEMA_VERSION,
        ensembles: results
            .iter()
            .map(|e| JsonEnsemble {
                task: &e.task,
                method: e.method.name(),
                base_seed: e.base_seed,
                budget_evals: e.budget_evals,
                config: e
                    .runs
                    .first()
                    .map(|r| {
                        r.header
                            .iter()
                            .map(|(k, v)| (k.as_str(), v.as_str()))
                            .collect()
                    })
                    .unwrap_or_default(),
                runs: e
                    .runs
                    .iter()
                    .enumerate()
                    .map(|(i, r)| JsonRun {
                        run: i,
                        seed: r.seed,
                        aborted: &r.aborted,
                        initial_params: &r.initial_params,
                        final_params: &r.final_params,
                        final_loss: r.final_loss,
                        optimization_evals: r.optimization_evals,
                        bookkeeping_evals: r.bookkeeping_evals,
                        wall_ms: r.wall_ms,
                        rows: &r.rows,
                    })
                    .collect(),
                median_curve: &e.median_curve,
                final_losses: &e.final_losses,
                wall_time_stats: &e.wall,
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&doc)
        .map_err(|err| Error::Config(format!("json encoding: {err}")))?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(text.as_bytes())?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Dispatches on `format`; the CLI's single export entry point.
pub fn export(results: &[EnsembleResult], format: ExportFormat, path: &Path) -> Result<()> {
    match format {
        ExportFormat::Csv => export_csv(results, path),
        ExportFormat::Json => export_json(results, path),
    }
}

/// Packages one finished run as a single-run ensemble so the exporters can
/// be reused for `run` output.
pub fn wrap_single(run: RunResult, budget_evals: u64) -> EnsembleResult {
    EnsembleResult {
        task: run.task.clone(),
        method: run.method,
        base_seed: run.seed,
        budget_evals,
        median_curve: aligned_median_curve(std::slice::from_ref(&run)),
        final_losses: vec![run.final_loss],
        wall: WallStats::from_runs(std::slice::from_ref(&run)),
        runs: vec![run],
    }
}

//! Command-line front end.
//!
//! Five subcommands: `run` (one optimization run), `bench` (a tasks x
//! methods ensemble matrix under one budget), `variance` (gradient-noise
//! trace along a run), `list` (registry contents) and `check` (gradient and
//! estimator self-tests). Settings layer as defaults < `--config` file <
//! command-line flags; the config file is flat `key = value` lines under
//! `[section]` headers (annotated example in the README).
//!
//! Exit codes: 0 success, 1 runtime failure (I/O, numerics, failed
//! self-check), 2 bad arguments or bad config.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{self, run_benchmark, BenchmarkConfig, ExportFormat};
use crate::error::{Error, Result};
use crate::estimator::{unbiasedness_probe, ProbeConfig};
use crate::optimizers::{gradient_variance_trace, run, Method, RunConfig};
use crate::stats;
use crate::surrogate::{run_gradient_check, Activation, SurrogateKind};
use crate::tasks::{list_tasks, parse_task_spec};

const DEFAULT_BUDGET: u64 = 20_000;

#[derive(Parser)]
#[command(
    name = "surrograd",
    version,
    about = "Black-box optimization through learned local surrogate gradients",
    max_term_width = 100
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one optimization run and print its summary.
    Run(RunArgs),
    /// Run every (task, method) ensemble cell under one shared budget.
    Bench(BenchArgs),
    /// Trace the sliding variance of gradient-estimate magnitudes along one
    /// run (methods: zerograds, spsa, fr22).
    Variance(VarianceArgs),
    /// List the registered tasks and methods.
    List,
    /// Self-checks: analytic-vs-numeric surrogate gradients and the
    /// closed-form estimator bias probe.
    Check(CheckArgs),
}

/// Flags shared by run/bench/variance. Unset flags fall back to the
/// `--config` file, then to built-in defaults.
#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// Task spec, e.g. plateau1d, rosenbrock:8, led:8x8, mlpfit:small
    /// (bench: comma-separated list).
    #[arg(long)]
    task: Option<String>,
    /// Method name (bench: comma-separated list); see `list`.
    #[arg(long)]
    method: Option<String>,
    /// Objective-evaluation budget per run.
    #[arg(long)]
    budget: Option<u64>,
    /// Base RNG seed; ensembles seed run i with seed+i.
    #[arg(long)]
    seed: Option<u64>,
    /// Neighborhood sampling spread (absolute).
    #[arg(long)]
    sigma_outer: Option<f64>,
    /// Samples per surrogate fitting batch.
    #[arg(long)]
    batch: Option<usize>,
    /// Record every Nth iteration into the trace.
    #[arg(long)]
    log_every: Option<u64>,
    /// Output file for the trace/ensemble export.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Export encoding: csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Layered key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Independent reseeded runs per (task, method) cell.
    #[arg(long)]
    runs: Option<usize>,
    /// Worker threads for parallel runs (default: logical cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct VarianceArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Sliding window length, in iterations.
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Args)]
struct CheckArgs {
    /// Random (surrogate, input) instances per surrogate kind.
    #[arg(long, default_value_t = 100)]
    instances: usize,
    /// Monte-Carlo estimates for the bias probe.
    #[arg(long, default_value_t = 100_000)]
    estimates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Every layerable knob, all optional. Later layers win field-by-field.
#[derive(Debug, Clone, Default)]
struct Overrides {
    task: Option<String>,
    method: Option<String>,
    budget: Option<u64>,
    runs: Option<usize>,
    seed: Option<u64>,
    log_every: Option<u64>,
    out: Option<PathBuf>,
    format: Option<ExportFormat>,
    jobs: Option<usize>,
    window: Option<usize>,
    init: Option<Vec<f64>>,
    sigma_outer: Option<f64>,
    sigma_inner_ratio: Option<f64>,
    batch: Option<usize>,
    lr_phi: Option<f64>,
    lr_theta: Option<f64>,
    k_inner: Option<usize>,
    warmup: Option<usize>,
    surrogate_kind: Option<SurrogateKind>,
    hidden: Option<Vec<usize>>,
    activation: Option<Activation>,
    quad_init_scale: Option<f64>,
    fd_eps_rel: Option<f64>,
    spsa_c_rel: Option<f64>,
    sa_alpha: Option<f64>,
    sa_sigma_rel: Option<f64>,
    ga_pop: Option<usize>,
    ga_tournament: Option<usize>,
    ga_crossover: Option<f64>,
    ga_sigma_rel: Option<f64>,
}

macro_rules! layer_fields {
    ($hi:expr, $lo:expr, { $($f:ident),* $(,)? }) => {
        Overrides { $($f: $hi.$f.or($lo.$f)),* }
    };
}

impl Overrides {
    /// `self` wins over `base` wherever both are set.
    fn over(self, base: Overrides) -> Overrides {
        layer_fields!(self, base, {
            task, method, budget, runs, seed, log_every, out, format, jobs,
            window, init, sigma_outer, sigma_inner_ratio, batch, lr_phi,
            lr_theta, k_inner, warmup, surrogate_kind, hidden, activation,
            quad_init_scale, fd_eps_rel, spsa_c_rel, sa_alpha, sa_sigma_rel,
            ga_pop, ga_tournament, ga_crossover, ga_sigma_rel,
        })
    }

    fn from_common(c: &CommonArgs) -> Result<Overrides> {
        Ok(Overrides {
            task: c.task.clone(),
            method: c.method.clone(),
            budget: c.budget,
            seed: c.seed,
            sigma_outer: c.sigma_outer,
            batch: c.batch,
            log_every: c.log_every,
            out: c.out.clone(),
            format: c.format.as_deref().map(str::parse).transpose()?,
            ..Overrides::default()
        })
    }

    /// Copies the sampler/surrogate/baseline knobs into a run template.
    /// Identity knobs (task, method, budget, seed) are handled per command.
    fn apply_to(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.sigma_outer {
            cfg.sigma_outer = Some(v);
        }
        if let Some(v) = self.sigma_inner_ratio {
            cfg.sigma_inner_ratio = v;
        }
        if let Some(v) = self.batch {
            cfg.batch_size = Some(v);
        }
        if let Some(v) = self.lr_theta {
            cfg.lr_theta = Some(v);
        }
        if let Some(v) = self.log_every {
            cfg.log_every = v;
        }
        if let Some(v) = &self.init {
            cfg.init_params = Some(v.clone());
        }
        if let Some(v) = self.lr_phi {
            cfg.hp.lr_phi = Some(v);
        }
        if let Some(v) = self.k_inner {
            cfg.hp.k_inner = Some(v);
        }
        if let Some(v) = self.warmup {
            cfg.hp.warmup = Some(v);
        }
        if let Some(v) = self.surrogate_kind {
            cfg.hp.surrogate.kind = v;
        }
        if let Some(v) = &self.hidden {
            cfg.hp.surrogate.hidden = Some(v.clone());
        }
        if let Some(v) = self.activation {
            cfg.hp.surrogate.activation = v;
        }
        if let Some(v) = self.quad_init_scale {
            cfg.hp.surrogate.quad_init_scale = v;
        }
        if let Some(v) = self.fd_eps_rel {
            cfg.hp.fd_eps_rel = v;
        }
        if let Some(v) = self.spsa_c_rel {
            cfg.hp.spsa_c_rel = v;
        }
        if let Some(v) = self.sa_alpha {
            cfg.hp.sa_alpha = v;
        }
        if let Some(v) = self.sa_sigma_rel {
            cfg.hp.sa_sigma_rel = v;
        }
        if let Some(v) = self.ga_pop {
            cfg.hp.ga_pop = v;
        }
        if let Some(v) = self.ga_tournament {
            cfg.hp.ga_tournament = v;
        }
        if let Some(v) = self.ga_crossover {
            cfg.hp.ga_crossover = v;
        }
        if let Some(v) = self.ga_sigma_rel {
            cfg.hp.ga_sigma_rel = v;
        }
    }
}

fn parse_list<T: std::str::FromStr<Err = Error>>(s: &str, what: &str) -> Result<Vec<T>> {
    let items: Vec<T> = s
        .split(',')
        .filter(|p| !p.is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("empty {what} list `{s}`")));
    }
    Ok(items)
}

fn parse_hidden(s: &str) -> Result<Vec<usize>> {
    let sizes: Vec<usize> = s
        .split('x')
        .map(|p| {
            p.parse::<usize>()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| Error::Config(format!("bad hidden spec `{s}` (e.g. 64x64)")))
        })
        .collect::<Result<_>>()?;
    Ok(sizes)
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number `{p}` in `{s}`")))
        })
        .collect()
}

/// Parses the flat `[section]` / `key = value` config format. `#` and `;`
/// start comments. Unknown sections or keys are errors so typos can't
/// silently fall back to defaults.
fn parse_config_file(text: &str, origin: &Path) -> Result<Overrides> {
    fn num<T: std::str::FromStr>(v: &str, key: &str) -> Result<T> {
        v.parse()
            .map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
    }
    let mut o = Overrides::default();
    let mut section = String::from("run");
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find(['#', ';']) {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let fail = |msg: String| {
            Error::Config(format!("{}:{}: {msg}", origin.display(), lineno + 1))
        };
        if let Some(name) = line.strip_prefix('[') {
            section = name
                .strip_suffix(']')
                .ok_or_else(|| fail(format!("unterminated section `{line}`")))?
                .trim()
                .to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| fail(format!("expected key = value, got `{line}`")))?;
        let (key, v) = (key.trim(), value.trim());
        match (section.as_str(), key) {
            ("run", "task") => o.task = Some(v.to_string()),
            ("run", "method") => o.method = Some(v.to_string()),
            ("run", "budget") => o.budget = Some(num(v, key)?),
            ("run", "runs") => o.runs = Some(num(v, key)?),
            ("run", "seed") => o.seed = Some(num(v, key)?),
            ("run", "log_every") => o.log_every = Some(num(v, key)?),
            ("run", "out") => o.out = Some(PathBuf::from(v)),
            ("run", "format") => o.format = Some(v.parse()?),
            ("run", "jobs") => o.jobs = Some(num(v, key)?),
            ("run", "window") => o.window = Some(num(v, key)?),
            ("run", "init") => o.init = Some(parse_floats(v)?),
            ("sampler", "sigma_outer") => o.sigma_outer = Some(num(v, key)?),
            ("sampler", "sigma_inner_ratio") => o.sigma_inner_ratio = Some(num(v, key)?),
            ("sampler", "batch") => o.batch = Some(num(v, key)?),
            ("zerograds", "lr_phi") => o.lr_phi = Some(num(v, key)?),
            ("zerograds", "lr_theta") => o.lr_theta = Some(num(v, key)?),
            ("zerograds", "k_inner") => o.k_inner = Some(num(v, key)?),
            ("zerograds", "warmup") => o.warmup = Some(num(v, key)?),
            ("surrogate", "kind") => o.surrogate_kind = Some(v.parse()?),
            ("surrogate", "hidden") => o.hidden = Some(parse_hidden(v)?),
            ("surrogate", "activation") => o.activation = Some(v.parse()?),
            ("surrogate", "quad_init_scale") => o.quad_init_scale = Some(num(v, key)?),
            ("fd", "eps_rel") => o.fd_eps_rel = Some(num(v, key)?),
            ("spsa", "c_rel") => o.spsa_c_rel = Some(num(v, key)?),
            ("sa", "alpha") => o.sa_alpha = Some(num(v, key)?),
            ("sa", "sigma_rel") => o.sa_sigma_rel = Some(num(v, key)?),
            ("ga", "pop") => o.ga_pop = Some(num(v, key)?),
            ("ga", "tournament") => o.ga_tournament = Some(num(v, key)?),
            ("ga", "crossover") => o.ga_crossover = Some(num(v, key)?),
            ("ga", "sigma_rel") => o.ga_sigma_rel = Some(num(v, key)?),
            _ => return Err(fail(format!("unknown key `{key}` in section [{section}]"))),
        }
    }
    Ok(o)
}

/// Resolves the layering for one subcommand: built-ins < file < flags.
fn gather(common: &CommonArgs) -> Result<Overrides> {
    let flags = Overrides::from_common(common)?;
    match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            Ok(flags.over(parse_config_file(&text, path)?))
        }
        None => Ok(flags),
    }
}

fn fmt_params(p: &[f64]) -> String {
    let body: Vec<String> = p.iter().take(6).map(|v| format!("{v:.4}")).collect();
    if p.len() > 6 {
        format!("[{}, ... {} total]", body.join(", "), p.len())
    } else {
        format!("[{}]", body.join(", "))
    }
}

fn cmd_run<W: Write>(args: &RunArgs, w: &mut W) -> Result<()> {
    let o = gather(&args.common)?;
    let spec = o
        .task
        .clone()
        .ok_or_else(|| Error::Config("run needs --task (see `list`)".into()))?;
    let method: Method = o.method.as_deref().unwrap_or("zerograds").parse()?;
    let mut cfg = RunConfig::new(
        method,
        o.budget.unwrap_or(DEFAULT_BUDGET),
        o.seed.unwrap_or(0),
    );
    o.apply_to(&mut cfg);
    let task = parse_task_spec(&spec, cfg.seed)?;
    let res = run(&task, &cfg)?;
    writeln!(
        w,
        "task {} (dim {})  method {}  seed {}  budget {}",
        res.task,
        task.dim(),
        res.method,
        res.seed,
        cfg.budget_evals
    )?;
    writeln!(
        w,
        "initial loss {:.6e}  final loss {:.6e}",
        res.initial_loss(),
        res.final_loss
    )?;
    writeln!(
        w,
        "spent {} optimization evals (+{} bookkeeping) in {:.1} ms over {} logged rows",
        res.optimization_evals,
        res.bookkeeping_evals,
        res.wall_ms,
        res.rows.len()
    )?;
    writeln!(w, "final params {}", fmt_params(&res.final_params))?;
    if let Some(reason) = &res.aborted {
        writeln!(w, "aborted early: {reason}")?;
    }
    if let Some(path) = &o.out {
        let ens = bench::wrap_single(res, cfg.budget_evals);
        bench::export(
            std::slice::from_ref(&ens),
            o.format.unwrap_or(ExportFormat::Csv),
            path,
        )?;
        writeln!(w, "wrote {}", path.display())?;
    }
    Ok(())
}

fn cmd_bench<W: Write>(args: &BenchArgs, w: &mut W) -> Result<()> {
    let mut o = gather(&args.common)?;
    o.runs = args.runs.or(o.runs);
    o.jobs = args.jobs.or(o.jobs);
    let tasks = match &o.task {
        Some(s) => parse_list::<TaskSpec>(s, "task")?
            .into_iter()
            .map(|t| t.0)
            .collect(),
        None => return Err(Error::Config("bench needs --task (comma-separated)".into())),
    };
    let methods: Vec<Method> = match &o.method {
        Some(s) => parse_list(s, "method")?,
        None => Method::ALL.to_vec(),
    };
    if let Some(jobs) = o.jobs {
        // First initialization wins; later invocations in one process keep
        // the existing pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let mut bc = BenchmarkConfig::new(o.budget.unwrap_or(DEFAULT_BUDGET));
    bc.tasks = tasks;
    bc.methods = methods;
    bc.runs = o.runs.unwrap_or(10);
    bc.base_seed = o.seed.unwrap_or(0);
    bc.template.seed = bc.base_seed;
    bc.template.log_every = 10;
    o.apply_to(&mut bc.template);
    let results = run_benchmark(&bc)?;
    writeln!(
        w,
        "{:<16} {:<20} {:>12} {:>12} {:>12} {:>9}",
        "task", "method", "median_final", "best_final", "worst_final", "ms/run"
    )?;
    for e in &results {
        let best = e.final_losses.iter().cloned().fold(f64::INFINITY, f64::min);
        let worst = e
            .final_losses
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        writeln!(
            w,
            "{:<16} {:<20} {:>12.4e} {:>12.4e} {:>12.4e} {:>9.1}",
            e.task,
            e.method.name(),
            stats::median(&e.final_losses),
            best,
            worst,
            e.wall.mean_ms
        )?;
        let aborted = e.runs.iter().filter(|r| r.aborted.is_some()).count();
        if aborted > 0 {
            writeln!(w, "  warning: {aborted}/{} runs aborted", e.runs.len())?;
        }
    }
    if let Some(path) = &o.out {
        bench::export(&results, o.format.unwrap_or(ExportFormat::Csv), path)?;
        writeln!(w, "wrote {}", path.display())?;
    }
    Ok(())
}

/// Newtype so task specs can ride through `parse_list`, validating eagerly.
struct TaskSpec(String);

impl std::str::FromStr for TaskSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_task_spec(s, 0)?; // validate shape; instances are re-built per run
        Ok(TaskSpec(s.to_string()))
    }
}

fn cmd_variance<W: Write>(args: &VarianceArgs, w: &mut W) -> Result<()> {
    let mut o = gather(&args.common)?;
    o.window = args.window.or(o.window);
    let spec = o
        .task
        .clone()
        .ok_or_else(|| Error::Config("variance needs --task".into()))?;
    let method: Method = o.method.as_deref().unwrap_or("zerograds").parse()?;
    let window = o.window.unwrap_or(50);
    let mut cfg = RunConfig::new(
        method,
        o.budget.unwrap_or(DEFAULT_BUDGET),
        o.seed.unwrap_or(0),
    );
    o.apply_to(&mut cfg);
    let task = parse_task_spec(&spec, cfg.seed)?;
    let trace = gradient_variance_trace(&task, &cfg, window)?;
    writeln!(
        w,
        "task {}  method {}  {} gradient estimates, window {}",
        spec,
        trace.method.name(),
        trace.grad_norms.len(),
        trace.window
    )?;
    match trace.median_windowed() {
        Some(m) => writeln!(w, "median windowed variance {m:.6e}")?,
        None => writeln!(
            w,
            "trace shorter than the window; no variance summary"
        )?,
    }
    if let Some(path) = &o.out {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(file, "# schema_version={}", bench::SCHEMA_VERSION)?;
        writeln!(
            file,
            "# task={spec} method={} seed={} budget_evals={} window={window}",
            trace.method.name(),
            cfg.seed,
            cfg.budget_evals
        )?;
        writeln!(file, "iter,grad_norm,windowed_variance")?;
        for (i, g) in trace.grad_norms.iter().enumerate() {
            let var = i
                .checked_sub(window - 1)
                .and_then(|j| trace.windowed.get(j))
                .map(|v| v.to_string())
                .unwrap_or_default();
            writeln!(file, "{i},{g},{var}")?;
        }
        file.flush()?;
        writeln!(w, "wrote {}", path.display())?;
    }
    Ok(())
}

fn cmd_list<W: Write>(w: &mut W) -> Result<()> {
    writeln!(w, "tasks (seed re-draws the target where one exists):")?;
    for (spec, desc) in list_tasks() {
        writeln!(w, "  {spec:<16} {desc}")?;
    }
    writeln!(w)?;
    writeln!(w, "methods:")?;
    for m in Method::ALL {
        writeln!(w, "  {:<20} {}", m.name(), m.description())?;
    }
    Ok(())
}

/// Runs the self-checks; `Ok(false)` means a check failed (exit 1).
fn cmd_check<W: Write>(args: &CheckArgs, w: &mut W) -> Result<bool> {
    let mut all_ok = true;
    for kind in [SurrogateKind::Mlp, SurrogateKind::Quadratic] {
        let rep = run_gradient_check(kind, args.instances, args.seed, 1e-4, 1e-4, 1e-7);
        let ok = rep.failures == 0;
        all_ok &= ok;
        writeln!(
            w,
            "gradcheck {:<10} {} instances  max rel err {:.2e}  {}",
            format!("{:?}", rep.kind).to_lowercase(),
            rep.instances,
            rep.max_rel_err,
            if ok { "ok" } else { "FAILED" }
        )?;
    }
    let probe = unbiasedness_probe(&ProbeConfig {
        n_estimates: args.estimates,
        seed: args.seed.wrapping_add(7),
        ..ProbeConfig::default()
    });
    let worst_z = probe.z_scores.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    let ok = worst_z < 4.0;
    all_ok &= ok;
    writeln!(
        w,
        "estimator bias probe: {} estimates, worst |z| {:.2} across 4 coordinates  {}",
        args.estimates,
        worst_z,
        if ok { "ok" } else { "FAILED" }
    )?;
    Ok(all_ok)
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::UnknownTask(_)
        | Error::UnknownMethod(_)
        | Error::Dimension { .. } => 2,
        _ => 1,
    }
}

/// Full CLI dispatch writing user output to `w`; returns the process exit
/// code. Errors print to stderr.
pub fn cli_main_to<I, T, W>(argv: I, w: &mut W) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
    W: Write,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version to stdout (exit 0) and usage errors
            // to stderr (exit 2) on its own.
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match &cli.command {
        Command::Run(a) => cmd_run(a, w).map(|_| true),
        Command::Bench(a) => cmd_bench(a, w).map(|_| true),
        Command::Variance(a) => cmd_variance(a, w).map(|_| true),
        Command::List => cmd_list(w).map(|_| true),
        Command::Check(a) => cmd_check(a, w),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Entry point for `main`: parses `argv`, writes to stdout.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    cli_main_to(argv, &mut lock)
}

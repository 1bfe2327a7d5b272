//! Non-differentiable black-box objectives.
//!
//! Each task is a pure loss function f: R^n -> R>=0 over a box domain, with
//! an atomic evaluation counter so optimizers can be audited against their
//! sample budgets. Out-of-domain parameters are clamped to the box before
//! evaluation rather than rejected; optimizers may therefore probe freely
//! with unconstrained Gaussian samples.

use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::sampling::Rng;

/// Axis-aligned box of feasible parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (lo, hi) in lower.iter().zip(&upper) {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::non_finite("domain bounds"));
            }
            if lo >= hi {
                return Err(Error::Config(format!(
                    "domain bounds must satisfy lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Domain { lower, upper })
    }

    /// n-dimensional box with identical per-axis bounds.
    pub fn uniform_box(dim: usize, lo: f64, hi: f64) -> Self {
        Domain::new(vec![lo; dim], vec![hi; dim]).expect("uniform_box bounds")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Mean per-axis extent; the natural length scale for step sizes and
    /// sampling widths.
    pub fn extent(&self) -> f64 {
        let sum: f64 = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| hi - lo)
            .sum();
        sum / self.dim() as f64
    }

    pub fn clamp(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.dim(), "clamp: dimension mismatch");
        for i in 0..x.len() {
            x[i] = x[i].clamp(self.lower[i], self.upper[i]);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Uniform draw from the box. Consumes exactly `dim` RNG outputs.
    pub fn sample_uniform(&self, rng: &mut Rng) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| rng.uniform_in(*lo, *hi))
            .collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }
}

/// Which built-in objective a task is; drives per-task defaults and image
/// dumps without string matching.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskKind {
    Custom,
    Plateau1d,
    Rosenbrock { n: usize },
    Led { w: usize, h: usize },
    Rocket { rockets: usize, steps: usize },
    Texture { w: usize, h: usize },
    MlpFit { arch: Vec<usize> },
}

/// A black-box objective. Evaluation clamps into the domain, checks inputs,
/// and bumps an atomic counter; the loss itself is opaque to optimizers.
pub struct BlackBoxTask {
    name: String,
    kind: TaskKind,
    domain: Domain,
    evals: AtomicU64,
    optimum_loss: Option<f64>,
    ground_truth: Option<Vec<f64>>,
    f: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl fmt::Debug for BlackBoxTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlackBoxTask")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("evals", &self.eval_count())
            .finish()
    }
}

impl BlackBoxTask {
    pub fn from_fn(
        name: impl Into<String>,
        domain: Domain,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        BlackBoxTask {
            name: name.into(),
            kind: TaskKind::Custom,
            domain,
            evals: AtomicU64::new(0),
            optimum_loss: None,
            ground_truth: None,
            f: Box::new(f),
        }
    }

    fn with_kind(mut self, kind: TaskKind) -> Self {
        self.kind = kind;
        self
    }

    fn with_optimum(mut self, loss: f64) -> Self {
        self.optimum_loss = Some(loss);
        self
    }

    fn with_ground_truth(mut self, truth: Vec<f64>) -> Self {
        self.ground_truth = Some(truth);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &TaskKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Loss at the known optimum, when one exists analytically.
    pub fn optimum_loss(&self) -> Option<f64> {
        self.optimum_loss
    }

    /// Task-specific reference data (target bits, target image, target
    /// cutoff fractions, ...); for oracle checks, not for optimizers.
    pub fn ground_truth(&self) -> Option<&[f64]> {
        self.ground_truth.as_deref()
    }

    /// Total number of evaluations so far, including bookkeeping ones.
    pub fn eval_count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    /// Evaluates the loss at `theta` (clamped into the domain) and charges
    /// one evaluation. Non-negativity and finiteness of the loss are task
    /// construction invariants and asserted.
    pub fn evaluate(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: theta.len(),
            });
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite(format!("parameters for task {}", self.name)));
        }
        let mut x = theta.to_vec();
        self.domain.clamp(&mut x);
        let loss = (self.f)(&x);
        assert!(
            loss.is_finite() && loss >= 0.0,
            "task {} violated its loss invariant at {x:?}: {loss}",
            self.name
        );
        self.evals.fetch_add(1, Ordering::Relaxed);
        Ok(loss)
    }
}

// ---------------------------------------------------------------------------
// plateau1d

pub const PLATEAU_RANGE: (f64, f64) = (-2.0, -0.5);
pub const PLATEAU_VALUE: f64 = 1.3;
/// Minimizer of the quadratic basin.
pub const PLATEAU_OPTIMUM: f64 = 1.0;

/// 1-D piecewise objective with an exactly flat shelf, a downward jump, and
/// a quadratic basin: 1.3 on [-2, -0.5], 1.0 on (-0.5, 0), (theta-1)^2 on
/// [0, 2]. Finite differences vanish identically on the shelf; the global
/// minimum is at theta = 1. The shelf sits above everything to its right so
/// the Gaussian-smoothed landscape decreases monotonically toward the basin:
/// the task isolates plateau/discontinuity handling from local-minimum
/// escape. (A shelf below the step would put a smoothed local minimum on
/// the flat region and no local method could leave it.)
pub fn make_plateau1d() -> BlackBoxTask {
    BlackBoxTask::from_fn("plateau1d", Domain::uniform_box(1, -2.0, 2.0), |x| {
        let t = x[0];
        if t <= PLATEAU_RANGE.1 {
            PLATEAU_VALUE
        } else if t < 0.0 {
            1.0
        } else {
            (t - PLATEAU_OPTIMUM) * (t - PLATEAU_OPTIMUM)
        }
    })
    .with_kind(TaskKind::Plateau1d)
    .with_optimum(0.0)
    .with_ground_truth(vec![PLATEAU_OPTIMUM])
}

// ---------------------------------------------------------------------------
// rosenbrock

/// Classic banana valley on [-2, 2]^n, minimum 0 at the all-ones vector.
pub fn make_rosenbrock(n: usize) -> Result<BlackBoxTask> {
    if n < 2 {
        return Err(Error::Dimension { expected: 2, got: n });
    }
    Ok(BlackBoxTask::from_fn(
        format!("rosenbrock:{n}"),
        Domain::uniform_box(n, -2.0, 2.0),
        |x| {
            let mut s = 0.0;
            for i in 0..x.len() - 1 {
                let a = x[i + 1] - x[i] * x[i];
                let b = 1.0 - x[i];
                s += 100.0 * a * a + b * b;
            }
            s
        },
    )
    .with_kind(TaskKind::Rosenbrock { n })
    .with_optimum(0.0)
    .with_ground_truth(vec![1.0; n]))
}

// ---------------------------------------------------------------------------
// seeded instance generation

/// Rng for drawing a task instance (target patterns, datasets). Salted so the
/// instance stream is independent of an optimizer run keyed by the same seed;
/// without this, a uniform init in [0,1]^n replays the exact draws that chose
/// e.g. the led target bits and starts at zero loss.
fn task_rng(seed: u64) -> Rng {
    Rng::new(seed ^ 0x7461736b5f726e67) // "task_rng"
}

// ---------------------------------------------------------------------------
// led

/// Binary LED panel: each parameter in [0, 1] is rounded to a bit
/// (half rounds away from zero, so 0.5 -> 1) and compared against a
/// seed-drawn target pattern. Loss is the fraction of mismatched bits,
/// i.e. the MSE of the rounded pattern — piecewise constant everywhere.
pub fn make_led(w: usize, h: usize, seed: u64) -> BlackBoxTask {
    assert!(w >= 1 && h >= 1 && w * h <= 4096, "led size out of range");
    let dim = w * h;
    let mut rng = task_rng(seed);
    let bits: Vec<f64> = (0..dim)
        .map(|_| if rng.uniform() < 0.5 { 0.0 } else { 1.0 })
        .collect();
    let target = bits.clone();
    BlackBoxTask::from_fn(
        format!("led:{w}x{h}"),
        Domain::uniform_box(dim, 0.0, 1.0),
        move |x| {
            let mismatches: f64 = x
                .iter()
                .zip(&target)
                .map(|(v, b)| {
                    let r = v.round();
                    (r - b) * (r - b)
                })
                .sum();
            mismatches / x.len() as f64
        },
    )
    .with_kind(TaskKind::Led { w, h })
    .with_optimum(0.0)
    .with_ground_truth(bits)
}

// ---------------------------------------------------------------------------
// rocket

pub const ROCKET_GRAVITY: f64 = 9.81;
pub const ROCKET_THRUST_ACCEL: f64 = 2.0 * ROCKET_GRAVITY;
pub const ROCKET_DT: f64 = 0.05;

/// Apex height of a rocket that burns (thrust 2g) for `cutoff` steps of a
/// symplectic-Euler integration (velocity updated before position), then
/// coasts under gravity until the velocity is non-positive. Strictly
/// increasing in `cutoff`.
pub fn rocket_apex(cutoff: usize, n_steps: usize) -> f64 {
    assert!(cutoff <= n_steps, "cutoff {cutoff} > n_steps {n_steps}");
    let mut v = 0.0;
    let mut h: f64 = 0.0;
    let mut apex: f64 = 0.0;
    for _ in 0..cutoff {
        v += (ROCKET_THRUST_ACCEL - ROCKET_GRAVITY) * ROCKET_DT;
        h += v * ROCKET_DT;
        apex = apex.max(h);
    }
    while v > 0.0 {
        v -= ROCKET_GRAVITY * ROCKET_DT;
        h += v * ROCKET_DT;
        apex = apex.max(h);
    }
    apex
}

/// Maps a cutoff fraction in [0, 1] to a discrete burn step count in
/// 0..=n_steps.
pub fn rocket_cutoff_index(frac: f64, n_steps: usize) -> usize {
    ((frac * n_steps as f64).floor() as i64).clamp(0, n_steps as i64) as usize
}

/// Fleet of rockets, one cutoff fraction each. Per-rocket target apexes are
/// drawn by seeding a cutoff index uniformly in 1..n_steps; the loss is the
/// mean squared apex error over the fleet. The discretized cutoff makes the
/// loss piecewise constant in every coordinate. Ground truth stores the
/// fraction (k + 0.5) / n_steps for each target index k.
pub fn make_rocket(n_rockets: usize, n_steps: usize, seed: u64) -> BlackBoxTask {
    assert!(n_rockets >= 1, "need at least one rocket");
    assert!(n_steps >= 10, "need at least 10 integration steps");
    let mut rng = task_rng(seed);
    let target_idx: Vec<usize> = (0..n_rockets).map(|_| 1 + rng.index(n_steps - 1)).collect();
    let target_apex: Vec<f64> = target_idx.iter().map(|k| rocket_apex(*k, n_steps)).collect();
    let truth: Vec<f64> = target_idx
        .iter()
        .map(|k| (*k as f64 + 0.5) / n_steps as f64)
        .collect();
    BlackBoxTask::from_fn(
        format!("rocket:{n_rockets}x{n_steps}"),
        Domain::uniform_box(n_rockets, 0.0, 1.0),
        move |x| {
            let mut s = 0.0;
            for (frac, ta) in x.iter().zip(&target_apex) {
                let k = rocket_cutoff_index(*frac, n_steps);
                let d = rocket_apex(k, n_steps) - ta;
                s += d * d;
            }
            s / x.len() as f64
        },
    )
    .with_kind(TaskKind::Rocket {
        rockets: n_rockets,
        steps: n_steps,
    })
    .with_optimum(0.0)
    .with_ground_truth(truth)
}

// ---------------------------------------------------------------------------
// texture

/// One smooth scalar field in [0.2, 0.8]: a base level 0.5 plus two
/// low-frequency plane waves of amplitude 0.15 with seed-drawn integer
/// frequencies and phases. Row-major, index y*w + x.
fn smooth_field(rng: &mut Rng, w: usize, h: usize) -> Vec<f64> {
    let f1x = (1 + rng.index(2)) as f64;
    let f1y = (1 + rng.index(2)) as f64;
    let p1 = rng.uniform() * std::f64::consts::TAU;
    let f2x = (1 + rng.index(2)) as f64;
    let f2y = (1 + rng.index(2)) as f64;
    let p2 = rng.uniform() * std::f64::consts::TAU;
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let v = (y as f64 + 0.5) / h as f64;
        for x in 0..w {
            let u = (x as f64 + 0.5) / w as f64;
            let a = (std::f64::consts::TAU * (f1x * u + f1y * v) + p1).sin();
            let b = (std::f64::consts::TAU * (f2x * u + f2y * v) + p2).sin();
            out.push(0.5 + 0.15 * a + 0.15 * b);
        }
    }
    out
}

/// Direct per-texel RGB match against a seed-generated smooth target image.
/// Parameters are the w*h*3 texel values in [0, 1], interleaved RGB with
/// index (y*w + x)*3 + channel; the loss is the MSE against the target.
/// Target values stay within [0.2, 0.8], so offset probes remain in-domain.
pub fn make_texture(w: usize, h: usize, seed: u64) -> BlackBoxTask {
    assert!(w >= 1 && h >= 1 && w * h * 3 <= 4096, "texture size out of range");
    let mut rng = task_rng(seed);
    let channels: Vec<Vec<f64>> = (0..3).map(|_| smooth_field(&mut rng, w, h)).collect();
    let mut target = Vec::with_capacity(w * h * 3);
    for px in 0..w * h {
        for ch in &channels {
            target.push(ch[px]);
        }
    }
    let truth = target.clone();
    BlackBoxTask::from_fn(
        format!("texture:{w}x{h}"),
        Domain::uniform_box(w * h * 3, 0.0, 1.0),
        move |x| {
            let s: f64 = x
                .iter()
                .zip(&target)
                .map(|(v, t)| (v - t) * (v - t))
                .sum();
            s / x.len() as f64
        },
    )
    .with_kind(TaskKind::Texture { w, h })
    .with_optimum(0.0)
    .with_ground_truth(truth)
}

// ---------------------------------------------------------------------------
// mlpfit

/// Side length of the fitting grid for the MLP image-fit task.
pub const MLP_FIT_GRID: usize = 16;
/// Upper bound on the flattened weight count of the fitted network.
pub const MLP_FIT_MAX_PARAMS: usize = 4096;

/// Number of parameters of a dense net with the given layer sizes
/// (weights plus biases).
pub fn mlp_fit_param_count(arch: &[usize]) -> usize {
    arch.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

fn validate_mlp_fit_arch(arch: &[usize]) -> Result<()> {
    if arch.len() < 2 || arch.first() != Some(&2) || arch.last() != Some(&1) {
        return Err(Error::Config(format!(
            "mlpfit architecture must be [2, ..., 1], got {arch:?}"
        )));
    }
    if arch.iter().any(|&s| s == 0) {
        return Err(Error::Config("mlpfit layer sizes must be positive".into()));
    }
    let n = mlp_fit_param_count(arch);
    if n > MLP_FIT_MAX_PARAMS {
        return Err(Error::Config(format!(
            "mlpfit weight count {n} exceeds {MLP_FIT_MAX_PARAMS}"
        )));
    }
    Ok(())
}

/// Forward pass of the fitted network: tanh hidden layers, linear output,
/// so the all-zero weight vector maps every input to 0. Parameter layout is
/// per layer: row-major weights (out x in), then biases.
fn mlp_fit_forward(arch: &[usize], params: &[f64], input: &[f64]) -> f64 {
    debug_assert_eq!(input.len(), arch[0]);
    let mut act = input.to_vec();
    let mut off = 0;
    for l in 0..arch.len() - 1 {
        let (nin, nout) = (arch[l], arch[l + 1]);
        let w = &params[off..off + nin * nout];
        let b = &params[off + nin * nout..off + (nin + 1) * nout];
        off += (nin + 1) * nout;
        let mut next = vec![0.0; nout];
        for o in 0..nout {
            let mut z = b[o];
            let row = &w[o * nin..(o + 1) * nin];
            for (wi, ai) in row.iter().zip(&act) {
                z += wi * ai;
            }
            next[o] = if l + 2 == arch.len() { z } else { z.tanh() };
        }
        act = next;
    }
    act[0]
}

/// Evaluates the network over the task's 16x16 grid; row-major, same layout
/// as the target image. Grid point (x, y) maps to the input
/// (2*(x+0.5)/G - 1, 2*(y+0.5)/G - 1) in [-1, 1]^2.
pub fn mlp_fit_render(arch: &[usize], params: &[f64]) -> Vec<f64> {
    assert_eq!(params.len(), mlp_fit_param_count(arch));
    let g = MLP_FIT_GRID;
    let mut out = Vec::with_capacity(g * g);
    for y in 0..g {
        let v = 2.0 * (y as f64 + 0.5) / g as f64 - 1.0;
        for x in 0..g {
            let u = 2.0 * (x as f64 + 0.5) / g as f64 - 1.0;
            out.push(mlp_fit_forward(arch, params, &[u, v]));
        }
    }
    out
}

pub(crate) fn mlp_fit_with_target(
    name: String,
    arch: Vec<usize>,
    target: Vec<f64>,
) -> BlackBoxTask {
    assert_eq!(target.len(), MLP_FIT_GRID * MLP_FIT_GRID);
    let dim = mlp_fit_param_count(&arch);
    let arch_for_eval = arch.clone();
    let truth = target.clone();
    BlackBoxTask::from_fn(name, Domain::uniform_box(dim, -4.0, 4.0), move |params| {
        let img = mlp_fit_render(&arch_for_eval, params);
        let s: f64 = img
            .iter()
            .zip(&target)
            .map(|(v, t)| (v - t) * (v - t))
            .sum();
        s / img.len() as f64
    })
    .with_kind(TaskKind::MlpFit { arch })
    .with_ground_truth(truth)
}

/// Fit a small dense network (flattened weights as the parameters) to a
/// seed-generated smooth grayscale image over a fixed 16x16 grid. The loss
/// is non-differentiable from the optimizer's point of view only in the
/// sense that no gradients are exposed; it stresses high-dimensional,
/// strongly coupled parameters.
pub fn make_mlp_fit(arch: &[usize], seed: u64) -> Result<BlackBoxTask> {
    validate_mlp_fit_arch(arch)?;
    let mut rng = task_rng(seed);
    let target = smooth_field(&mut rng, MLP_FIT_GRID, MLP_FIT_GRID);
    // 'x' separator keeps the name safe inside comma-separated exports.
    let name = format!(
        "mlpfit[{}]",
        arch.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("x")
    );
    Ok(mlp_fit_with_target(name, arch.to_vec(), target))
}

// ---------------------------------------------------------------------------
// registry

pub const MLP_FIT_ARCH_TINY: [usize; 4] = [2, 8, 8, 1];
pub const MLP_FIT_ARCH_SMALL: [usize; 4] = [2, 16, 16, 1];
pub const MLP_FIT_ARCH_MEDIUM: [usize; 4] = [2, 32, 32, 1];

fn parse_pair(arg: &str, what: &str) -> Result<(usize, usize)> {
    let (a, b) = arg
        .split_once('x')
        .ok_or_else(|| Error::Config(format!("{what}: expected WxH, got `{arg}`")))?;
    let pa = a
        .parse::<usize>()
        .map_err(|_| Error::Config(format!("{what}: bad number `{a}`")))?;
    let pb = b
        .parse::<usize>()
        .map_err(|_| Error::Config(format!("{what}: bad number `{b}`")))?;
    if pa == 0 || pb == 0 {
        return Err(Error::Config(format!("{what}: sizes must be positive")));
    }
    Ok((pa, pb))
}

/// Instantiates a task from a registry string such as `plateau1d`,
/// `rosenbrock:8`, `led:8x8`, `rocket:10x100`, `texture:16x16`, or
/// `mlpfit:small`. The seed fixes the task's random target where one exists
/// (led, rocket, texture, mlpfit); plateau1d and rosenbrock ignore it.
pub fn parse_task_spec(spec: &str, seed: u64) -> Result<BlackBoxTask> {
    let (base, arg) = match spec.split_once(':') {
        Some((b, a)) => (b, Some(a)),
        None => (spec, None),
    };
    match base {
        "plateau1d" => {
            if arg.is_some() {
                return Err(Error::Config(format!("plateau1d takes no argument, got `{spec}`")));
            }
            Ok(make_plateau1d())
        }
        "rosenbrock" => {
            let n = match arg {
                None => 2,
                Some(a) => a
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("rosenbrock: bad dimension `{a}`")))?,
            };
            make_rosenbrock(n)
        }
        "led" => {
            let (w, h) = match arg {
                None => (8, 8),
                Some(a) => parse_pair(a, "led")?,
            };
            Ok(make_led(w, h, seed))
        }
        "rocket" => {
            let (r, s) = match arg {
                None => (10, 100),
                Some(a) => parse_pair(a, "rocket")?,
            };
            if s < 10 {
                return Err(Error::Config("rocket: need at least 10 steps".into()));
            }
            Ok(make_rocket(r, s, seed))
        }
        "texture" => {
            let (w, h) = match arg {
                None => (16, 16),
                Some(a) => parse_pair(a, "texture")?,
            };
            Ok(make_texture(w, h, seed))
        }
        "mlpfit" => {
            let arch: &[usize] = match arg.unwrap_or("small") {
                "tiny" => &MLP_FIT_ARCH_TINY,
                "small" => &MLP_FIT_ARCH_SMALL,
                "medium" => &MLP_FIT_ARCH_MEDIUM,
                other => {
                    return Err(Error::Config(format!(
                        "mlpfit: unknown size `{other}` (tiny|small|medium)"
                    )))
                }
            };
            make_mlp_fit(arch, seed)
        }
        _ => Err(Error::UnknownTask(spec.to_string())),
    }
}

/// Registry entries as (spec string, description) for the CLI listing.
pub fn list_tasks() -> Vec<(&'static str, &'static str)> {
    vec![
        ("plateau1d", "1-D shelf + step + quadratic basin; exactly flat regions"),
        ("rosenbrock:N", "N-dimensional Rosenbrock valley on [-2,2]^N (default 2)"),
        ("led:WxH", "binary LED panel, fraction of mismatched rounded bits (default 8x8)"),
        ("rocket:RxS", "R rockets, S-step burn cutoff to hit target apexes (default 10x100)"),
        ("texture:WxH", "direct RGB texel match against a smooth target (default 16x16)"),
        ("mlpfit:SIZE", "fit a small MLP's weights to a grayscale image; tiny|small|medium (default small)"),
    ]
}

// ---------------------------------------------------------------------------
// image dumps

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Binary PGM (P5), one f64 in [0, 1] per pixel, row-major.
pub fn write_pgm(path: &Path, w: usize, h: usize, data: &[f64]) -> Result<()> {
    assert_eq!(data.len(), w * h, "pgm: data length mismatch");
    let mut out = Vec::with_capacity(32 + data.len());
    write!(&mut out, "P5\n{w} {h}\n255\n")?;
    out.extend(data.iter().map(|v| to_byte(*v)));
    std::fs::write(path, out)?;
    Ok(())
}

/// Binary PPM (P6), interleaved RGB f64s in [0, 1], row-major.
pub fn write_ppm(path: &Path, w: usize, h: usize, data: &[f64]) -> Result<()> {
    assert_eq!(data.len(), w * h * 3, "ppm: data length mismatch");
    let mut out = Vec::with_capacity(32 + data.len());
    write!(&mut out, "P6\n{w} {h}\n255\n")?;
    out.extend(data.iter().map(|v| to_byte(*v)));
    std::fs::write(path, out)?;
    Ok(())
}

/// Renders the parameter vector of an image-like task to a PGM/PPM file:
/// rounded bits for led, texels for texture, the network's grid output for
/// mlpfit. Errors for tasks without an image interpretation.
pub fn dump_params_image(task: &BlackBoxTask, theta: &[f64], path: &Path) -> Result<()> {
    match task.kind() {
        TaskKind::Led { w, h } => {
            let bits: Vec<f64> = theta.iter().map(|v| v.clamp(0.0, 1.0).round()).collect();
            write_pgm(path, *w, *h, &bits)
        }
        TaskKind::Texture { w, h } => write_ppm(path, *w, *h, theta),
        TaskKind::MlpFit { arch } => {
            let img = mlp_fit_render(arch, theta);
            write_pgm(path, MLP_FIT_GRID, MLP_FIT_GRID, &img)
        }
        _ => Err(Error::Config(format!(
            "task {} has no image interpretation",
            task.name()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    // The proptest prelude re-exports a trait named `Rng`; ours wins here.
    use crate::sampling::Rng;

    #[test]
    fn domain_validation_and_ops() {
        assert!(Domain::new(vec![0.0], vec![1.0, 2.0]).is_err());
        assert!(Domain::new(vec![1.0], vec![1.0]).is_err());
        assert!(Domain::new(vec![f64::NAN], vec![1.0]).is_err());
        let d = Domain::uniform_box(3, -1.0, 3.0);
        assert_eq!(d.dim(), 3);
        assert_eq!(d.extent(), 4.0);
        assert_eq!(d.center(), vec![1.0; 3]);
        let mut x = [-5.0, 0.5, 9.0];
        d.clamp(&mut x);
        assert_eq!(x, [-1.0, 0.5, 3.0]);
        assert!(d.contains(&x));
        assert!(!d.contains(&[0.0, 0.0, 3.1]));
        let mut rng = Rng::new(4);
        let before = rng.draws();
        let s = d.sample_uniform(&mut rng);
        assert_eq!(rng.draws() - before, 3);
        assert!(d.contains(&s));
    }

    #[test]
    fn plateau_values() {
        let t = make_plateau1d();
        // Exactly flat shelf: identical values anywhere on it.
        let a = t.evaluate(&[-1.9]).unwrap();
        let b = t.evaluate(&[-0.6]).unwrap();
        let c = t.evaluate(&[-0.5]).unwrap();
        assert_eq!(a, PLATEAU_VALUE);
        assert_eq!(b, PLATEAU_VALUE);
        assert_eq!(c, PLATEAU_VALUE);
        assert_eq!(t.evaluate(&[-0.25]).unwrap(), 1.0);
        assert_eq!(t.evaluate(&[0.0]).unwrap(), 1.0); // continuous at 0
        // Shelf strictly above the step: smoothing must never create a
        // local minimum on the flat region.
        assert!(PLATEAU_VALUE > 1.0);
        assert_eq!(t.evaluate(&[1.0]).unwrap(), 0.0);
        assert_eq!(t.evaluate(&[2.0]).unwrap(), 1.0);
        // Central finite difference on the shelf is exactly zero.
        let fd = (t.evaluate(&[-1.15]).unwrap() - t.evaluate(&[-1.35]).unwrap()) / 0.2;
        assert_eq!(fd, 0.0);
        // Out-of-domain input is clamped, not rejected.
        assert_eq!(t.evaluate(&[5.0]).unwrap(), t.evaluate(&[2.0]).unwrap());
    }

    #[test]
    fn rosenbrock_values() {
        let t = make_rosenbrock(2).unwrap();
        assert_eq!(t.evaluate(&[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(t.evaluate(&[0.0, 0.0]).unwrap(), 1.0);
        let t3 = make_rosenbrock(3).unwrap();
        assert_eq!(t3.evaluate(&[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(
            make_rosenbrock(1),
            Err(Error::Dimension { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn led_matches_bit_mismatch_count() {
        let t = make_led(2, 2, 42);
        let bits = t.ground_truth().unwrap().to_vec();
        assert_eq!(t.evaluate(&bits).unwrap(), 0.0);
        let flipped: Vec<f64> = bits.iter().map(|b| 1.0 - b).collect();
        assert_eq!(t.evaluate(&flipped).unwrap(), 1.0);
        let mut one = bits.clone();
        one[0] = 1.0 - one[0];
        assert_eq!(t.evaluate(&one).unwrap(), 0.25);
        // Values that round to the target bits give zero loss.
        let nudged: Vec<f64> = bits.iter().map(|b| if *b == 1.0 { 0.6 } else { 0.4 }).collect();
        assert_eq!(t.evaluate(&nudged).unwrap(), 0.0);
    }

    #[test]
    fn led_seed_determinism() {
        let a = make_led(4, 4, 7);
        let b = make_led(4, 4, 7);
        assert_eq!(a.ground_truth().unwrap(), b.ground_truth().unwrap());
        let c = make_led(4, 4, 8);
        assert_ne!(a.ground_truth().unwrap(), c.ground_truth().unwrap());
    }

    #[test]
    fn rocket_apex_strictly_increasing() {
        let n = 20;
        let mut prev = rocket_apex(0, n);
        assert_eq!(prev, 0.0);
        for k in 1..=n {
            let a = rocket_apex(k, n);
            assert!(a > prev, "apex not increasing at k={k}");
            prev = a;
        }
    }

    #[test]
    fn rocket_loss_zero_at_ground_truth_and_piecewise_constant() {
        let t = make_rocket(3, 50, 5);
        let truth = t.ground_truth().unwrap().to_vec();
        assert_eq!(t.evaluate(&truth).unwrap(), 0.0);
        // Recover the integer indices from the stored fractions.
        for f in &truth {
            let k = rocket_cutoff_index(*f, 50);
            assert_eq!((k as f64 + 0.5) / 50.0, *f);
        }
        // Same bucket => identical loss.
        let mut a = truth.clone();
        a[0] += 0.004; // stays inside the 1/50-wide bucket
        assert_eq!(t.evaluate(&a).unwrap(), t.evaluate(&truth).unwrap());
    }

    #[test]
    fn texture_target_properties() {
        let t = make_texture(4, 4, 3);
        let target = t.ground_truth().unwrap().to_vec();
        assert_eq!(target.len(), 48);
        assert!(target.iter().all(|v| (0.2..=0.8).contains(v)));
        assert_eq!(t.evaluate(&target).unwrap(), 0.0);
        // Uniform +0.1 offset stays in-domain and costs exactly (0.1)^2.
        let off: Vec<f64> = target.iter().map(|v| v + 0.1).collect();
        assert!((t.evaluate(&off).unwrap() - 0.01).abs() < 1e-12);
        // Flat 0.5 image: loss equals the hand-computed MSE of the target
        // against 0.5.
        let flat = vec![0.5; 48];
        let expect: f64 =
            target.iter().map(|v| (0.5 - v) * (0.5 - v)).sum::<f64>() / 48.0;
        assert_eq!(t.evaluate(&flat).unwrap(), expect);
    }

    #[test]
    fn mlp_fit_param_count_and_zero_weights() {
        assert_eq!(mlp_fit_param_count(&MLP_FIT_ARCH_SMALL), 337);
        assert_eq!(mlp_fit_param_count(&MLP_FIT_ARCH_TINY), 105);
        let t = make_mlp_fit(&MLP_FIT_ARCH_SMALL, 9).unwrap();
        assert_eq!(t.dim(), 337);
        // Zero weights -> zero output everywhere -> loss = mean(target^2).
        let zeros = vec![0.0; 337];
        let target = t.ground_truth().unwrap();
        let expect: f64 = target.iter().map(|v| v * v).sum::<f64>() / 256.0;
        assert_eq!(t.evaluate(&zeros).unwrap(), expect);
    }

    #[test]
    fn mlp_fit_self_consistency() {
        // A target equal to the network's own render is fit exactly.
        let arch = MLP_FIT_ARCH_TINY.to_vec();
        let mut rng = Rng::new(33);
        let params: Vec<f64> = (0..mlp_fit_param_count(&arch))
            .map(|_| rng.uniform_in(-0.5, 0.5))
            .collect();
        let img = mlp_fit_render(&arch, &params);
        let t = mlp_fit_with_target("mlpfit-test".into(), arch, img);
        assert_eq!(t.evaluate(&params).unwrap(), 0.0);
    }

    #[test]
    fn mlp_fit_arch_validation() {
        assert!(make_mlp_fit(&[2, 1], 0).is_ok());
        assert!(make_mlp_fit(&[3, 8, 1], 0).is_err()); // wrong input width
        assert!(make_mlp_fit(&[2, 8, 2], 0).is_err()); // wrong output width
        assert!(make_mlp_fit(&[2], 0).is_err());
        assert!(make_mlp_fit(&[2, 2048, 1], 0).is_err()); // over the weight cap
    }

    #[test]
    fn evaluate_guards_and_counter() {
        let t = make_plateau1d();
        assert_eq!(t.eval_count(), 0);
        t.evaluate(&[0.5]).unwrap();
        t.evaluate(&[0.5]).unwrap();
        assert_eq!(t.eval_count(), 2);
        assert!(matches!(
            t.evaluate(&[0.5, 0.5]),
            Err(Error::Dimension { expected: 1, got: 2 })
        ));
        assert!(matches!(t.evaluate(&[f64::NAN]), Err(Error::NonFinite { .. })));
        // Failed evaluations are not charged.
        assert_eq!(t.eval_count(), 2);
    }

    #[test]
    fn registry_round_trip() {
        for (spec, dim) in [
            ("plateau1d", 1usize),
            ("rosenbrock:8", 8),
            ("led:8x8", 64),
            ("rocket:10x100", 10),
            ("texture:16x16", 768),
            ("mlpfit:small", 337),
            ("rosenbrock", 2),
            ("led", 64),
            ("rocket", 10),
            ("texture", 768),
            ("mlpfit", 337),
        ] {
            let t = parse_task_spec(spec, 1).unwrap();
            assert_eq!(t.dim(), dim, "spec {spec}");
        }
        assert!(matches!(
            parse_task_spec("nosuch", 1),
            Err(Error::UnknownTask(_))
        ));
        assert!(parse_task_spec("led:8", 1).is_err());
        assert!(parse_task_spec("mlpfit:huge", 1).is_err());
        assert!(parse_task_spec("plateau1d:3", 1).is_err());
    }

    #[test]
    fn image_dumps() {
        let dir = tempfile::tempdir().unwrap();
        let led = make_led(4, 2, 1);
        let p = dir.path().join("led.pgm");
        dump_params_image(&led, led.ground_truth().unwrap(), &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert!(bytes.starts_with(b"P5\n4 2\n255\n"));
        assert_eq!(bytes.len(), b"P5\n4 2\n255\n".len() + 8);

        let tex = make_texture(3, 3, 1);
        let p = dir.path().join("tex.ppm");
        dump_params_image(&tex, tex.ground_truth().unwrap(), &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert!(bytes.starts_with(b"P6\n3 3\n255\n"));
        assert_eq!(bytes.len(), b"P6\n3 3\n255\n".len() + 27);

        let ros = make_rosenbrock(2).unwrap();
        assert!(dump_params_image(&ros, &[0.0, 0.0], &dir.path().join("x.pgm")).is_err());
    }

    proptest! {
        #[test]
        fn led_loss_equals_mismatch_fraction(seed in 0u64..1000, vals in proptest::collection::vec(0.0f64..1.0, 9)) {
            let t = make_led(3, 3, seed);
            let bits = t.ground_truth().unwrap();
            let expect = vals.iter().zip(bits)
                .filter(|(v, b)| v.round() != **b)
                .count() as f64 / 9.0;
            prop_assert_eq!(t.evaluate(&vals).unwrap(), expect);
        }

        #[test]
        fn rocket_loss_depends_only_on_buckets(seed in 0u64..1000, frac in 0.0f64..1.0) {
            let t = make_rocket(1, 20, seed);
            let k = rocket_cutoff_index(frac, 20);
            // Any fraction in the same bucket gives the identical loss.
            let lo = k as f64 / 20.0;
            let l1 = t.evaluate(&[frac]).unwrap();
            let l2 = t.evaluate(&[lo]).unwrap();
            prop_assert_eq!(l1, l2);
        }

        #[test]
        fn losses_are_non_negative(v in proptest::collection::vec(-3.0f64..3.0, 2)) {
            let t = make_rosenbrock(2).unwrap();
            prop_assert!(t.evaluate(&v).unwrap() >= 0.0);
        }
    }
}

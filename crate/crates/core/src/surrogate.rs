//! Differentiable local proxies of the black-box loss.
//!
//! Two families: a small MLP (the default) and a full quadratic form (the
//! linear-in-features ablation). Both expose exact analytic gradients with
//! respect to the input and to the flattened parameter vector; the MLP's
//! reverse-mode pass is written out by hand so there is no hidden autodiff
//! dependency to trust — instead `run_gradient_check` validates every
//! gradient path against central finite differences.
//!
//! The MLP normalizes its input affinely from the task domain onto
//! [-1, 1]^n, uses C1 hidden activations (ELU by default) and a linear
//! output head — a squashing head would saturate as the objective
//! approaches its minimum, throttling the fit exactly when precision
//! matters. The quadratic surrogate operates on raw inputs:
//! h(x) = z^T A z with z = (x, 1) and A symmetric. Both carry a fixed
//! output scale set once by `calibrate` so the trainable parameters only
//! ever have to represent an O(1) function, however large the objective's
//! raw values are.

use std::path::Path;

use crate::error::{Error, Result};
use crate::sampling::Rng;
use crate::tasks::Domain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SurrogateKind {
    Mlp,
    Quadratic,
}

impl std::str::FromStr for SurrogateKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(SurrogateKind::Mlp),
            "quadratic" => Ok(SurrogateKind::Quadratic),
            other => Err(Error::Config(format!(
                "unknown surrogate kind `{other}` (mlp|quadratic)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Activation {
    Elu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z >= 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z >= 0.0 {
                    1.0
                } else {
                    z.exp()
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "elu" => Ok(Activation::Elu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Config(format!(
                "unknown activation `{other}` (elu|tanh)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SurrogateConfig {
    pub kind: SurrogateKind,
    /// Hidden layer widths of the MLP surrogate; `None` leaves the choice
    /// to the per-task tuned defaults (most tasks use [64, 64]).
    pub hidden: Option<Vec<usize>>,
    pub activation: Activation,
    /// Initial diagonal of the quadratic surrogate: A = scale * I.
    pub quad_init_scale: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            kind: SurrogateKind::Mlp,
            hidden: None,
            activation: Activation::Elu,
            quad_init_scale: 0.1,
        }
    }
}

// ---------------------------------------------------------------------------
// MLP

#[derive(Debug, Clone)]
pub struct MlpSurrogate {
    /// Layer widths, input through output: [n, h_1, ..., h_k, 1].
    sizes: Vec<usize>,
    /// weights[l] is row-major sizes[l+1] x sizes[l].
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    activation: Activation,
    /// x_norm_i = (x_i - in_off_i) * in_scale_i maps the domain to [-1,1].
    in_off: Vec<f64>,
    in_scale: Vec<f64>,
    /// h = out_scale * z_out. Not a trainable parameter: `calibrate` fixes
    /// it once so the network body fits the objective divided by it.
    out_scale: f64,
}

struct MlpCache {
    /// acts[0] is the normalized input; acts[l] the activation after layer l.
    acts: Vec<Vec<f64>>,
    /// pre[l] is the pre-activation of layer l+1 (i.e. z for weights[l]).
    pre: Vec<Vec<f64>>,
}

impl MlpSurrogate {
    /// Glorot-uniform weights (biases zero), drawn layer by layer in
    /// row-major order: layer l consumes sizes[l] * sizes[l+1] RNG outputs.
    fn init(dim: usize, hidden: &[usize], activation: Activation, domain: &Domain, rng: &mut Rng) -> Self {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(dim);
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.uniform_in(-bound, bound))
                .collect();
            weights.push(w);
            biases.push(vec![0.0; fan_out]);
        }
        let in_off = domain.center();
        let in_scale: Vec<f64> = domain
            .lower()
            .iter()
            .zip(domain.upper())
            .map(|(lo, hi)| 2.0 / (hi - lo))
            .collect();
        MlpSurrogate {
            sizes,
            weights,
            biases,
            activation,
            in_off,
            in_scale,
            out_scale: 1.0,
        }
    }

    fn dim(&self) -> usize {
        self.sizes[0]
    }

    fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.in_off.iter().zip(&self.in_scale))
            .map(|(v, (off, sc))| (v - off) * sc)
            .collect()
    }

    fn forward_cached(&self, x: &[f64]) -> (f64, MlpCache) {
        assert_eq!(x.len(), self.dim(), "surrogate input dimension mismatch");
        let layers = self.weights.len();
        let mut acts = Vec::with_capacity(layers + 1);
        let mut pre = Vec::with_capacity(layers);
        acts.push(self.normalize(x));
        for l in 0..layers {
            let (nin, nout) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.weights[l];
            let b = &self.biases[l];
            let a = &acts[l];
            let mut z = vec![0.0; nout];
            for o in 0..nout {
                let row = &w[o * nin..(o + 1) * nin];
                let mut s = b[o];
                for (wi, ai) in row.iter().zip(a) {
                    s += wi * ai;
                }
                z[o] = s;
            }
            let is_last = l + 1 == layers;
            let out: Vec<f64> = z
                .iter()
                .map(|zi| {
                    if is_last {
                        self.out_scale * zi
                    } else {
                        self.activation.apply(*zi)
                    }
                })
                .collect();
            pre.push(z);
            acts.push(out);
        }
        (acts[layers][0], MlpCache { acts, pre })
    }

    /// dh/dz for every layer, output layer first computed, returned in
    /// layer order (deltas[l] pairs with weights[l]).
    fn deltas(&self, cache: &MlpCache) -> Vec<Vec<f64>> {
        let layers = self.weights.len();
        let mut deltas = vec![Vec::new(); layers];
        deltas[layers - 1] = vec![self.out_scale];
        for l in (0..layers - 1).rev() {
            let (nin, nout) = (self.sizes[l + 1], self.sizes[l + 2]);
            let w_next = &self.weights[l + 1];
            let d_next = &deltas[l + 1];
            let mut d = vec![0.0; nin];
            for o in 0..nout {
                let row = &w_next[o * nin..(o + 1) * nin];
                let dn = d_next[o];
                for i in 0..nin {
                    d[i] += row[i] * dn;
                }
            }
            for i in 0..nin {
                d[i] *= self.activation.derivative(cache.pre[l][i]);
            }
            deltas[l] = d;
        }
        deltas
    }

    fn grad_input(&self, x: &[f64]) -> Vec<f64> {
        let (_, cache) = self.forward_cached(x);
        let deltas = self.deltas(&cache);
        let (nin, nout) = (self.sizes[0], self.sizes[1]);
        let w0 = &self.weights[0];
        let mut g = vec![0.0; nin];
        for o in 0..nout {
            let row = &w0[o * nin..(o + 1) * nin];
            let dn = deltas[0][o];
            for i in 0..nin {
                g[i] += row[i] * dn;
            }
        }
        for i in 0..nin {
            g[i] *= self.in_scale[i];
        }
        g
    }

    fn grad_params_accum(&self, x: &[f64], upstream: f64, out: &mut [f64]) {
        assert_eq!(out.len(), self.param_count(), "gradient buffer size mismatch");
        let (_, cache) = self.forward_cached(x);
        let deltas = self.deltas(&cache);
        let mut off = 0;
        for l in 0..self.weights.len() {
            let (nin, nout) = (self.sizes[l], self.sizes[l + 1]);
            let a = &cache.acts[l];
            let d = &deltas[l];
            for o in 0..nout {
                let du = d[o] * upstream;
                let row = &mut out[off + o * nin..off + (o + 1) * nin];
                for i in 0..nin {
                    row[i] += du * a[i];
                }
            }
            off += nin * nout;
            for o in 0..nout {
                out[off + o] += d[o] * upstream;
            }
            off += nout;
        }
    }

    fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in 0..self.weights.len() {
            out.extend_from_slice(&self.weights[l]);
            out.extend_from_slice(&self.biases[l]);
        }
        out
    }

    fn set_params_flat(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count(), "parameter vector size mismatch");
        let mut off = 0;
        for l in 0..self.weights.len() {
            let (nin, nout) = (self.sizes[l], self.sizes[l + 1]);
            self.weights[l].copy_from_slice(&params[off..off + nin * nout]);
            off += nin * nout;
            self.biases[l].copy_from_slice(&params[off..off + nout]);
            off += nout;
        }
    }

    /// Frobenius norms of the weight matrices, used for the empirical
    /// smoothness bound.
    #[cfg(test)]
    fn weight_norms(&self) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| w.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Quadratic

#[derive(Debug, Clone)]
pub struct QuadraticSurrogate {
    n: usize,
    /// (n+1) x (n+1) symmetric matrix, row-major; h(x) = out_scale * z^T A z
    /// with z = (x, 1).
    a: Vec<f64>,
    /// Fixed output scale, see `MlpSurrogate::out_scale`.
    out_scale: f64,
}

impl QuadraticSurrogate {
    fn init(dim: usize, scale: f64) -> Self {
        let m = dim + 1;
        let mut a = vec![0.0; m * m];
        for i in 0..m {
            a[i * m + i] = scale;
        }
        QuadraticSurrogate {
            n: dim,
            a,
            out_scale: 1.0,
        }
    }

    fn homogeneous(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "surrogate input dimension mismatch");
        let mut z = Vec::with_capacity(self.n + 1);
        z.extend_from_slice(x);
        z.push(1.0);
        z
    }

    fn forward(&self, x: &[f64]) -> f64 {
        let z = self.homogeneous(x);
        let m = self.n + 1;
        let mut val = 0.0;
        for i in 0..m {
            let row = &self.a[i * m..(i + 1) * m];
            let mut az = 0.0;
            for j in 0..m {
                az += row[j] * z[j];
            }
            val += z[i] * az;
        }
        self.out_scale * val
    }

    fn grad_input(&self, x: &[f64]) -> Vec<f64> {
        // d/dx_k z^T A z = sum_j (A_kj + A_jk) z_j; written in the general
        // form so the result is exact even under transient asymmetry.
        let z = self.homogeneous(x);
        let m = self.n + 1;
        let mut g = vec![0.0; self.n];
        for (k, gk) in g.iter_mut().enumerate() {
            let mut s = 0.0;
            for j in 0..m {
                s += (self.a[k * m + j] + self.a[j * m + k]) * z[j];
            }
            *gk = self.out_scale * s;
        }
        g
    }

    fn grad_params_accum(&self, x: &[f64], upstream: f64, out: &mut [f64]) {
        let m = self.n + 1;
        assert_eq!(out.len(), m * m, "gradient buffer size mismatch");
        let z = self.homogeneous(x);
        let up = upstream * self.out_scale;
        for i in 0..m {
            for j in 0..m {
                out[i * m + j] += up * z[i] * z[j];
            }
        }
    }

    fn symmetrize(&mut self) {
        let m = self.n + 1;
        for i in 0..m {
            for j in i + 1..m {
                let avg = 0.5 * (self.a[i * m + j] + self.a[j * m + i]);
                self.a[i * m + j] = avg;
                self.a[j * m + i] = avg;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Unified surrogate

#[derive(Debug, Clone)]
pub enum Surrogate {
    Mlp(MlpSurrogate),
    Quadratic(QuadraticSurrogate),
}

impl Surrogate {
    /// Fresh surrogate for a `dim`-dimensional task over `domain`.
    /// MLP weights consume RNG outputs (documented in `MlpSurrogate::init`);
    /// the quadratic initializer is deterministic and consumes none.
    pub fn init(cfg: &SurrogateConfig, domain: &Domain, rng: &mut Rng) -> Self {
        match cfg.kind {
            SurrogateKind::Mlp => Surrogate::Mlp(MlpSurrogate::init(
                domain.dim(),
                cfg.hidden.as_deref().unwrap_or(&[64, 64]),
                cfg.activation,
                domain,
                rng,
            )),
            SurrogateKind::Quadratic => {
                Surrogate::Quadratic(QuadraticSurrogate::init(domain.dim(), cfg.quad_init_scale))
            }
        }
    }

    pub fn kind(&self) -> SurrogateKind {
        match self {
            Surrogate::Mlp(_) => SurrogateKind::Mlp,
            Surrogate::Quadratic(_) => SurrogateKind::Quadratic,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Surrogate::Mlp(m) => m.dim(),
            Surrogate::Quadratic(q) => q.n,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Surrogate::Mlp(m) => m.param_count(),
            Surrogate::Quadratic(q) => (q.n + 1) * (q.n + 1),
        }
    }

    /// h(x). Pure; bit-identical across calls with identical state.
    pub fn forward(&self, x: &[f64]) -> f64 {
        match self {
            Surrogate::Mlp(m) => m.forward_cached(x).0,
            Surrogate::Quadratic(q) => q.forward(x),
        }
    }

    /// dh/dx as a dense vector.
    pub fn grad_input(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Surrogate::Mlp(m) => m.grad_input(x),
            Surrogate::Quadratic(q) => q.grad_input(x),
        }
    }

    /// Accumulates `upstream * dh/dphi` into `out` (length `param_count`).
    pub fn grad_params_accum(&self, x: &[f64], upstream: f64, out: &mut [f64]) {
        match self {
            Surrogate::Mlp(m) => m.grad_params_accum(x, upstream, out),
            Surrogate::Quadratic(q) => q.grad_params_accum(x, upstream, out),
        }
    }

    /// phi += delta. The quadratic surrogate re-symmetrizes afterwards so
    /// its matrix invariant survives arbitrary update sequences.
    pub fn apply_update(&mut self, delta: &[f64]) {
        assert_eq!(delta.len(), self.param_count(), "update size mismatch");
        match self {
            Surrogate::Mlp(m) => {
                let mut off = 0;
                for l in 0..m.weights.len() {
                    for w in m.weights[l].iter_mut() {
                        *w += delta[off];
                        off += 1;
                    }
                    for b in m.biases[l].iter_mut() {
                        *b += delta[off];
                        off += 1;
                    }
                }
            }
            Surrogate::Quadratic(q) => {
                for (ai, di) in q.a.iter_mut().zip(delta) {
                    *ai += di;
                }
                q.symmetrize();
            }
        }
    }

    /// Matches the surrogate's output scale and level to the objective at
    /// one observed point, without touching any shape parameters: the
    /// output scale becomes max(1, |target|) and the MLP's output-layer
    /// bias (resp. the quadratic's constant term) shifts so that
    /// `forward(x) == target`. A fresh model outputs O(1); against an
    /// objective living at, say, 1e4 it would burn its whole fitting budget
    /// growing weights toward that magnitude instead of learning shape.
    /// With the scale factored out, the trainable parameters always fit an
    /// O(1) target. Adam's parameter steps are scale-invariant, so folding
    /// the scale into the gradients changes nothing else.
    pub fn calibrate(&mut self, x: &[f64], target: f64) {
        assert!(target.is_finite(), "calibration target must be finite");
        let scale = target.abs().max(1.0);
        match self {
            Surrogate::Mlp(m) => {
                m.out_scale = scale;
                let (_, cache) = m.forward_cached(x);
                let layers = m.weights.len();
                let z_cur = cache.pre[layers - 1][0];
                m.biases[layers - 1][0] += target / scale - z_cur;
            }
            Surrogate::Quadratic(q) => {
                q.out_scale = scale;
                let h = q.forward(x);
                let m = q.n + 1;
                // Constant cell: z = (x, 1) makes A[n][n] contribute 1 * A.
                q.a[m * m - 1] += (target - h) / scale;
            }
        }
    }

    pub fn params_flat(&self) -> Vec<f64> {
        match self {
            Surrogate::Mlp(m) => m.params_flat(),
            Surrogate::Quadratic(q) => q.a.clone(),
        }
    }

    pub fn set_params_flat(&mut self, params: &[f64]) {
        match self {
            Surrogate::Mlp(m) => m.set_params_flat(params),
            Surrogate::Quadratic(q) => {
                assert_eq!(params.len(), (q.n + 1) * (q.n + 1), "parameter vector size mismatch");
                q.a.copy_from_slice(params);
                q.symmetrize();
            }
        }
    }

    // -- checkpointing -------------------------------------------------------

    /// Binary checkpoint, little-endian throughout: magic "SGK1", kind byte
    /// (0 = mlp, 1 = quadratic), u64 input dim; MLP adds u32 layer count,
    /// u64 layer sizes, activation byte (0 = elu, 1 = tanh) and the
    /// normalization vectors; both then store the f64 output scale and end
    /// with the flat f64 parameter vector.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(b"SGK1");
        match self {
            Surrogate::Mlp(m) => {
                buf.push(0);
                buf.extend_from_slice(&(m.dim() as u64).to_le_bytes());
                buf.extend_from_slice(&(m.sizes.len() as u32).to_le_bytes());
                for s in &m.sizes {
                    buf.extend_from_slice(&(*s as u64).to_le_bytes());
                }
                buf.push(match m.activation {
                    Activation::Elu => 0,
                    Activation::Tanh => 1,
                });
                for v in m.in_off.iter().chain(&m.in_scale) {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
                buf.extend_from_slice(&m.out_scale.to_le_bytes());
                for v in m.params_flat() {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
            Surrogate::Quadratic(q) => {
                buf.push(1);
                buf.extend_from_slice(&(q.n as u64).to_le_bytes());
                buf.extend_from_slice(&q.out_scale.to_le_bytes());
                for v in &q.a {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Surrogate> {
        let bytes = std::fs::read(path)?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        if cur.take(4)? != b"SGK1" {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let kind = cur.take(1)?[0];
        let dim = cur.u64()? as usize;
        match kind {
            0 => {
                let n_sizes = cur.u32()? as usize;
                if n_sizes < 2 {
                    return Err(Error::Checkpoint("mlp needs at least two layers".into()));
                }
                let mut sizes = Vec::with_capacity(n_sizes);
                for _ in 0..n_sizes {
                    sizes.push(cur.u64()? as usize);
                }
                if sizes[0] != dim || *sizes.last().unwrap() != 1 {
                    return Err(Error::Checkpoint("inconsistent layer sizes".into()));
                }
                let activation = match cur.take(1)?[0] {
                    0 => Activation::Elu,
                    1 => Activation::Tanh,
                    other => {
                        return Err(Error::Checkpoint(format!("bad activation byte {other}")))
                    }
                };
                let in_off = cur.f64s(dim)?;
                let in_scale = cur.f64s(dim)?;
                let out_scale = cur.f64s(1)?[0];
                if !(out_scale.is_finite() && out_scale > 0.0) {
                    return Err(Error::Checkpoint("bad output scale".into()));
                }
                let hidden = sizes[1..sizes.len() - 1].to_vec();
                let dummy_domain = Domain::uniform_box(dim.max(1), -1.0, 1.0);
                let mut rng = Rng::new(0);
                let mut m = MlpSurrogate::init(dim, &hidden, activation, &dummy_domain, &mut rng);
                let params = cur.f64s(m.param_count())?;
                cur.expect_end()?;
                m.set_params_flat(&params);
                m.in_off = in_off;
                m.in_scale = in_scale;
                m.out_scale = out_scale;
                Ok(Surrogate::Mlp(m))
            }
            1 => {
                let out_scale = cur.f64s(1)?[0];
                if !(out_scale.is_finite() && out_scale > 0.0) {
                    return Err(Error::Checkpoint("bad output scale".into()));
                }
                let m = dim + 1;
                let a = cur.f64s(m * m)?;
                cur.expect_end()?;
                let mut q = QuadraticSurrogate { n: dim, a, out_scale };
                q.symmetrize();
                Ok(Surrogate::Quadratic(q))
            }
            other => Err(Error::Checkpoint(format!("bad kind byte {other}"))),
        }
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(8 * n)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn expect_end(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Gradient checking (used by unit tests, the acceptance suite, and the
// `check` CLI subcommand)

/// Central finite difference of `forward` with respect to the input.
pub fn finite_diff_grad_input(s: &Surrogate, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let hi = s.forward(&probe);
        probe[i] = x[i] - step;
        let lo = s.forward(&probe);
        probe[i] = x[i];
        g[i] = (hi - lo) / (2.0 * step);
    }
    g
}

/// Central finite difference of `forward` with respect to the flattened
/// parameters.
pub fn finite_diff_grad_params(s: &Surrogate, x: &[f64], step: f64) -> Vec<f64> {
    let base = s.params_flat();
    let mut probe = s.clone();
    let mut params = base.clone();
    let mut g = vec![0.0; base.len()];
    for i in 0..base.len() {
        params[i] = base[i] + step;
        probe.set_params_flat(&params);
        let hi = probe.forward(x);
        params[i] = base[i] - step;
        probe.set_params_flat(&params);
        let lo = probe.forward(x);
        params[i] = base[i];
        g[i] = (hi - lo) / (2.0 * step);
    }
    g
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct GradCheckReport {
    pub kind: SurrogateKind,
    pub instances: usize,
    /// Worst relative error over all components that exceeded the absolute
    /// floor, across both input and parameter gradients.
    pub max_rel_err: f64,
    /// Components failing both the relative and absolute tolerance.
    pub failures: usize,
}

/// Compares analytic gradients against central finite differences on random
/// instances (random small dimension, random box domain, random weights,
/// random in-domain probe point). A component passes when its absolute
/// error is below `tol_abs` or its relative error below `tol_rel`.
pub fn run_gradient_check(
    kind: SurrogateKind,
    instances: usize,
    seed: u64,
    step: f64,
    tol_rel: f64,
    tol_abs: f64,
) -> GradCheckReport {
    let mut rng = Rng::new(seed);
    let mut max_rel: f64 = 0.0;
    let mut failures = 0usize;
    for _ in 0..instances {
        let dim = 1 + rng.index(6);
        let lo = rng.uniform_in(-3.0, 0.0);
        let hi = lo + rng.uniform_in(0.5, 5.0);
        let domain = Domain::uniform_box(dim, lo, hi);
        let cfg = SurrogateConfig {
            kind,
            hidden: Some(vec![4 + rng.index(9), 4 + rng.index(9)]),
            activation: if rng.uniform() < 0.5 {
                Activation::Elu
            } else {
                Activation::Tanh
            },
            quad_init_scale: rng.uniform_in(0.1, 2.0),
        };
        let mut s = Surrogate::init(&cfg, &domain, &mut rng);
        // Jitter all parameters (biases included) so the probe exercises
        // generic operating points, not just the initialization manifold.
        let jitter: Vec<f64> = (0..s.param_count())
            .map(|_| rng.uniform_in(-0.5, 0.5))
            .collect();
        s.apply_update(&jitter);
        let x = domain.sample_uniform(&mut rng);
        // Calibrate to a random level so the scaled output path gets the
        // same scrutiny as the fresh one.
        s.calibrate(&x, rng.uniform_in(0.05, 25.0));

        let gi = s.grad_input(&x);
        let gi_fd = finite_diff_grad_input(&s, &x, step);
        let mut gp = vec![0.0; s.param_count()];
        s.grad_params_accum(&x, 1.0, &mut gp);
        let gp_fd = finite_diff_grad_params(&s, &x, step);

        for (a, b) in gi.iter().zip(&gi_fd).chain(gp.iter().zip(&gp_fd)) {
            let d = (a - b).abs();
            if d < tol_abs {
                continue;
            }
            let rel = d / a.abs().max(b.abs());
            max_rel = max_rel.max(rel);
            if rel >= tol_rel {
                failures += 1;
            }
        }
    }
    GradCheckReport {
        kind,
        instances,
        max_rel_err: max_rel,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_with(a: &[f64], n: usize) -> Surrogate {
        let mut s = Surrogate::Quadratic(QuadraticSurrogate::init(n, 0.0));
        s.set_params_flat(a);
        s
    }

    #[test]
    fn quadratic_forward_examples() {
        // A = I (2x2), x scalar 0: z = (0, 1), z^T I z = 1.
        let s = quad_with(&[1.0, 0.0, 0.0, 1.0], 1);
        assert_eq!(s.forward(&[0.0]), 1.0);
        // A = I (3x3), x = (1, 1): 1 + 1 + 1 = 3.
        let eye3 = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let s = quad_with(&eye3, 2);
        assert_eq!(s.forward(&[1.0, 1.0]), 3.0);
        // Gradient of x^T x + 1 at (3, 4) is (6, 8).
        assert_eq!(s.grad_input(&[3.0, 4.0]), vec![6.0, 8.0]);
        // Zero matrix: zero everywhere.
        let z = quad_with(&[0.0; 9], 2);
        assert_eq!(z.forward(&[2.0, -1.0]), 0.0);
        assert_eq!(z.grad_input(&[2.0, -1.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn quadratic_param_gradient_examples() {
        let s = quad_with(&[0.0; 4], 1);
        let mut g = vec![0.0; 4];
        // x = 0 => z = (0, 1): only the constant-corner entry is active.
        s.grad_params_accum(&[0.0], 1.0, &mut g);
        assert_eq!(g, vec![0.0, 0.0, 0.0, 1.0]);
        // Zero upstream contributes nothing.
        let mut g2 = vec![0.0; 4];
        s.grad_params_accum(&[1.5], 0.0, &mut g2);
        assert_eq!(g2, vec![0.0; 4]);
        // Accumulation adds onto the existing buffer.
        s.grad_params_accum(&[0.0], 2.0, &mut g);
        assert_eq!(g[3], 3.0);
    }

    #[test]
    fn quadratic_init_scale() {
        let s = Surrogate::Quadratic(QuadraticSurrogate::init(1, 1.0));
        // A = I: h(0) = 1 * scale.
        assert_eq!(s.forward(&[0.0]), 1.0);
    }

    #[test]
    fn quadratic_stays_symmetric_under_updates() {
        let mut s = Surrogate::Quadratic(QuadraticSurrogate::init(2, 0.5));
        let mut rng = Rng::new(3);
        for _ in 0..10 {
            let delta: Vec<f64> = (0..9).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
            s.apply_update(&delta);
        }
        let a = s.params_flat();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a[i * 3 + j], a[j * 3 + i]);
            }
        }
    }

    #[test]
    fn mlp_param_count_formula() {
        let domain = Domain::uniform_box(1, -2.0, 2.0);
        let mut rng = Rng::new(0);
        let s = Surrogate::init(&SurrogateConfig::default(), &domain, &mut rng);
        // [1, 64, 64, 1]: 2*64 + 65*64 + 65*1.
        assert_eq!(s.param_count(), 128 + 4160 + 65);
    }

    #[test]
    fn mlp_zero_params_is_the_zero_function() {
        let domain = Domain::uniform_box(3, -1.0, 5.0);
        let mut rng = Rng::new(1);
        let mut s = Surrogate::init(&SurrogateConfig::default(), &domain, &mut rng);
        s.set_params_flat(&vec![0.0; s.param_count()]);
        for x in [[-1.0, 0.0, 5.0], [2.0, 2.0, 2.0], [0.3, -0.7, 4.2]] {
            assert_eq!(s.forward(&x), 0.0);
            assert_eq!(s.grad_input(&x), vec![0.0; 3]);
        }
    }

    #[test]
    fn calibrate_matches_level_and_scales_gradients() {
        let domain = Domain::uniform_box(2, -1.0, 1.0);
        let mut rng = Rng::new(5);
        for kind in [SurrogateKind::Mlp, SurrogateKind::Quadratic] {
            let cfg = SurrogateConfig {
                kind,
                hidden: Some(vec![6, 6]),
                ..SurrogateConfig::default()
            };
            let mut s = Surrogate::init(&cfg, &domain, &mut rng);
            let jitter: Vec<f64> =
                (0..s.param_count()).map(|_| rng.uniform_in(-0.5, 0.5)).collect();
            s.apply_update(&jitter);
            let x = [0.4, -0.2];
            let g_before = s.grad_input(&x);
            for target in [0.0, 0.3, 1.0, 4.2e4] {
                let mut c = s.clone();
                c.calibrate(&x, target);
                let err = (c.forward(&x) - target).abs();
                assert!(err < 1e-9 * target.abs().max(1.0), "{kind:?}: {err}");
                // Only scale and level move: the gradient direction is the
                // pre-calibration one, magnified by max(1, |target|).
                let scale = target.abs().max(1.0);
                for (a, b) in c.grad_input(&x).iter().zip(&g_before) {
                    assert!((a - b * scale).abs() <= 1e-9 * scale);
                }
            }
        }
    }

    #[test]
    fn apply_update_is_exact_addition() {
        let domain = Domain::uniform_box(2, -1.0, 1.0);
        let mut rng = Rng::new(9);
        let mut s = Surrogate::init(
            &SurrogateConfig {
                hidden: Some(vec![5]),
                ..SurrogateConfig::default()
            },
            &domain,
            &mut rng,
        );
        let before = s.params_flat();
        let delta: Vec<f64> = (0..before.len()).map(|_| rng.uniform_in(-0.1, 0.1)).collect();
        s.apply_update(&delta);
        let after = s.params_flat();
        for i in 0..before.len() {
            assert_eq!(after[i], before[i] + delta[i]);
        }
        // Zero update leaves parameters bit-identical.
        s.apply_update(&vec![0.0; before.len()]);
        assert_eq!(s.params_flat(), after);
    }

    #[test]
    fn gradients_match_finite_differences() {
        for kind in [SurrogateKind::Mlp, SurrogateKind::Quadratic] {
            let report = run_gradient_check(kind, 20, 1234, 1e-4, 1e-4, 1e-7);
            assert_eq!(report.failures, 0, "{kind:?}: {report:?}");
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let domain = Domain::uniform_box(4, -2.0, 2.0);
        let mut rng = Rng::new(21);
        let s = Surrogate::init(&SurrogateConfig::default(), &domain, &mut rng);
        let x = [0.5, -1.5, 2.0, 0.0];
        let a = s.forward(&x);
        let b = s.forward(&x);
        assert_eq!(a.to_bits(), b.to_bits());
        let ga = s.grad_input(&x);
        let gb = s.grad_input(&x);
        assert_eq!(ga, gb);
    }

    #[test]
    fn grad_input_is_locally_lipschitz() {
        // Empirical smoothness: ||grad(x) - grad(x')|| <= C ||x - x'|| with
        // C bounded via the product of layer weight Frobenius norms and the
        // input scaling (activation curvature constants are <= 1).
        let domain = Domain::uniform_box(3, -2.0, 2.0);
        let mut rng = Rng::new(77);
        let s = Surrogate::init(&SurrogateConfig::default(), &domain, &mut rng);
        let m = match &s {
            Surrogate::Mlp(m) => m,
            _ => unreachable!(),
        };
        let prod: f64 = m.weight_norms().iter().product();
        let scale = m.in_scale.iter().cloned().fold(0.0_f64, f64::max);
        let layers = m.weight_norms().len() as f64;
        let bound = 4.0 * (layers + 1.0) * prod * prod * scale * scale;
        let eps = 1e-6;
        for _ in 0..50 {
            let x = domain.sample_uniform(&mut rng);
            let mut xp = x.clone();
            let k = rng.index(3);
            xp[k] += eps;
            let g1 = s.grad_input(&x);
            let g2 = s.grad_input(&xp);
            let d: f64 = g1
                .iter()
                .zip(&g2)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(d <= bound * eps, "diff {d} exceeds bound {}", bound * eps);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let domain = Domain::uniform_box(3, -1.0, 2.0);
        let mut rng = Rng::new(15);
        for kind in [SurrogateKind::Mlp, SurrogateKind::Quadratic] {
            let cfg = SurrogateConfig {
                kind,
                hidden: Some(vec![8, 8]),
                ..SurrogateConfig::default()
            };
            let mut s = Surrogate::init(&cfg, &domain, &mut rng);
            let jitter: Vec<f64> = (0..s.param_count()).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
            s.apply_update(&jitter);
            // A non-unit output scale must survive the round trip too.
            s.calibrate(&[0.0, 0.0, 0.0], 37.5);
            let path = dir.path().join(format!("{kind:?}.ckpt"));
            s.save(&path).unwrap();
            let loaded = Surrogate::load(&path).unwrap();
            assert_eq!(loaded.param_count(), s.param_count());
            let pa = s.params_flat();
            let pb = loaded.params_flat();
            assert_eq!(pa, pb);
            let x = [0.25, -0.5, 1.5];
            assert_eq!(s.forward(&x).to_bits(), loaded.forward(&x).to_bits());
        }
    }

    #[test]
    fn checkpoint_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"not a checkpoint").unwrap();
        assert!(matches!(Surrogate::load(&path), Err(Error::Checkpoint(_))));
        std::fs::write(&path, b"SGK1").unwrap();
        assert!(Surrogate::load(&path).is_err());
    }
}

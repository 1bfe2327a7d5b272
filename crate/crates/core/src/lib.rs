//! Gradient-free optimization of black-box objectives through an online
//! differentiable surrogate.
//!
//! The core idea: instead of attacking a non-differentiable (or noisy,
//! discontinuous, simulator-backed) objective directly, fit a small neural
//! proxy to the objective *smoothed by a Gaussian*, locally around the
//! current iterate. Sampling points from a neighborhood of the iterate and
//! regressing the proxy against single evaluations of the true objective
//! yields, in expectation, the gradient of the proxy-vs-smoothed-objective
//! loss — no nested sampling required. The proxy is differentiable by
//! construction, so its input gradient drives an ordinary Adam loop on the
//! task parameters while the proxy is refit on the fly.
//!
//! The crate ships:
//!
//! - [`tasks`]: deterministic, non-differentiable benchmark objectives
//!   (step functions, bit grids, a thrust-cutoff rocket, procedural
//!   textures, direct fitting of network weights) behind one eval-counting
//!   interface.
//! - [`sampling`]: a counter-based splittable RNG and the Gaussian
//!   neighborhood sampler, fully deterministic per seed.
//! - [`surrogate`]: hand-rolled MLP (ELU hidden layers, linear output
//!   head) and quadratic surrogates with exact reverse-mode gradients,
//!   checked against finite differences.
//! - [`estimator`]: the single-sample surrogate-fitting gradient estimator
//!   plus closed-form and statistical probes of its unbiasedness and
//!   variance.
//! - [`optimizers`]: the surrogate-driven optimizer, its ablations
//!   (no smoothing, no network, no locality), and classical baselines
//!   (SPSA, central finite differences, batched antithetic Gaussian
//!   smoothing, simulated annealing, a genetic algorithm) under a common
//!   budgeted-run harness.
//! - [`bench`]: multi-seed ensembles with median convergence curves and
//!   CSV/JSON export.
//! - [`cli`]: the `surrograd` command-line front end.
//!
//! Everything is deterministic given a seed: runs consume randomness from
//! a counter-based generator, so results are reproducible bit for bit
//! across runs and thread counts.

pub mod bench;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod optimizers;
pub mod sampling;
pub mod stats;
pub mod surrogate;
pub mod tasks;

pub use error::{Error, Result};

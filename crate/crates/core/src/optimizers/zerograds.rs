//! The surrogate-driven optimizer: every outer iteration refits the local
//! surrogate on fresh neighborhood samples (k_inner Adam steps on phi),
//! then takes one Adam step on theta along the surrogate's input gradient.
//! The first `warmup` iterations only fit the surrogate so theta does not
//! chase an uninitialized model.

use super::*;
use crate::estimator::{estimate_gradient_with, LocalitySampling};
use crate::surrogate::Surrogate;

pub(crate) fn run_surrogate_method(
    task: &BlackBoxTask,
    cfg: &RunConfig,
    r: &Resolved,
    mut grad_sink: Option<&mut Vec<f64>>,
) -> Result<RunResult> {
    let mut rng = Rng::new(cfg.seed);
    let mut theta = initial_theta(task, cfg, &mut rng)?;
    let initial = theta.clone();
    let mut surrogate = Surrogate::init(&r.surrogate, task.domain(), &mut rng);
    let mut adam_phi = AdamState::new(surrogate.param_count(), r.lr_phi);
    let mut adam_theta = AdamState::new(task.dim(), r.lr_theta);
    let sampling = if cfg.method == Method::ZeroGradsNoLocal {
        LocalitySampling::UniformImportance
    } else {
        LocalitySampling::Gaussian
    };
    let iter_cost = r.iteration_cost(cfg.method, task.dim(), &cfg.hp);
    let mut state = RunState::new(task, cfg.log_every);
    // Match the surrogate's output scale and level to the objective at the
    // start point, reusing the loss the first trace row already paid for.
    let f0 = state.record_at(0, &theta, None)?;
    surrogate.calibrate(&theta, f0);
    let mut aborted = None;
    let mut iter: u64 = 0;
    'outer: while state.spent + iter_cost <= cfg.budget_evals {
        iter += 1;
        let mut level = 0.0;
        for _ in 0..r.k_inner {
            let stats = match estimate_gradient_with(
                &surrogate,
                task,
                &theta,
                &r.sampler,
                &mut rng,
                sampling,
            ) {
                Ok(s) => s,
                Err(Error::NonFinite { context }) => {
                    aborted = Some(format!("non-finite value in {context} at iteration {iter}"));
                    // The failed batch may have spent a partial set of
                    // evaluations; reconcile from the task's own counter.
                    state.spent = task.eval_count() - state.bookkeeping;
                    break 'outer;
                }
                Err(e) => return Err(e),
            };
            state.spent += r.sampler.batch_size as u64;
            level += stats.mean_objective;
            let delta = adam_phi.step_delta(&stats.grad_phi);
            surrogate.apply_update(&delta);
        }
        // Objectives can fall by orders of magnitude over a run; keep the
        // calibration tracking the neighborhood's mean so the fit always
        // works at the scale of what is left to resolve. Skipped under
        // uniform-domain sampling, whose batch mean says nothing about the
        // level at theta.
        if sampling == LocalitySampling::Gaussian {
            surrogate.calibrate(&theta, level / r.k_inner as f64);
        }
        let g = surrogate.grad_input(&theta);
        if let Some(sink) = grad_sink.as_deref_mut() {
            sink.push(l2_norm(&g));
        }
        let mut grad_norm = None;
        if iter > r.warmup as u64 {
            if g.iter().any(|v| !v.is_finite()) {
                aborted = Some(format!("non-finite surrogate gradient at iteration {iter}"));
                break;
            }
            adam_theta.step(&mut theta, &g);
            task.domain().clamp(&mut theta);
            grad_norm = Some(l2_norm(&g));
        }
        if state.should_log(iter) {
            state.record_at(iter, &theta, grad_norm)?;
        }
    }
    if state.rows.last().map(|row| row.iter) != Some(iter) {
        state.record_at(iter, &theta, None)?;
    }
    Ok(state.finish(task, cfg, r.header.clone(), initial, theta, aborted))
}

//! Reference zeroth-order baselines. Each one talks to the task through the
//! same `evaluate` interface as the surrogate method, draws randomness from
//! the same counter-based generator, and reports budget use identically, so
//! benchmark comparisons only differ in the update rule.

use super::*;

/// Simultaneous-perturbation estimate: one Rademacher direction, two
/// evaluations, gradient component g_i = (f(theta+c d) - f(theta-c d)) / (2 c d_i)
/// with d_i in {-1, +1}, i.e. scale * d_i.
pub(crate) fn spsa_gradient(
    task: &BlackBoxTask,
    theta: &[f64],
    c: f64,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let n = theta.len();
    let delta: Vec<f64> = (0..n).map(|_| rng.rademacher()).collect();
    let mut plus = theta.to_vec();
    let mut minus = theta.to_vec();
    for i in 0..n {
        plus[i] += c * delta[i];
        minus[i] -= c * delta[i];
    }
    let fp = task.evaluate(&plus)?;
    let fm = task.evaluate(&minus)?;
    let scale = (fp - fm) / (2.0 * c);
    Ok(delta.iter().map(|d| scale * d).collect())
}

/// Central finite differences along every coordinate axis: 2n evaluations.
pub(crate) fn fd_gradient(
    task: &BlackBoxTask,
    theta: &[f64],
    eps: f64,
    grad: &mut [f64],
) -> Result<()> {
    let mut probe = theta.to_vec();
    for i in 0..theta.len() {
        probe[i] = theta[i] + eps;
        let fp = task.evaluate(&probe)?;
        probe[i] = theta[i] - eps;
        let fm = task.evaluate(&probe)?;
        probe[i] = theta[i];
        grad[i] = (fp - fm) / (2.0 * eps);
    }
    Ok(())
}

/// Antithetic Gaussian-smoothing estimate (batched two-point estimator):
/// for each pair draw eps ~ N(0, sigma^2 I) and accumulate
/// (f(theta+eps) - f(theta-eps)) eps / sigma^2, averaged over all 2*pairs
/// evaluations.
pub(crate) fn fr22_gradient(
    task: &BlackBoxTask,
    theta: &[f64],
    sigma: f64,
    pairs: usize,
    rng: &mut Rng,
    grad: &mut [f64],
) -> Result<()> {
    let n = theta.len();
    grad.fill(0.0);
    let mut eps = vec![0.0; n];
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    let inv = 1.0 / (sigma * sigma * (2 * pairs) as f64);
    for _ in 0..pairs {
        rng.fill_normal(&mut eps);
        for i in 0..n {
            eps[i] *= sigma;
            plus[i] = theta[i] + eps[i];
            minus[i] = theta[i] - eps[i];
        }
        let fp = task.evaluate(&plus)?;
        let fm = task.evaluate(&minus)?;
        let coeff = (fp - fm) * inv;
        for i in 0..n {
            grad[i] += coeff * eps[i];
        }
    }
    Ok(())
}

/// Shared skeleton for the three gradient-estimate baselines: estimate,
/// Adam step, clamp, log. `estimate` reports how many evaluations it spent.
fn run_gradient_baseline<F>(
    task: &BlackBoxTask,
    cfg: &RunConfig,
    r: &Resolved,
    iter_cost: u64,
    mut grad_sink: Option<&mut Vec<f64>>,
    mut estimate: F,
) -> Result<RunResult>
where
    F: FnMut(&BlackBoxTask, &[f64], &mut Rng, &mut [f64]) -> Result<()>,
{
    let mut rng = Rng::new(cfg.seed);
    let mut theta = initial_theta(task, cfg, &mut rng)?;
    let initial = theta.clone();
    let mut adam = AdamState::new(task.dim(), r.lr_theta);
    let mut state = RunState::new(task, cfg.log_every);
    state.record_at(0, &theta, None)?;
    let mut grad = vec![0.0; task.dim()];
    let mut aborted = None;
    let mut iter: u64 = 0;
    while state.spent + iter_cost <= cfg.budget_evals {
        iter += 1;
        estimate(task, &theta, &mut rng, &mut grad)?;
        state.spent += iter_cost;
        if grad.iter().any(|v| !v.is_finite()) {
            aborted = Some(format!("non-finite gradient estimate at iteration {iter}"));
            break;
        }
        let norm = l2_norm(&grad);
        if let Some(sink) = grad_sink.as_deref_mut() {
            sink.push(norm);
        }
        adam.step(&mut theta, &grad);
        task.domain().clamp(&mut theta);
        if state.should_log(iter) {
            state.record_at(iter, &theta, Some(norm))?;
        }
    }
    if state.rows.last().map(|row| row.iter) != Some(iter) {
        state.record_at(iter, &theta, None)?;
    }
    Ok(state.finish(task, cfg, r.header.clone(), initial, theta, aborted))
}

pub(crate) fn run_spsa(
    task: &BlackBoxTask,
    cfg: &RunConfig,
    r: &Resolved,
    grad_sink: Option<&mut Vec<f64>>,
) -> Result<RunResult> {
    let c = r.spsa_c;
    run_gradient_baseline(task, cfg, r, 2, grad_sink, move |task, theta, rng, grad| {
        let g = spsa_gradient(task, theta, c, rng)?;
        grad.copy_from_slice(&g);
        Ok(())
    })
}

pub(crate) fn run_fd(task: &BlackBoxTask, cfg: &RunConfig, r: &Resolved) -> Result<RunResult> {
    let eps = r.fd_eps;
    let iter_cost = 2 * task.dim() as u64;
    run_gradient_baseline(task, cfg, r, iter_cost, None, move |task, theta, _rng, grad| {
        fd_gradient(task, theta, eps, grad)
    })
}

pub(crate) fn run_fr22(
    task: &BlackBoxTask,
    cfg: &RunConfig,
    r: &Resolved,
    grad_sink: Option<&mut Vec<f64>>,
) -> Result<RunResult> {
    let sigma = r.sampler.sigma_outer;
    let pairs = (r.sampler.batch_size.max(2) / 2).max(1);
    let iter_cost = 2 * pairs as u64;
    run_gradient_baseline(task, cfg, r, iter_cost, grad_sink, move |task, theta, rng, grad| {
        fr22_gradient(task, theta, sigma, pairs, rng, grad)
    })
}

pub(crate) fn run_sa(task: &BlackBoxTask, cfg: &RunConfig, r: &Resolved) -> Result<RunResult> {
    let mut rng = Rng::new(cfg.seed);
    let mut theta = initial_theta(task, cfg, &mut rng)?;
    let initial = theta.clone();
    let mut state = RunState::new(task, cfg.log_every);
    state.record_at(0, &theta, None)?;
    let mut current = state.rows[0].loss; // doubles as the initial temperature
    let mut temp = current;
    let mut best = current;
    let mut best_theta = theta.clone();
    let n = task.dim();
    let mut proposal = vec![0.0; n];
    let mut step = vec![0.0; n];
    let mut iter: u64 = 0;
    while state.spent + 1 <= cfg.budget_evals {
        iter += 1;
        rng.fill_normal(&mut step);
        for i in 0..n {
            proposal[i] = theta[i] + r.sa_sigma * step[i];
        }
        task.domain().clamp(&mut proposal);
        let loss = task.evaluate(&proposal)?;
        state.spent += 1;
        // Draw the acceptance variate unconditionally so the stream position
        // never depends on loss values.
        let u = rng.uniform();
        let accept = loss < current || (temp > 0.0 && u < ((current - loss) / temp).exp());
        if accept {
            theta.copy_from_slice(&proposal);
            current = loss;
            if loss < best {
                best = loss;
                best_theta.copy_from_slice(&proposal);
            }
        }
        temp *= cfg.hp.sa_alpha;
        if state.should_log(iter) {
            state.record_known(iter, best, None);
        }
    }
    if state.rows.last().map(|row| row.iter) != Some(iter) {
        state.record_known(iter, best, None);
    }
    Ok(state.finish(task, cfg, r.header.clone(), initial, best_theta, None))
}

pub(crate) fn run_ga(task: &BlackBoxTask, cfg: &RunConfig, r: &Resolved) -> Result<RunResult> {
    let mut rng = Rng::new(cfg.seed);
    let theta0 = initial_theta(task, cfg, &mut rng)?;
    let mut state = RunState::new(task, cfg.log_every);
    state.record_at(0, &theta0, None)?;
    let p = cfg.hp.ga_pop;
    let n = task.dim();
    if state.spent + p as u64 > cfg.budget_evals {
        // Not enough budget to even score an initial population.
        let theta = theta0.clone();
        return Ok(state.finish(task, cfg, r.header.clone(), theta0, theta, None));
    }
    let mut pop: Vec<Vec<f64>> = Vec::with_capacity(p);
    pop.push(theta0.clone());
    for _ in 1..p {
        pop.push(task.domain().sample_uniform(&mut rng));
    }
    let mut fitness = vec![0.0; p];
    for (ind, fit) in pop.iter().zip(fitness.iter_mut()) {
        *fit = task.evaluate(ind)?;
    }
    state.spent += p as u64;
    let mut best_idx = argmin(&fitness);
    let mut best = fitness[best_idx];
    let mut best_theta = pop[best_idx].clone();
    let mutation_rate = 1.0 / n as f64;
    let mut gen: u64 = 0;
    while state.spent + p as u64 <= cfg.budget_evals {
        gen += 1;
        let mut next: Vec<Vec<f64>> = Vec::with_capacity(p);
        next.push(pop[best_idx].clone()); // elitism
        for _ in 1..p {
            let a = tournament(&fitness, cfg.hp.ga_tournament, &mut rng);
            let b = tournament(&fitness, cfg.hp.ga_tournament, &mut rng);
            let mut child = if rng.uniform() < cfg.hp.ga_crossover {
                (0..n)
                    .map(|j| if rng.uniform() < 0.5 { pop[a][j] } else { pop[b][j] })
                    .collect::<Vec<f64>>()
            } else {
                pop[a].clone()
            };
            for gene in child.iter_mut() {
                if rng.uniform() < mutation_rate {
                    *gene += r.ga_sigma * rng.normal();
                }
            }
            task.domain().clamp(&mut child);
            next.push(child);
        }
        pop = next;
        for (ind, fit) in pop.iter().zip(fitness.iter_mut()) {
            *fit = task.evaluate(ind)?;
        }
        state.spent += p as u64;
        best_idx = argmin(&fitness);
        if fitness[best_idx] < best {
            best = fitness[best_idx];
            best_theta = pop[best_idx].clone();
        }
        if state.should_log(gen) {
            state.record_known(gen, best, None);
        }
    }
    if state.rows.last().map(|row| row.iter) != Some(gen) {
        state.record_known(gen, best, None);
    }
    Ok(state.finish(task, cfg, r.header.clone(), theta0, best_theta, None))
}

fn argmin(values: &[f64]) -> usize {
    let mut idx = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[idx] {
            idx = i;
        }
    }
    idx
}

/// Tournament selection with replacement: best of `k` random indices.
fn tournament(fitness: &[f64], k: usize, rng: &mut Rng) -> usize {
    let mut winner = rng.index(fitness.len());
    for _ in 1..k.max(1) {
        let challenger = rng.index(fitness.len());
        if fitness[challenger] < fitness[winner] {
            winner = challenger;
        }
    }
    winner
}

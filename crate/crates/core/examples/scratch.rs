use surrograd::optimizers::{run, Method, RunConfig};
use surrograd::tasks::{parse_task_spec, rocket_cutoff_index};

fn main() {
    // Deep-dive: seed 0 rocket, trace per-coordinate convergence.
    let seed = 0u64;
    let task = parse_task_spec("rocket:10x100", seed).unwrap();
    let truth = task.ground_truth().unwrap();
    let targets_idx: Vec<i64> = truth
        .iter()
        .map(|t| rocket_cutoff_index(*t, 100) as i64)
        .collect();
    println!("targets: {targets_idx:?}");

    let mut cfg = RunConfig::new(Method::ZeroGrads, 20_000, seed);
    cfg.log_every = 25;
    let res = run(&task, &cfg).unwrap();
    println!("rows: {}", res.rows.len());
    for row in &res.rows {
        println!(
            "iter {:5} evals {:6} loss {:10.3e} gnorm {}",
            row.iter,
            row.evals,
            row.loss,
            row.grad_norm.map(|g| format!("{g:9.3e}")).unwrap_or_else(|| "-".into())
        );
    }
    let devs: Vec<i64> = res
        .final_params
        .iter()
        .zip(&targets_idx)
        .map(|(t, k)| rocket_cutoff_index(*t, 100) as i64 - k)
        .collect();
    let init_devs: Vec<i64> = res
        .initial_params
        .iter()
        .zip(&targets_idx)
        .map(|(t, k)| rocket_cutoff_index(*t, 100) as i64 - k)
        .collect();
    println!("init devs:  {init_devs:?}");
    println!("final devs: {devs:?}");
    println!("aborted: {:?}", res.aborted);
}

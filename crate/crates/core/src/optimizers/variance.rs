//! Gradient-noise instrumentation: rerun an optimizer while recording the
//! norm of every gradient it acts on, then summarize stability as a sliding
//! variance over that series. Only methods that produce a per-iteration
//! gradient estimate are supported.

use super::*;
use crate::stats::windowed_variance;

#[derive(Debug, Clone, serde::Serialize)]
pub struct VarianceTrace {
    pub method: Method,
    pub window: usize,
    /// One entry per optimizer iteration (including surrogate warmup).
    pub grad_norms: Vec<f64>,
    /// Sliding sample variance of `grad_norms`; empty when the trace is
    /// shorter than the window.
    pub windowed: Vec<f64>,
}

impl VarianceTrace {
    pub fn median_windowed(&self) -> Option<f64> {
        if self.windowed.is_empty() {
            None
        } else {
            Some(crate::stats::median(&self.windowed))
        }
    }
}

pub fn gradient_variance_trace(
    task: &BlackBoxTask,
    cfg: &RunConfig,
    window: usize,
) -> Result<VarianceTrace> {
    if window < 2 {
        return Err(Error::Config(format!(
            "variance window must be at least 2, got {window}"
        )));
    }
    let resolved = resolve(cfg, task)?;
    let mut sink = Vec::new();
    match cfg.method {
        Method::ZeroGrads => {
            zerograds::run_surrogate_method(task, cfg, &resolved, Some(&mut sink))?;
        }
        Method::Spsa => {
            baselines::run_spsa(task, cfg, &resolved, Some(&mut sink))?;
        }
        Method::Fr22 => {
            baselines::run_fr22(task, cfg, &resolved, Some(&mut sink))?;
        }
        other => {
            return Err(Error::Config(format!(
                "gradient variance traces support zerograds, spsa and fr22, not {other}"
            )));
        }
    }
    let windowed = if sink.len() >= window {
        windowed_variance(&sink, window)
    } else {
        Vec::new()
    };
    Ok(VarianceTrace {
        method: cfg.method,
        window,
        grad_norms: sink,
        windowed,
    })
}

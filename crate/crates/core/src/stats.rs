//! Small statistics helpers shared by the estimator probes, the variance
//! traces, and the benchmark aggregation.

/// Arithmetic mean. Panics on empty input.
pub fn mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "mean of empty slice");
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance, computed on values shifted by the first
/// element: identical inputs therefore give exactly 0.0, and the shift
/// doubles as a numerical guard against catastrophic cancellation.
pub fn sample_variance(xs: &[f64]) -> f64 {
    assert!(xs.len() >= 2, "sample variance needs at least 2 values");
    let shift = xs[0];
    let n = xs.len() as f64;
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for x in xs {
        let d = x - shift;
        sum += d;
        sumsq += d * d;
    }
    let m = sum / n;
    ((sumsq - n * m * m) / (n - 1.0)).max(0.0)
}

/// Median; even-length inputs average the two middle order statistics.
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "median of empty slice");
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("median of NaN"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Empirical q-quantile (0 < q <= 1) by the ceil(q*n)-th order statistic.
pub fn percentile(xs: &[f64], q: f64) -> f64 {
    assert!(!xs.is_empty(), "percentile of empty slice");
    assert!((0.0..=1.0).contains(&q), "quantile out of range");
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("percentile of NaN"));
    let idx = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    v[idx]
}

/// Rolling unbiased sample variance over windows of the given size;
/// output length is `series.len() - window + 1`.
pub fn windowed_variance(series: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 2, "window must be at least 2");
    assert!(series.len() >= window, "series shorter than window");
    series
        .windows(window)
        .map(sample_variance)
        .collect()
}

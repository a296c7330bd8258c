//! Order-fixed reductions and Monte Carlo summary statistics.

use serde::Serialize;

/// Pairwise (cascade) summation. Deterministic for a given input order and
/// much better conditioned than a running sum for large samples.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BASE: usize = 32;
    if xs.len() <= BASE {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean via pairwise summation.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// One Monte Carlo estimate with its standard error against a known target.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyStats {
    /// Statistic label, e.g. `E_P[Z_T]`.
    pub name: String,
    pub n_paths: usize,
    pub estimate: f64,
    pub standard_error: f64,
    pub target: f64,
    pub z_score: f64,
}

impl VerifyStats {
    /// Builds the summary from per-path samples (index order fixed by the
    /// caller). Zero-variance samples that hit the target exactly get z = 0.
    pub fn from_samples(name: &str, samples: &[f64], target: f64) -> Self {
        let n = samples.len();
        let m = mean(samples);
        let se = if n >= 2 {
            let devs: Vec<f64> = samples.iter().map(|x| (x - m) * (x - m)).collect();
            (pairwise_sum(&devs) / ((n - 1) as f64 * n as f64)).sqrt()
        } else {
            0.0
        };
        let z = if se > 0.0 {
            (m - target) / se
        } else if (m - target).abs() <= 1e-14 * target.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY * (m - target).signum()
        };
        VerifyStats {
            name: name.to_string(),
            n_paths: n,
            estimate: m,
            standard_error: se,
            target,
            z_score: z,
        }
    }
}

/// Median of a sample; returns 0 for an empty slice.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN sample"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Empirical quantile (nearest-rank) of a sample, q in [0, 1].
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    assert!(!xs.is_empty(), "quantile of empty sample");
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN sample"));
    let idx = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    v[idx]
}

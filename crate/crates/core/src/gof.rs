//! Goodness-of-fit tests used to validate the samplers: Pearson χ² for
//! count data against a Poisson law, and Kolmogorov–Smirnov (one and two
//! sample) for continuous data.

use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Poisson};

use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Minimum expected count per χ² bin; sparse bins are pooled.
pub const MIN_EXPECTED: f64 = 5.0;

/// Pearson χ² test of integer `samples` against Poisson(`mean`), with
/// adjacent bins pooled until each expects at least [`MIN_EXPECTED`]
/// samples. The upper tail is folded into the last bin.
pub fn chi_square_poisson(samples: &[u64], mean: f64) -> Result<TestResult> {
    ensure(!samples.is_empty(), "samples", || "no samples".into())?;
    ensure(mean > 0.0 && mean.is_finite(), "mean", || {
        format!("must be positive, got {mean}")
    })?;
    let dist = Poisson::new(mean).expect("valid mean");
    let n = samples.len() as f64;
    let max_seen = *samples.iter().max().unwrap();

    // Bins are [prev_edge + 1, edge]; the last one is open above.
    let kmax = max_seen.max((mean + 40.0 * mean.sqrt() + 10.0).ceil() as u64);
    let mut bins: Vec<(u64, f64)> = Vec::new();
    let mut acc = 0.0;
    for k in 0..kmax {
        acc += n * dist.pmf(k);
        if acc >= MIN_EXPECTED {
            bins.push((k, acc));
            acc = 0.0;
        }
    }
    acc += n * dist.sf(kmax - 1);
    match bins.last_mut() {
        Some(last) if acc < MIN_EXPECTED => last.1 += acc,
        _ => bins.push((u64::MAX, acc)),
    }
    if let Some(last) = bins.last_mut() {
        last.0 = u64::MAX;
    }
    ensure(bins.len() >= 2, "samples", || {
        "too few samples for a χ² test (fewer than two usable bins)".into()
    })?;

    let mut observed = vec![0u64; bins.len()];
    for &s in samples {
        let idx = bins.partition_point(|&(hi, _)| hi < s);
        observed[idx] += 1;
    }
    let statistic: f64 = observed
        .iter()
        .zip(&bins)
        .map(|(&o, &(_, e))| (o as f64 - e).powi(2) / e)
        .sum();
    let dof = (bins.len() - 1) as f64;
    let p_value = 1.0 - ChiSquared::new(dof).expect("positive dof").cdf(statistic);
    Ok(TestResult { statistic, p_value })
}

/// One-sample KS test of `samples` against the continuous `cdf`.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestResult> {
    ensure(!samples.is_empty(), "samples", || "no samples".into())?;
    let mut xs = samples.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    Ok(TestResult {
        statistic: d,
        p_value: kolmogorov_sf(d, n),
    })
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult> {
    ensure(!a.is_empty() && !b.is_empty(), "samples", || {
        "no samples".into()
    })?;
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_unstable_by(f64::total_cmp);
    y.sort_unstable_by(f64::total_cmp);
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / nx - j as f64 / ny).abs());
    }
    let ne = nx * ny / (nx + ny);
    Ok(TestResult {
        statistic: d,
        p_value: kolmogorov_sf(d, ne),
    })
}

// Asymptotic Kolmogorov tail with Stephens' small-sample correction.
fn kolmogorov_sf(d: f64, n_eff: f64) -> f64 {
    let sn = n_eff.sqrt();
    let z = (sn + 0.12 + 0.11 / sn) * d;
    if z < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = sign * (-2.0 * k * k * z * z).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var)
}

//! Sample statistics used by the experiments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn sorted(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("sample contains NaN".into()));
    }
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample Kolmogorov–Smirnov distance `sup |F_a − F_b|`.
pub fn ks_statistic(sample_a: &[f64], sample_b: &[f64]) -> Result<f64> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(Error::InvalidArgument("KS statistic needs two nonempty samples".into()));
    }
    let a = sorted(sample_a)?;
    let b = sorted(sample_b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// KS distance of a sample against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::InvalidArgument("KS statistic needs a nonempty sample".into()));
    }
    let v = sorted(sample)?;
    let n = v.len() as f64;
    Ok(v.iter().enumerate().fold(0.0_f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    }))
}

fn check_tail_sample(sample: &[f64], k: usize) -> Result<()> {
    if sample.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("tail sample must be positive and finite".into()));
    }
    if k == 0 || k >= sample.len() {
        return Err(Error::InvalidArgument(format!(
            "k must be in 1..{}, got {k}",
            sample.len()
        )));
    }
    Ok(())
}

/// Hill estimate of the tail index `α` in `P(X > t) ≈ c t^{−α}` from the
/// `k` largest observations.
pub fn hill_estimator(sample: &[f64], k: usize) -> Result<f64> {
    check_tail_sample(sample, k)?;
    let v = sorted(sample)?;
    let n = v.len();
    let base = v[n - k - 1].ln();
    let s: f64 = v[n - k..].iter().map(|x| x.ln() - base).sum();
    if s == 0.0 {
        return Err(Error::Degenerate(
            "top order statistics are all equal; Hill estimate undefined".into(),
        ));
    }
    Ok(k as f64 / s)
}

/// Hill estimate for right-censored data: the numerator counts only the
/// uncensored observations among the top `k`.
pub fn censored_hill_estimator(sample: &[f64], censored: &[bool], k: usize) -> Result<f64> {
    if censored.len() != sample.len() {
        return Err(Error::Dimension {
            expected: sample.len(),
            got: censored.len(),
        });
    }
    check_tail_sample(sample, k)?;
    let mut idx: Vec<usize> = (0..sample.len()).collect();
    // censored values sort after observed ties
    idx.sort_by(|&a, &b| sample[a].total_cmp(&sample[b]).then(censored[a].cmp(&censored[b])));
    let n = idx.len();
    let base = sample[idx[n - k - 1]].ln();
    let mut s = 0.0;
    let mut events = 0usize;
    for &i in &idx[n - k..] {
        s += sample[i].ln() - base;
        events += usize::from(!censored[i]);
    }
    if s == 0.0 {
        return Err(Error::Degenerate(
            "top order statistics are all equal; Hill estimate undefined".into(),
        ));
    }
    Ok(events as f64 / s)
}

/// Linear-interpolation quantile (type 7).
pub fn quantile(sample: &[f64], p: f64) -> Result<f64> {
    if sample.is_empty() || !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "quantile needs a nonempty sample and p in [0,1], got p={p}"
        )));
    }
    let v = sorted(sample)?;
    Ok(quantile_sorted(&v, p))
}

fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn median(sample: &[f64]) -> Result<f64> {
    quantile(sample, 0.5)
}

pub fn iqr(sample: &[f64]) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::InvalidArgument("IQR of an empty sample".into()));
    }
    let v = sorted(sample)?;
    Ok(quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25))
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn from_sample(sample: &[f64]) -> Result<Self> {
        let n = sample.len();
        if n == 0 {
            return Err(Error::InvalidArgument("mean of an empty sample".into()));
        }
        let mean = sample.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            sample.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Ok(Self {
            mean,
            stderr: (var / n as f64).sqrt(),
            n,
        })
    }
}

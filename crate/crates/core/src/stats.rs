//! Kolmogorov-Smirnov tests and small summary helpers.

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::rng::{self, Phase};

/// Minimum sample size accepted by the KS tests.
pub const KS_MIN: usize = 20;
/// Below this size the two-sample p-value is computed by permutation.
pub const KS_PERMUTATION_BELOW: usize = 100;
pub const KS_PERMUTATIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum KsMethod {
    Asymptotic,
    Permutation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
    pub method: KsMethod,
}

impl KsResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.3 {
        // series below converges slowly here and the value is 1 to double precision
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value for an effective size `ne` with the usual finite-size correction.
fn asymptotic_p(d: f64, ne: f64) -> f64 {
    let s = ne.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

/// Two-sample critical value `c(α)·sqrt((n1+n2)/(n1·n2))`.
pub fn ks_critical(alpha: f64, n1: usize, n2: usize) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((n1 + n2) as f64 / (n1 as f64 * n2 as f64)).sqrt()
}

fn sorted<T: Scalar>(a: &[T]) -> Result<Vec<f64>> {
    let mut v: Vec<f64> = a.iter().map(|x| x.as_f64()).collect();
    if v.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument("sample contains NaN".into()));
    }
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Sup-distance between the empirical CDFs of two sorted samples.
fn statistic_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len() as f64, b.len() as f64);
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
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Two-sample KS test with the default permutation seed.
pub fn ks_two_sample<T: Scalar>(a: &[T], b: &[T]) -> Result<KsResult> {
    ks_two_sample_seeded(a, b, 0)
}

pub fn ks_two_sample_seeded<T: Scalar>(a: &[T], b: &[T], seed: u64) -> Result<KsResult> {
    let n_min = a.len().min(b.len());
    if n_min < KS_MIN {
        return Err(Error::TooSmall { need: KS_MIN, got: n_min });
    }
    let sa = sorted(a)?;
    let sb = sorted(b)?;
    let d = statistic_sorted(&sa, &sb);
    let (n1, n2) = (sa.len(), sb.len());
    if n_min >= KS_PERMUTATION_BELOW {
        let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
        return Ok(KsResult { statistic: d, p_value: asymptotic_p(d, ne), n1, n2, method: KsMethod::Asymptotic });
    }
    let mut pool: Vec<f64> = sa.iter().chain(sb.iter()).copied().collect();
    let mut rng = rng::stream(seed, 0, Phase::Permutation);
    let mut hits = 0usize;
    for _ in 0..KS_PERMUTATIONS {
        pool.shuffle(&mut rng);
        let (x, y) = pool.split_at_mut(n1);
        x.sort_by(f64::total_cmp);
        y.sort_by(f64::total_cmp);
        if statistic_sorted(x, y) >= d - 1e-12 {
            hits += 1;
        }
    }
    let p = (hits + 1) as f64 / (KS_PERMUTATIONS + 1) as f64;
    Ok(KsResult { statistic: d, p_value: p, n1, n2, method: KsMethod::Permutation })
}

/// One-sample KS test against a continuous CDF.
pub fn ks_one_sample<T: Scalar, F: Fn(f64) -> f64>(a: &[T], cdf: F) -> Result<KsResult> {
    if a.len() < KS_MIN {
        return Err(Error::TooSmall { need: KS_MIN, got: a.len() });
    }
    let s = sorted(a)?;
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in s.iter().enumerate() {
        let f = cdf(*x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsResult { statistic: d, p_value: asymptotic_p(d, n), n1: s.len(), n2: 0, method: KsMethod::Asymptotic })
}

/// Sample median of a non-empty slice.
pub fn median(v: &[f64]) -> f64 {
    quantile(v, 0.5)
}

/// Linear-interpolation quantile.
pub fn quantile(v: &[f64], q: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    if s.is_empty() {
        return f64::NAN;
    }
    let pos = q * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

/// Mean and standard error.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

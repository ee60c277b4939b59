//! Monte Carlo studies of entrance from `+∞`: stabilisation of `P_x` as
//! `x → ∞`, mean hitting times, undershoot stationarity and the speed law.
//!
//! `P_∞` is approximated by `P_{x_proxy}` for a large start level.

use rayon::prelude::*;
use serde::Serialize;

use crate::classifier::{classify_boundary, Verdict};
use crate::error::{Error, Result};
use crate::fluctuation::{stationary_overshoot_with, OvershootOptions};
use crate::levy::LevyModel;
use crate::rate::RateFunction;
use crate::rng::{self, Phase};
use crate::stats::{self, KsResult};
use crate::time_change::{marginal_at, MarginalOptions, Walker};

/// Discretisation settings shared by the studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimOptions {
    /// Lévy time step.
    pub dt: f64,
    /// Step cap per path; paths reaching it are censored.
    pub max_steps: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { dt: 0.01, max_steps: 2_000_000 }
    }
}

/// First passage of `X` below `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Passage {
    pub time: f64,
    /// `b - X_{T_b}`, zero for a continuous crossing.
    pub undershoot: f64,
    /// `X_{T_b-} - b`.
    pub pre_undershoot: f64,
}

/// Runs the walker until `X` first goes below `b`.
pub fn first_passage<R: rand::Rng + ?Sized>(walker: &mut Walker, b: f64, max_steps: usize, rng: &mut R) -> Option<Passage> {
    while walker.steps < max_steps {
        let s = walker.step(rng);
        if s.step.continuous_min < b {
            return Some(Passage { time: walker.clock, undershoot: 0.0, pre_undershoot: 0.0 });
        }
        if s.step.end < b {
            return Some(Passage { time: walker.clock, undershoot: b - s.step.end, pre_undershoot: s.step.pre_jump - b });
        }
    }
    None
}

fn require_entrance(model: &LevyModel, rate: &RateFunction) -> Result<()> {
    let report = classify_boundary(model, rate);
    match report.verdict {
        Verdict::Entrance => Ok(()),
        v => Err(Error::NotEntrance(v.to_string())),
    }
}

/// Per-level samples of the from-infinity study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSample {
    pub x: f64,
    /// `X_{t_probe}` (`+∞` never occurs under an entrance verdict).
    pub marginal: Vec<f64>,
    /// `T_b`, capped at the step budget.
    pub hitting: Vec<f64>,
    pub finite_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilizationReport {
    pub levels: Vec<LevelSample>,
    /// KS distances of `X_{t_probe}` between consecutive levels.
    pub ks_marginal: Vec<KsResult>,
    /// KS distances of `T_b` between consecutive levels.
    pub ks_hitting: Vec<KsResult>,
}

impl StabilizationReport {
    /// Whether the consecutive marginal KS distances shrink from the first to the last pair.
    pub fn stabilizes(&self) -> bool {
        match (self.ks_marginal.first(), self.ks_marginal.last()) {
            (Some(a), Some(b)) => b.statistic < a.statistic,
            _ => false,
        }
    }
}

/// Samples `X_{t_probe}` and `T_b` under `P_x` for a path of increasing `x`.
#[allow(clippy::too_many_arguments)]
pub fn from_infinity_study(
    model: &LevyModel,
    rate: &RateFunction,
    x_levels: &[f64],
    t_probe: f64,
    b_level: f64,
    n: usize,
    seed: u64,
    opts: SimOptions,
) -> Result<StabilizationReport> {
    require_entrance(model, rate)?;
    if x_levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("x levels must increase".into()));
    }
    let mut levels = Vec::new();
    for (li, &x) in x_levels.iter().enumerate() {
        let samples: Vec<(f64, f64)> = (0..n as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng::stream(rng::derive_seed(seed, li as u64), i, Phase::Path);
                let mut w = Walker::new(model, rate, x, opts.dt).expect("validated step");
                let mut marginal = f64::NAN;
                let mut hit = f64::NAN;
                while w.steps < opts.max_steps && (marginal.is_nan() || hit.is_nan()) {
                    let before = w.x;
                    let s = w.step(&mut rng);
                    if marginal.is_nan() && w.clock > t_probe {
                        marginal = before;
                    }
                    if hit.is_nan() && (s.step.continuous_min < b_level || s.step.end < b_level) {
                        hit = w.clock;
                    }
                }
                if hit.is_nan() {
                    hit = w.clock;
                }
                if marginal.is_nan() {
                    marginal = w.x;
                }
                (marginal, hit)
            })
            .collect();
        let marginal: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let finite_fraction = marginal.iter().filter(|v| v.is_finite()).count() as f64 / n as f64;
        levels.push(LevelSample { x, marginal, hitting: samples.iter().map(|s| s.1).collect(), finite_fraction });
    }
    let mut ks_marginal = Vec::new();
    let mut ks_hitting = Vec::new();
    for w in levels.windows(2) {
        ks_marginal.push(stats::ks_two_sample(&w[0].marginal, &w[1].marginal)?);
        ks_hitting.push(stats::ks_two_sample(&w[0].hitting, &w[1].hitting)?);
    }
    Ok(StabilizationReport { levels, ks_marginal, ks_hitting })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HittingEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub crossed: usize,
    pub censored: usize,
}

/// Fraction of censored paths above which the hitting-time estimate is refused.
pub const CENSORED_LIMIT: f64 = 0.5;

/// Monte Carlo estimate of `E_x[T_b]`.
pub fn mean_hitting(
    model: &LevyModel,
    rate: &RateFunction,
    x: f64,
    b: f64,
    n: usize,
    seed: u64,
    opts: SimOptions,
) -> Result<HittingEstimate> {
    if !(x > b) {
        return Err(Error::InvalidArgument(format!("start {x} must lie above the level {b}")));
    }
    let times: Vec<Option<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i, Phase::Path);
            let mut w = Walker::new(model, rate, x, opts.dt).expect("validated step");
            first_passage(&mut w, b, opts.max_steps, &mut rng).map(|p| p.time)
        })
        .collect();
    let crossed: Vec<f64> = times.iter().flatten().copied().collect();
    let censored = n - crossed.len();
    if censored as f64 > CENSORED_LIMIT * n as f64 {
        return Err(Error::CensoredMajority { censored, total: n });
    }
    let (mean, stderr) = stats::mean_se(&crossed);
    Ok(HittingEstimate { mean, stderr, crossed: crossed.len(), censored })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UndershootReport {
    pub levels: Vec<f64>,
    pub undershoots: Vec<Vec<f64>>,
    /// `(i, j, KS)` for every pair of levels.
    pub pairwise: Vec<(usize, usize, KsResult)>,
    /// Each level against the stationary undershoot sampler, when that is not a Dirac mass.
    pub vs_stationary: Vec<KsResult>,
    pub all_pass: bool,
}

/// Collects `b_i - X_{T_{b_i}}` along paths started at `x_proxy`.
pub fn undershoot_stationarity(
    model: &LevyModel,
    rate: &RateFunction,
    x_proxy: f64,
    levels: &[f64],
    n: usize,
    seed: u64,
    opts: SimOptions,
) -> Result<UndershootReport> {
    require_entrance(model, rate)?;
    let mut lv = levels.to_vec();
    lv.sort_by(|a, b| b.total_cmp(a));
    if lv.first().is_some_and(|top| *top >= x_proxy) {
        return Err(Error::InvalidArgument("levels must lie below the start".into()));
    }
    let rows: Vec<Option<Vec<f64>>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i, Phase::Path);
            let mut w = Walker::new(model, rate, x_proxy, opts.dt).expect("validated step");
            let mut out = Vec::with_capacity(lv.len());
            let mut next = 0;
            while next < lv.len() && w.steps < opts.max_steps {
                let s = w.step(&mut rng);
                while next < lv.len() && (s.step.continuous_min < lv[next] || s.step.end < lv[next]) {
                    let b = lv[next];
                    out.push(if s.step.continuous_min < b { 0.0 } else { b - s.step.end });
                    next += 1;
                }
            }
            (out.len() == lv.len()).then_some(out)
        })
        .collect();
    let rows: Vec<Vec<f64>> = rows.into_iter().flatten().collect();
    let undershoots: Vec<Vec<f64>> = (0..lv.len()).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let mut pairwise = Vec::new();
    for i in 0..lv.len() {
        for j in i + 1..lv.len() {
            pairwise.push((i, j, stats::ks_two_sample(&undershoots[i], &undershoots[j])?));
        }
    }
    let mut vs_stationary = Vec::new();
    let over = stationary_overshoot_with(
        model,
        x_proxy.max(10.0),
        n,
        rng::derive_seed(seed, 1),
        OvershootOptions { dt: opts.dt, max_steps: opts.max_steps.min(200_000) },
    )?;
    if let Some(u) = over.undershoots() {
        for row in &undershoots {
            vs_stationary.push(stats::ks_two_sample(row, u)?);
        }
    }
    let all_pass = pairwise.iter().all(|p| !p.2.rejects(0.01)) && vs_stationary.iter().all(|k| !k.rejects(0.01));
    Ok(UndershootReport { levels: lv, undershoots, pairwise, vs_stationary, all_pass })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedPoint {
    pub t: f64,
    /// Median and quartiles of `φ(X_t)/(γt)`.
    pub ratio_median: f64,
    pub ratio_q1: f64,
    pub ratio_q3: f64,
    /// Median of `X_t / φ^{-1}(γt)`.
    pub level_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedReport {
    pub gamma: f64,
    pub x_proxy: f64,
    /// Time the `P_∞` path needs to come down to `x_proxy`, `φ(x_proxy)/γ`;
    /// proxy paths are read as `P_∞` paths from that time on.
    pub offset: f64,
    pub points: Vec<SpeedPoint>,
}

/// Ratios `φ(X_t)/(γt)` over a time window under the `P_∞` proxy.
pub fn speed_law(
    model: &LevyModel,
    rate: &RateFunction,
    x_proxy: f64,
    t_window: &[f64],
    n: usize,
    seed: u64,
    opts: SimOptions,
) -> Result<SpeedReport> {
    let gamma = -model.mean();
    if gamma == 0.0 {
        return Err(Error::ZeroDrift);
    }
    match rate.class_pos() {
        Some(c) if c.rate == 0.0 && c.power > 1.0 => {}
        _ => {
            return Err(Error::Unsupported(format!(
                "R = {} is not regularly varying with index > 1",
                rate.source
            )))
        }
    }
    require_entrance(model, rate)?;
    let offset = rate.phi(x_proxy)? / gamma;
    let mut ts = t_window.to_vec();
    ts.sort_by(f64::total_cmp);
    if ts.first().is_some_and(|t| *t < offset) {
        return Err(Error::InvalidArgument(format!(
            "window starts before the proxy's alignment time {offset}"
        )));
    }
    let t_end = *ts.last().unwrap() - offset;
    let samples: Vec<Option<Vec<f64>>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i, Phase::Path);
            let mut w = Walker::new(model, rate, x_proxy, opts.dt).expect("validated step");
            let mut out = Vec::with_capacity(ts.len());
            let mut next = 0;
            while next < ts.len() && w.steps < opts.max_steps {
                let before = w.x;
                w.step(&mut rng);
                while next < ts.len() && w.clock > ts[next] - offset {
                    out.push(before);
                    next += 1;
                }
                if w.clock > t_end {
                    break;
                }
            }
            (out.len() == ts.len()).then_some(out)
        })
        .collect();
    let samples: Vec<Vec<f64>> = samples.into_iter().flatten().collect();
    if samples.len() * 2 < n {
        return Err(Error::CensoredMajority { censored: n - samples.len(), total: n });
    }
    let mut points = Vec::new();
    for (j, &t) in ts.iter().enumerate() {
        let mut ratios = Vec::with_capacity(samples.len());
        let mut levels = Vec::with_capacity(samples.len());
        let target = rate.phi_inverse(gamma * t)?;
        for s in &samples {
            ratios.push(rate.phi(s[j])? / (gamma * t));
            levels.push(s[j] / target);
        }
        points.push(SpeedPoint {
            t,
            ratio_median: stats::median(&ratios),
            ratio_q1: stats::quantile(&ratios, 0.25),
            ratio_q3: stats::quantile(&ratios, 0.75),
            level_median: stats::median(&levels),
        });
    }
    Ok(SpeedReport { gamma, x_proxy, offset, points })
}

/// KS comparison of `X_t` and `Φ_z(X)_t`, both under the proxy start, on independent streams.
#[allow(clippy::too_many_arguments)]
pub fn proxy_shift_invariance(
    model: &LevyModel,
    rate: &RateFunction,
    x_proxy: f64,
    z: f64,
    t_probe: f64,
    n: usize,
    seed: u64,
    opts: SimOptions,
) -> Result<KsResult> {
    let mo = MarginalOptions { dt: opts.dt, max_steps: opts.max_steps, ..MarginalOptions::default() };
    let a = marginal_at(model, rate, x_proxy, None, t_probe, n, rng::derive_seed(seed, 0), mo)?;
    let b = marginal_at(model, rate, x_proxy, Some(z), t_probe, n, rng::derive_seed(seed, 1), mo)?;
    stats::ks_two_sample_seeded(&a.values, &b.values, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupationFlatness {
    pub bin_edges: Vec<f64>,
    /// `R`-weighted occupation per unit level in each bin.
    pub density: Vec<f64>,
    pub max_rel_deviation: f64,
}

/// `R`-weighted occupation of proxy paths up to `T_b` on `bins` equal bins of `[lo, top]`.
#[allow(clippy::too_many_arguments)]
pub fn occupation_flatness(
    model: &LevyModel,
    rate: &RateFunction,
    x_proxy: f64,
    b: f64,
    (lo, top): (f64, f64),
    bins: usize,
    n: usize,
    seed: u64,
    opts: SimOptions,
) -> Result<OccupationFlatness> {
    if !(b <= lo && lo < top && top <= x_proxy) || bins == 0 {
        return Err(Error::InvalidArgument("need b <= lo < top <= x_proxy and bins > 0".into()));
    }
    let h = (top - lo) / bins as f64;
    let hists: Vec<Vec<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i, Phase::Path);
            let mut w = Walker::new(model, rate, x_proxy, opts.dt).expect("validated step");
            let mut hist = vec![0.0; bins];
            while w.steps < opts.max_steps {
                let before = w.x;
                let c0 = w.clock;
                let s = w.step(&mut rng);
                if before >= lo && before < top {
                    let k = (((before - lo) / h) as usize).min(bins - 1);
                    hist[k] += (w.clock - c0) * rate.eval(before);
                }
                if s.step.continuous_min < b || s.step.end < b {
                    break;
                }
            }
            hist
        })
        .collect();
    let density: Vec<f64> = (0..bins).map(|k| hists.iter().map(|v| v[k]).sum::<f64>() / (n as f64 * h)).collect();
    let mean = density.iter().sum::<f64>() / bins as f64;
    let max_rel_deviation = density.iter().map(|d| (d / mean - 1.0).abs()).fold(0.0, f64::max);
    Ok(OccupationFlatness { bin_edges: (0..=bins).map(|k| lo + k as f64 * h).collect(), density, max_rel_deviation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::JumpLaw;
    use crate::rate::parse_rate;

    #[test]
    fn stabilisation_in_x() {
        let m = LevyModel::brownian(-1.0, 4.0).unwrap();
        let r = parse_rate("exp(x)").unwrap();
        let rep = from_infinity_study(&m, &r, &[5.0, 10.0, 20.0, 40.0], 0.1, 0.0, 800, 3, SimOptions::default()).unwrap();
        assert!(rep.stabilizes(), "{:?}", rep.ks_marginal.iter().map(|k| k.statistic).collect::<Vec<_>>());
        assert!(rep.levels.iter().all(|l| l.finite_fraction == 1.0));
        let again = from_infinity_study(&m, &r, &[5.0, 10.0], 0.1, 0.0, 50, 3, SimOptions::default()).unwrap();
        assert_eq!(again.levels[0].marginal[..], rep.levels[0].marginal[..50]);
    }

    #[test]
    fn not_entrance_is_refused() {
        let m = LevyModel::brownian(1.0, 4.0).unwrap();
        let r = parse_rate("exp(x)").unwrap();
        assert!(matches!(
            from_infinity_study(&m, &r, &[5.0, 10.0], 0.1, 0.0, 10, 1, SimOptions::default()),
            Err(Error::NotEntrance(_))
        ));
    }

    #[test]
    fn hitting_times() {
        let m = LevyModel::brownian(-1.0, 4.0).unwrap();
        let r = parse_rate("exp(x)").unwrap();
        let e10 = mean_hitting(&m, &r, 10.0, 0.0, 400, 5, SimOptions::default()).unwrap();
        let e20 = mean_hitting(&m, &r, 20.0, 0.0, 400, 5, SimOptions::default()).unwrap();
        assert!((e10.mean - e20.mean).abs() < 4.0 * (e10.stderr.hypot(e20.stderr)));
        let e_hi = mean_hitting(&m, &r, 10.0, 1.0, 400, 5, SimOptions::default()).unwrap();
        assert!(e_hi.mean <= e10.mean);
        let up = LevyModel::brownian(1.0, 1.0).unwrap();
        let opts = SimOptions { dt: 0.05, max_steps: 20_000 };
        let e = mean_hitting(&up, &parse_rate("max(1,x)").unwrap(), 5.0, 0.0, 100, 5, opts);
        assert!(matches!(e, Err(Error::CensoredMajority { .. })));
    }

    #[test]
    fn brownian_undershoots_vanish() {
        let m = LevyModel::brownian(-1.0, 1.0).unwrap();
        let r = parse_rate("exp(x)").unwrap();
        let rep = undershoot_stationarity(&m, &r, 10.0, &[5.0, 2.0, 0.0], 100, 1, SimOptions::default()).unwrap();
        assert!(rep.undershoots.iter().flatten().all(|u| *u == 0.0));
        assert!(rep.all_pass);
    }

    #[test]
    fn exponential_undershoots_are_stationary() {
        let m = LevyModel::compound_poisson(0.5, 1.0, JumpLaw::ExponentialDown { mean: 1.0 }).unwrap();
        let r = parse_rate("exp(x/2)").unwrap();
        let opts = SimOptions { dt: 0.05, max_steps: 200_000 };
        let rep = undershoot_stationarity(&m, &r, 30.0, &[10.0, 5.0, 0.0], 400, 2, opts).unwrap();
        assert!(rep.all_pass, "{:?}", rep.pairwise);
        let ks = stats::ks_one_sample(&rep.undershoots[2], |x| 1.0 - (-x).exp()).unwrap();
        assert!(ks.p_value > 0.01);
    }

    #[test]
    fn zero_drift_is_refused() {
        let m = LevyModel::brownian(0.0, 1.0).unwrap();
        let r = parse_rate("max(1,x)^2").unwrap();
        assert_eq!(speed_law(&m, &r, 1e3, &[1e-2], 10, 1, SimOptions::default()).unwrap_err(), Error::ZeroDrift);
    }

    #[test]
    fn speed_of_coming_down() {
        let m = LevyModel::brownian(-1.0, 1.0).unwrap();
        let r = parse_rate("max(1,x)^3").unwrap();
        let opts = SimOptions { dt: 0.05, max_steps: 10_000_000 };
        let rep = speed_law(&m, &r, 100.0, &[1e-3, 3e-3], 300, 1, opts).unwrap();
        for p in &rep.points {
            assert!((p.ratio_median - 1.0).abs() < 0.1, "{p:?}");
        }
    }

    #[test]
    fn flat_occupation() {
        let m = LevyModel::brownian(-1.0, 1.0).unwrap();
        let r = parse_rate("exp(x)").unwrap();
        let occ = occupation_flatness(&m, &r, 30.0, 0.0, (5.0, 25.0), 10, 400, 1, SimOptions::default()).unwrap();
        assert!(occ.max_rel_deviation < 0.1, "{occ:?}");
    }

    #[test]
    fn proxy_is_shift_invariant() {
        let m = LevyModel::brownian(-1.0, 1.0).unwrap();
        let r = parse_rate("max(1,x)^2").unwrap();
        let opts = SimOptions { dt: 0.05, max_steps: 1_000_000 };
        let ks = proxy_shift_invariance(&m, &r, 1e3, 1.0, 0.05, 500, 4, opts).unwrap();
        assert!(!ks.rejects(0.01), "{ks:?}");
    }
}

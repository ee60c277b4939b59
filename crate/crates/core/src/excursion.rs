//! Excursions away from `+∞`: jump-in and continuous-entrance samplers,
//! occupation and scaling checks, Poisson gluing into the recurrent
//! extension, and the Cramér limit of `e^{θx} P_x(T_y < ζ)`.
//!
//! Normalising constants of the excursion measure are set to one; every
//! check is a ratio or a normalised shape.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::classifier::{classify_boundary, Verdict};
use crate::error::{Error, Result};
use crate::fluctuation::{cramer_theta, esscher_tilt};
use crate::levy::{IncrementSampler, LevyModel};
use crate::quad;
use crate::rate::RateFunction;
use crate::rng::{self, Phase};
use crate::stats::{self, KsResult};
use crate::time_change::{tail_check_level, Path, PathStatus, EXPLOSION_RTOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum EntryMode {
    JumpIn { x_entry: f64 },
    Continuous,
}

/// One excursion; the path ends at `+∞` at time `lifetime`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcursionSample {
    pub path: Path,
    pub entry_mode: EntryMode,
    pub lifetime: f64,
    /// Running minimum, including the exact bridge minima between nodes.
    pub min_level: f64,
    /// Mass of the conditioning event this sample stands for.
    pub weight: f64,
    /// Index of the conditioning level when sampled by strata.
    pub stratum: usize,
}

impl ExcursionSample {
    pub fn check_invariants(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        let p = &self.path;
        let (first, last) = match (p.values.first(), p.values.last()) {
            (Some(f), Some(l)) => (*f, *l),
            _ => return bad("empty excursion"),
        };
        if last != f64::INFINITY || !matches!(p.status, PathStatus::Exploded { .. }) {
            return bad("excursion must end at +inf");
        }
        match self.entry_mode {
            EntryMode::Continuous if first != f64::INFINITY => return bad("continuous entry must start at +inf"),
            EntryMode::JumpIn { x_entry } if first != x_entry => return bad("jump-in path must start at the entry"),
            _ => {}
        }
        let inner = &p.values[1..p.values.len() - 1];
        if inner.iter().any(|v| !v.is_finite()) {
            return bad("interior values must be finite");
        }
        if !(self.min_level <= p.min_value()) {
            return bad("min_level exceeds the path minimum");
        }
        Ok(())
    }

    /// Time spent in each of `bins` equal bins of `[lo, hi)`.
    pub fn occupation(&self, lo: f64, hi: f64, bins: usize) -> Vec<f64> {
        let h = (hi - lo) / bins as f64;
        let mut out = vec![0.0; bins];
        let p = &self.path;
        for k in 0..p.len().saturating_sub(1) {
            let v = p.values[k];
            if v >= lo && v < hi {
                out[(((v - lo) / h) as usize).min(bins - 1)] += p.times[k + 1] - p.times[k];
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExcursionOptions {
    pub dt: f64,
    /// Step cap per excursion phase.
    pub max_steps: usize,
}

impl Default for ExcursionOptions {
    fn default() -> Self {
        ExcursionOptions { dt: 0.01, max_steps: 2_000_000 }
    }
}

/// Runs `x` under the sampler until the tail test declares explosion, appending nodes.
/// Returns the explosion time.
#[allow(clippy::too_many_arguments)]
fn run_to_explosion<R: Rng + ?Sized>(
    sampler: &IncrementSampler,
    model_mean: f64,
    rate: &RateFunction,
    mut x: f64,
    mut clock: f64,
    times: &mut Vec<f64>,
    values: &mut Vec<f64>,
    max_steps: usize,
    running_min: &mut f64,
    rng: &mut R,
) -> Option<f64> {
    let dt = sampler.dt();
    let (x_start, clock_start) = (x, clock);
    let mut next_check = x_start + 1.0;
    for k in 1..=max_steps {
        let step = sampler.step(x, rng);
        clock += dt / rate.eval(x);
        x = step.end;
        *running_min = running_min.min(step.continuous_min).min(x);
        times.push(clock);
        values.push(x);
        if x >= next_check {
            next_check = tail_check_level(x);
            let speed = if model_mean.is_finite() { model_mean } else { (x - x_start) / (k as f64 * dt) };
            if speed > 0.0 && x > x_start {
                if let Ok(phi) = rate.phi(x) {
                    let rem = phi / speed;
                    if rem.is_finite() && rem <= EXPLOSION_RTOL * (clock - clock_start) {
                        return Some(clock + rem);
                    }
                }
            }
        }
    }
    None
}

fn finish(times: Vec<f64>, mut values: Vec<f64>, zeta: f64, dt: f64, running_min: f64) -> (Path, f64) {
    let mut times = times;
    let mut zeta = zeta;
    if zeta <= *times.last().unwrap() {
        zeta = times.last().unwrap() * (1.0 + f64::EPSILON) + f64::MIN_POSITIVE;
    }
    times.push(zeta);
    values.push(f64::INFINITY);
    let min = values.iter().fold(running_min, |m, v| m.min(*v));
    (Path { times, values, status: PathStatus::Exploded { zeta }, dt_base: dt }, min)
}

fn require_jump_in(model: &LevyModel, rate: &RateFunction, theta: f64) -> Result<()> {
    match classify_boundary(model, rate).verdict {
        Verdict::RegularJumpIn { theta_set } if theta_set.contains(theta) && model.laplace_mgf(theta) < 1.0 => Ok(()),
        _ => Err(Error::NotJumpIn(theta)),
    }
}

/// One jump-in excursion entering at `x_entry`.
fn jump_in_one<R: Rng + ?Sized>(
    sampler: &IncrementSampler,
    model_mean: f64,
    rate: &RateFunction,
    x_entry: f64,
    weight: f64,
    opts: ExcursionOptions,
    rng: &mut R,
) -> Result<ExcursionSample> {
    let (mut times, mut values) = (vec![0.0], vec![x_entry]);
    let mut low = x_entry;
    let zeta =
        run_to_explosion(sampler, model_mean, rate, x_entry, 0.0, &mut times, &mut values, opts.max_steps, &mut low, rng)
            .ok_or(Error::NotExploded)?;
    let (path, min_level) = finish(times, values, zeta, sampler.dt(), low);
    Ok(ExcursionSample { path, entry_mode: EntryMode::JumpIn { x_entry }, lifetime: zeta, min_level, weight, stratum: 0 })
}

/// Entry point with density `θ e^{θ(x - M)}` on `(-∞, M]`.
fn sample_entry<R: Rng + ?Sized>(theta: f64, window: f64, rng: &mut R) -> f64 {
    let e: f64 = rng.sample(Exp1);
    window - e / theta
}

/// Excursions entering by a jump from `+∞`, entry law `e^{θx} dx` truncated to `(-∞, M]`.
pub fn sample_excursion_jump_in(
    model: &LevyModel,
    rate: &RateFunction,
    theta: f64,
    window: f64,
    n: usize,
    seed: u64,
    opts: ExcursionOptions,
) -> Result<Vec<ExcursionSample>> {
    require_jump_in(model, rate, theta)?;
    let sampler = IncrementSampler::new(model, opts.dt)?;
    let mean = model.mean();
    let weight = (theta * window).exp() / theta;
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i, Phase::Entry);
            let x = sample_entry(theta, window, &mut rng);
            let mut rng = rng::stream(seed, i, Phase::Path);
            jump_in_one(&sampler, mean, rate, x, weight, opts, &mut rng)
        })
        .collect()
}

/// Tilted and untilted samplers for the continuous-entrance regime.
struct Continuous<'a> {
    tilted: IncrementSampler,
    untilted: IncrementSampler,
    mean: f64,
    rate: &'a RateFunction,
    theta: f64,
    x_proxy: f64,
    offset: f64,
}

impl<'a> Continuous<'a> {
    fn new(model: &LevyModel, rate: &'a RateFunction, theta: f64, x_proxy: f64, dt: f64) -> Result<Self> {
        let tilted_model = esscher_tilt(model, theta)?;
        if !(theta < model.mgf_domain_sup()) {
            return Err(Error::Unsupported(format!("E[|ξ_1| e^(-θξ_1)] is not finite at θ = {theta}")));
        }
        let gamma = -tilted_model.mean();
        if !(gamma > 0.0) {
            return Err(Error::NotCramer { theta, mgf: model.laplace_mgf(theta) });
        }
        let offset = rate.phi(x_proxy)? / gamma;
        Ok(Continuous {
            tilted: IncrementSampler::new(&tilted_model, dt)?,
            untilted: IncrementSampler::new(model, dt)?,
            mean: model.mean(),
            rate,
            theta,
            x_proxy,
            offset,
        })
    }

    /// Phase 1 under the tilted law from the proxy down to `y`, phase 2 untilted to explosion.
    fn one<R: Rng + ?Sized>(&self, y: f64, max_steps: usize, rng: &mut R) -> Result<ExcursionSample> {
        let dt = self.tilted.dt();
        let mut times = vec![0.0, self.offset.max(f64::MIN_POSITIVE)];
        let mut values = vec![f64::INFINITY, self.x_proxy];
        let mut x = self.x_proxy;
        let mut clock = times[1];
        let mut crossed = false;
        for _ in 0..max_steps {
            let step = self.tilted.step(x, rng);
            clock += dt / self.rate.eval(x);
            x = if step.continuous_min < y { y } else { step.end };
            times.push(clock);
            values.push(x);
            if x <= y {
                crossed = true;
                break;
            }
        }
        if !crossed {
            return Err(Error::CensoredMajority { censored: 1, total: 1 });
        }
        let mut low = x;
        let zeta = run_to_explosion(
            &self.untilted,
            self.mean,
            self.rate,
            x,
            clock,
            &mut times,
            &mut values,
            max_steps,
            &mut low,
            rng,
        )
        .ok_or(Error::NoExplosionPhase2(1))?;
        let (path, min_level) = finish(times, values, zeta, dt, low);
        Ok(ExcursionSample {
            path,
            entry_mode: EntryMode::Continuous,
            lifetime: zeta,
            min_level,
            weight: (self.theta * y).exp(),
            stratum: 0,
        })
    }
}

fn collect_phase2(results: Vec<Result<ExcursionSample>>) -> Result<Vec<ExcursionSample>> {
    let failed = results.iter().filter(|r| matches!(r, Err(Error::NoExplosionPhase2(_)))).count();
    if failed > 0 {
        return Err(Error::NoExplosionPhase2(failed));
    }
    results.into_iter().collect()
}

/// Excursions leaving `+∞` continuously, conditioned on reaching below `y`.
#[allow(clippy::too_many_arguments)]
pub fn sample_excursion_continuous(
    model: &LevyModel,
    rate: &RateFunction,
    theta: f64,
    y: f64,
    x_proxy: f64,
    n: usize,
    seed: u64,
    opts: ExcursionOptions,
) -> Result<Vec<ExcursionSample>> {
    if !(x_proxy > y) {
        return Err(Error::InvalidArgument(format!("proxy start {x_proxy} must lie above y = {y}")));
    }
    let c = Continuous::new(model, rate, theta, x_proxy, opts.dt)?;
    let results: Vec<Result<ExcursionSample>> = (0..n as u64)
        .into_par_iter()
        .map(|i| c.one(y, opts.max_steps, &mut rng::stream(seed, i, Phase::Tilted)))
        .collect();
    collect_phase2(results)
}

/// Samples by strata of the minimum: stratum `k` is conditioned on `T_{y_k} < ∞`
/// and keeps weight only when the minimum falls in `[y_{k+1}, y_k)`.
#[allow(clippy::too_many_arguments)]
pub fn sample_excursion_stratified(
    model: &LevyModel,
    rate: &RateFunction,
    theta: f64,
    levels: &[f64],
    x_proxy: f64,
    n_per: usize,
    seed: u64,
    opts: ExcursionOptions,
) -> Result<Vec<ExcursionSample>> {
    if levels.is_empty() || levels.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::InvalidArgument("levels must be strictly decreasing".into()));
    }
    let mut out = Vec::with_capacity(levels.len() * n_per);
    for (k, &y) in levels.iter().enumerate() {
        let batch = sample_excursion_continuous(model, rate, theta, y, x_proxy, n_per, rng::derive_seed(seed, k as u64), opts)?;
        let floor = levels.get(k + 1).copied().unwrap_or(f64::NEG_INFINITY);
        out.extend(batch.into_iter().map(|mut e| {
            if e.min_level < floor {
                e.weight = 0.0;
            }
            e.stratum = k;
            e
        }));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupationReport {
    pub bin_edges: Vec<f64>,
    /// Normalised weighted occupation per bin.
    pub observed: Vec<f64>,
    /// Normalised `∫_bin e^{θy}/R(y) dy`.
    pub expected: Vec<f64>,
    pub stderr: Vec<f64>,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Largest gap of the binned cumulative shapes.
    pub ks_statistic: f64,
    pub visits_min: usize,
    pub pass: bool,
}

/// Visits per bin below which the occupation check refuses to run.
pub const MIN_VISITS_PER_BIN: usize = 30;

/// Weighted time-in-bin histogram against the density `e^{θy}/R(y)` on `[a, M]`.
pub fn occupation_check(
    excursions: &[ExcursionSample],
    rate: &RateFunction,
    theta: f64,
    (a, m): (f64, f64),
    bins: usize,
) -> Result<OccupationReport> {
    if !(a < m) || bins < 2 {
        return Err(Error::InvalidArgument("need a < M and at least two bins".into()));
    }
    let strata = excursions.iter().map(|e| e.stratum).max().map_or(0, |s| s + 1);
    let mut est = DVector::<f64>::zeros(bins);
    let mut cov = DMatrix::<f64>::zeros(bins, bins);
    let mut visits = vec![0usize; bins];
    for s in 0..strata {
        let rows: Vec<DVector<f64>> = excursions
            .iter()
            .filter(|e| e.stratum == s)
            .map(|e| DVector::from_vec(e.occupation(a, m, bins)) * e.weight)
            .collect();
        let n = rows.len();
        if n < 2 {
            continue;
        }
        for r in &rows {
            for (j, v) in r.iter().enumerate() {
                visits[j] += (*v > 0.0) as usize;
            }
        }
        let mean = rows.iter().fold(DVector::zeros(bins), |acc, r| acc + r) / n as f64;
        let mut c = DMatrix::<f64>::zeros(bins, bins);
        for r in &rows {
            let d = r - &mean;
            c += &d * d.transpose();
        }
        est += &mean;
        cov += c / ((n - 1) as f64 * n as f64);
    }
    let visits_min = *visits.iter().min().unwrap();
    if visits_min < MIN_VISITS_PER_BIN {
        return Err(Error::InsufficientMass(format!(
            "{visits_min} excursions visit the sparsest bin, need {MIN_VISITS_PER_BIN}"
        )));
    }
    let h = (m - a) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| a + k as f64 * h).collect();
    let density = |y: f64| (theta * y).exp() / rate.eval(y);
    let p = DVector::from_iterator(
        bins,
        edges.windows(2).map(|w| quad::integrate(density, w[0], w[1], 0.0, 1e-12, 400).value),
    );
    // generalised least squares for the unknown scale c in est ≈ c p
    let inv = cov.clone().pseudo_inverse(1e-300).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let scale = (p.transpose() * &inv * &est)[0] / (p.transpose() * &inv * &p)[0];
    let resid = &est - &p * scale;
    let chi_square = (resid.transpose() * &inv * &resid)[0];
    let dof = bins - 1;
    let p_value = ChiSquared::new(dof as f64).map(|d| 1.0 - d.cdf(chi_square)).unwrap_or(f64::NAN);
    let total: f64 = est.sum();
    let ptotal: f64 = p.sum();
    let observed: Vec<f64> = est.iter().map(|v| v / total).collect();
    let expected: Vec<f64> = p.iter().map(|v| v / ptotal).collect();
    let stderr: Vec<f64> = (0..bins).map(|j| cov[(j, j)].sqrt() / total).collect();
    let (mut co, mut ce, mut ks) = (0.0, 0.0, 0.0f64);
    for j in 0..bins {
        co += observed[j];
        ce += expected[j];
        ks = ks.max((co - ce).abs());
    }
    Ok(OccupationReport {
        bin_edges: edges,
        observed,
        expected,
        stderr,
        chi_square,
        dof,
        p_value,
        ks_statistic: ks,
        visits_min,
        pass: p_value > 0.01,
    })
}

/// Lifetime, minimum and value at `t` of `Φ_z(e)`.
pub fn transformed_functionals(e: &ExcursionSample, rate: &RateFunction, z: f64, t: f64) -> (f64, f64, f64) {
    let p = &e.path;
    let mut clock = 0.0;
    let mut at = f64::INFINITY;
    for k in 0..p.len() - 1 {
        let next = clock + (p.times[k + 1] - p.times[k]) * rate.ratio(z, p.values[k]);
        if clock <= t && t < next {
            at = z + p.values[k];
        }
        clock = next;
    }
    (clock, z + e.min_level, at)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub z: f64,
    pub t_probe: f64,
    pub ks_lifetime: KsResult,
    pub ks_min: KsResult,
    pub ks_marginal: KsResult,
    /// Mean weight of the `(y+z)` sample over that of the `y` sample.
    pub mass_ratio: f64,
    /// Fraction of `(y+z)`-conditioned excursions reaching below `y`.
    pub reach_fraction: f64,
    pub reach_stderr: f64,
    /// `e^{-θz}`.
    pub reach_expected: f64,
}

impl ScalingReport {
    pub fn pass(&self, alpha: f64) -> bool {
        !self.ks_lifetime.rejects(alpha)
            && !self.ks_min.rejects(alpha)
            && !self.ks_marginal.rejects(alpha)
            && (self.reach_fraction - self.reach_expected).abs() <= 3.0 * self.reach_stderr.max(1e-12)
    }
}

/// Compares `Φ_z` of the `y`-conditioned sample with the `(y+z)`-conditioned sample.
pub fn excursion_scaling_check(
    at_y: &[ExcursionSample],
    at_yz: &[ExcursionSample],
    rate: &RateFunction,
    theta: f64,
    y: f64,
    z: f64,
    t_probe: f64,
) -> Result<ScalingReport> {
    let mut a = (Vec::new(), Vec::new(), Vec::new());
    for e in at_y {
        let (l, m, v) = transformed_functionals(e, rate, z, t_probe);
        a.0.push(l);
        a.1.push(m);
        a.2.push(v);
    }
    let b_life: Vec<f64> = at_yz.iter().map(|e| e.lifetime).collect();
    let b_min: Vec<f64> = at_yz.iter().map(|e| e.min_level).collect();
    let b_at: Vec<f64> = at_yz.iter().map(|e| e.path.at(t_probe)).collect();
    let mean_w = |s: &[ExcursionSample]| s.iter().map(|e| e.weight).sum::<f64>() / s.len() as f64;
    let hits = at_yz.iter().filter(|e| e.min_level < y).count() as f64;
    let n = at_yz.len() as f64;
    let frac = hits / n;
    let expected = (-theta * z).exp();
    Ok(ScalingReport {
        z,
        t_probe,
        ks_lifetime: stats::ks_two_sample(&a.0, &b_life)?,
        ks_min: stats::ks_two_sample(&a.1, &b_min)?,
        ks_marginal: stats::ks_two_sample(&a.2, &b_at)?,
        mass_ratio: mean_w(at_yz) / mean_w(at_y),
        reach_fraction: frac,
        reach_stderr: (expected * (1.0 - expected) / n).sqrt(),
        reach_expected: expected,
    })
}

/// How excursions leave `+∞` in the glued extension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Regime {
    /// Continuous entrance at the Cramér root, phase 1 started from `x_proxy`.
    Continuous { x_proxy: f64 },
    /// Jump-in entrance; entries are drawn on `(-∞, a_threshold + window]`.
    JumpIn { window: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GlueOptions {
    pub excursion: ExcursionOptions,
    /// Optional start point; a `P_x` segment is prepended until its explosion.
    pub start: Option<f64>,
    /// Largest admissible neglected-time fraction.
    pub budget: f64,
    /// Atoms sampled per parallel batch.
    pub batch: usize,
}

impl Default for GlueOptions {
    fn default() -> Self {
        GlueOptions { excursion: ExcursionOptions::default(), start: None, budget: 0.05, batch: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GluedAtom {
    pub id: i64,
    /// Local time at +∞ of the arrival.
    pub local_time: f64,
    pub start: f64,
    pub end: f64,
    pub min_level: f64,
}

/// One realisation of the glued extension; `ids[k]` tags node `k` with its excursion
/// (0 for the initial segment). Between excursions the path sits at `+∞` for zero time,
/// so consecutive nodes may share a time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GluedPath {
    pub path: Path,
    pub ids: Vec<i64>,
    pub atoms: Vec<GluedAtom>,
    pub local_time: f64,
}

impl GluedPath {
    pub fn write_csv<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        let status = self.path.status.label();
        for ((t, v), id) in self.path.times.iter().zip(&self.path.values).zip(&self.ids) {
            let value = if v.is_infinite() { "inf".to_string() } else { v.to_string() };
            w.write_record([t.to_string(), value, status.to_string(), id.to_string()])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelCount {
    pub level: f64,
    pub count: usize,
    /// Count over the count at the previous (higher) level.
    pub ratio: f64,
    pub expected_ratio: f64,
    pub stderr: f64,
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlueReport {
    pub theta: f64,
    pub a_threshold: f64,
    pub intensity: f64,
    pub realizations: Vec<GluedPath>,
    pub counts: Vec<LevelCount>,
    /// `∫_a^∞ e^{θy}/R(y) dy`, the neglected duration per unit local time.
    pub neglect_bound: f64,
    pub neglect_fraction: f64,
    pub total_time: f64,
    pub total_local_time: f64,
}

impl GlueReport {
    pub fn counts_pass(&self) -> bool {
        self.counts.iter().skip(1).all(|c| c.z_score.abs() <= 2.0)
    }
}

/// Glues excursions reaching below `a_threshold`, arriving at rate `e^{θ a_threshold}`
/// in local time, into `n_real` realisations of the recurrent extension on `[0, horizon]`.
#[allow(clippy::too_many_arguments)]
pub fn glue_recurrent_extension(
    model: &LevyModel,
    rate: &RateFunction,
    theta: f64,
    regime: Regime,
    a_threshold: f64,
    horizon: f64,
    n_real: usize,
    seed: u64,
    opts: GlueOptions,
) -> Result<GlueReport> {
    let density = |y: f64| (theta * y).exp() / rate.eval(y);
    let tail = rate.class_pos().map(|c| crate::rate::TailClass { rate: theta, ..crate::rate::TailClass::constant(1.0) }.mul(&c.recip()));
    let neglect_bound = crate::rate::integrate_over_tail(density, a_threshold, tail, "e^(θy)/R")?;
    if !neglect_bound.is_finite() {
        return Err(Error::ThresholdTooHigh { bound: neglect_bound, budget: opts.budget });
    }
    let intensity = (theta * a_threshold).exp();
    let eo = opts.excursion;
    let continuous = match regime {
        Regime::Continuous { x_proxy } => Some(Continuous::new(model, rate, theta, x_proxy, eo.dt)?),
        Regime::JumpIn { .. } => {
            require_jump_in(model, rate, theta)?;
            None
        }
    };
    let untilted = IncrementSampler::new(model, eo.dt)?;
    let mean = model.mean();
    let atom = |r: u64, i: u64| -> Result<ExcursionSample> {
        let s = rng::derive_seed(seed, r);
        match (&continuous, regime) {
            (Some(c), _) => c.one(a_threshold, eo.max_steps, &mut rng::stream(s, i, Phase::Tilted)),
            (None, Regime::JumpIn { window }) => {
                let mut entry = rng::stream(s, i, Phase::Entry);
                let mut path = rng::stream(s, i, Phase::Path);
                loop {
                    let x = sample_entry(theta, a_threshold + window, &mut entry);
                    let e = jump_in_one(&untilted, mean, rate, x, 1.0, eo, &mut path)?;
                    if e.min_level < a_threshold {
                        return Ok(e);
                    }
                }
            }
            _ => unreachable!(),
        }
    };
    let mut realizations = Vec::with_capacity(n_real);
    for r in 0..n_real as u64 {
        let mut arrivals = rng::stream(rng::derive_seed(seed, r), 0, Phase::Arrival);
        let (mut times, mut values, mut ids) = (Vec::new(), Vec::new(), Vec::new());
        let mut atoms = Vec::new();
        let mut sigma = 0.0;
        if let Some(x0) = opts.start {
            let mut rng = rng::stream(rng::derive_seed(seed, r), 0, Phase::Path);
            let e = jump_in_one(&untilted, mean, rate, x0, 1.0, eo, &mut rng)?;
            append(&mut times, &mut values, &mut ids, &e.path, 0.0, 0);
            sigma = e.lifetime;
        }
        let mut local = 0.0;
        let mut next_id = 1u64;
        'outer: while sigma < horizon {
            let ids_batch: Vec<u64> = (next_id..next_id + opts.batch as u64).collect();
            let batch: Vec<Result<ExcursionSample>> = ids_batch.par_iter().map(|&i| atom(r, i)).collect();
            let batch = collect_phase2(batch)?;
            for (e, id) in batch.into_iter().zip(ids_batch) {
                let gap: f64 = arrivals.sample(Exp1);
                local += gap / intensity;
                atoms.push(GluedAtom {
                    id: id as i64,
                    local_time: local,
                    start: sigma,
                    end: sigma + e.lifetime,
                    min_level: e.min_level,
                });
                append(&mut times, &mut values, &mut ids, &e.path, sigma, id as i64);
                sigma += e.lifetime;
                if sigma >= horizon {
                    break 'outer;
                }
            }
            next_id += opts.batch as u64;
        }
        let keep = times.partition_point(|t| *t <= horizon);
        times.truncate(keep);
        values.truncate(keep);
        ids.truncate(keep);
        let path = Path { times, values, status: PathStatus::Censored { horizon }, dt_base: eo.dt };
        realizations.push(GluedPath { path, ids, atoms, local_time: local });
    }
    let total_time: f64 = realizations.iter().map(|g| g.atoms.last().map_or(0.0, |a| a.end)).sum();
    let total_local_time: f64 = realizations.iter().map(|g| g.local_time).sum();
    let neglect_fraction = neglect_bound * total_local_time / total_time;
    if !(neglect_fraction < opts.budget) {
        return Err(Error::ThresholdTooHigh { bound: neglect_fraction, budget: opts.budget });
    }
    let levels = [a_threshold, a_threshold - 1.0, a_threshold - 2.0];
    let mut counts = Vec::new();
    for (k, &level) in levels.iter().enumerate() {
        let count = realizations.iter().flat_map(|g| &g.atoms).filter(|a| a.min_level <= level).count();
        let (ratio, expected_ratio, stderr) = match counts.last() {
            Some(LevelCount { count: prev, .. }) if k > 0 => {
                let p = (-theta).exp();
                let prev = *prev as f64;
                (count as f64 / prev, p, (p * (1.0 - p) / prev).sqrt())
            }
            _ => (1.0, 1.0, 0.0),
        };
        let z_score = if stderr > 0.0 { (ratio - expected_ratio) / stderr } else { 0.0 };
        counts.push(LevelCount { level, count, ratio, expected_ratio, stderr, z_score });
    }
    Ok(GlueReport {
        theta,
        a_threshold,
        intensity,
        realizations,
        counts,
        neglect_bound,
        neglect_fraction,
        total_time,
        total_local_time,
    })
}

fn append(times: &mut Vec<f64>, values: &mut Vec<f64>, ids: &mut Vec<i64>, p: &Path, shift: f64, id: i64) {
    for (t, v) in p.times.iter().zip(&p.values) {
        times.push(shift + t);
        values.push(*v);
        ids.push(id);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CramerRow {
    pub x: f64,
    pub p_hat: f64,
    pub stderr: f64,
    /// `e^{θx} p_hat`.
    pub scaled: f64,
    pub scaled_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CramerLimitReport {
    pub theta: f64,
    pub y: f64,
    /// `c(θ)` when it is known in closed form (Brownian models: 1).
    pub c_theta: Option<f64>,
    /// `e^{θy}/c(θ)` when `c(θ)` is known.
    pub limit: Option<f64>,
    pub rows: Vec<CramerRow>,
}

impl CramerLimitReport {
    /// Rows within `k` standard errors of the known limit.
    pub fn within(&self, k: f64) -> Option<bool> {
        self.limit.map(|l| self.rows.iter().all(|r| (r.scaled - l).abs() <= k * r.scaled_stderr))
    }
}

/// Return probability below which a path far above `y` is counted as escaped.
const ESCAPE_PROB: f64 = 1e-9;

/// Monte Carlo `P_x(T_y < ζ)` scaled by `e^{θx}` over a grid of start points.
#[allow(clippy::too_many_arguments)]
pub fn cramer_limit_check(
    model: &LevyModel,
    theta: f64,
    y: f64,
    x_grid: &[f64],
    n: usize,
    seed: u64,
    dt: f64,
    max_steps: usize,
) -> Result<CramerLimitReport> {
    let c = cramer_theta(model);
    match c.root {
        Some(root) if (root - theta).abs() <= 1e-6 * root.max(1.0) => {}
        _ => return Err(Error::NotCramer { theta, mgf: model.laplace_mgf(theta) }),
    }
    if !(theta < model.mgf_domain_sup()) {
        return Err(Error::Unsupported(format!("E[|ξ_1| e^(-θξ_1)] is not finite at θ = {theta}")));
    }
    // the time change does not move hitting events, so ξ is simulated directly
    let sampler = IncrementSampler::new(model, dt)?;
    let escape = y - ESCAPE_PROB.ln() / theta;
    let mut rows = Vec::new();
    for (gi, &x) in x_grid.iter().enumerate() {
        let outcomes: Vec<Option<bool>> = (0..n as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng::stream(rng::derive_seed(seed, gi as u64), i, Phase::Path);
                let mut v = x;
                for _ in 0..max_steps {
                    let s = sampler.step(v, &mut rng);
                    if s.continuous_min < y || s.end < y {
                        return Some(true);
                    }
                    v = s.end;
                    if v > escape.max(x + 1.0) {
                        return Some(false);
                    }
                }
                None
            })
            .collect();
        let decided: Vec<f64> = outcomes.iter().flatten().map(|h| *h as u8 as f64).collect();
        if decided.len() * 2 < n {
            return Err(Error::CensoredMajority { censored: n - decided.len(), total: n });
        }
        let m = decided.len() as f64;
        let p_hat = decided.iter().sum::<f64>() / m;
        let stderr = (p_hat * (1.0 - p_hat) / m).sqrt();
        let f = (theta * x).exp();
        rows.push(CramerRow { x, p_hat, stderr, scaled: f * p_hat, scaled_stderr: f * stderr });
    }
    let c_theta = (model.jump_part().is_none() && model.stable_params().is_none()).then_some(1.0);
    Ok(CramerLimitReport { theta, y, c_theta, limit: c_theta.map(|c| (theta * y).exp() / c), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::parse_rate;

    fn bessel(lambda: f64) -> LevyModel {
        LevyModel::brownian(lambda, 4.0).unwrap()
    }

    #[test]
    fn jump_in_entries_and_explosion() {
        let m = LevyModel::stable(0.8, 1.0).unwrap();
        let r = parse_rate("exp(2*x)").unwrap();
        let opts = ExcursionOptions { dt: 0.01, max_steps: 200_000 };
        let ex = sample_excursion_jump_in(&m, &r, 1.0, 0.0, 400, 1, opts).unwrap();
        assert!(ex.iter().all(|e| e.check_invariants().is_ok()));
        let entries: Vec<f64> = ex
            .iter()
            .map(|e| match e.entry_mode {
                EntryMode::JumpIn { x_entry } => x_entry,
                _ => unreachable!(),
            })
            .collect();
        let ks = stats::ks_one_sample(&entries, |x| x.min(0.0).exp()).unwrap();
        assert!(!ks.rejects(0.01));
        // upward-only paths: the minimum is the entry, so P(min < a) = e^{a}
        for a in [-1.0f64, -2.0] {
            let f = ex.iter().filter(|e| e.min_level < a).count() as f64 / 400.0;
            assert!((f - a.exp()).abs() < 4.0 * (a.exp() * (1.0 - a.exp()) / 400.0).sqrt(), "{a} {f}");
        }
        assert!(matches!(
            sample_excursion_jump_in(&bessel(1.0), &parse_rate("exp(x)").unwrap(), 0.5, 0.0, 5, 1, opts),
            Err(Error::NotJumpIn(_))
        ));
    }

    #[test]
    fn continuous_phases() {
        let r = parse_rate("exp(x)").unwrap();
        let ex = sample_excursion_continuous(&bessel(1.0), &r, 0.5, 0.0, 15.0, 200, 2, ExcursionOptions::default()).unwrap();
        for e in &ex {
            e.check_invariants().unwrap();
            assert!(e.min_level <= 0.0);
            assert_eq!(e.weight, 1.0);
        }
        let ex1 = sample_excursion_continuous(&bessel(1.0), &r, 0.5, 1.0, 15.0, 5, 2, ExcursionOptions::default()).unwrap();
        assert!((ex1[0].weight / ex[0].weight - 0.5f64.exp()).abs() < 1e-12);
        assert!(matches!(
            sample_excursion_continuous(&bessel(1.0), &r, 0.4, 0.0, 15.0, 5, 2, ExcursionOptions::default()),
            Err(Error::NotCramer { .. })
        ));
    }

    #[test]
    fn occupation_law_continuous() {
        let r = parse_rate("exp(x)").unwrap();
        let levels: Vec<f64> = (0..7).map(|k| 4.0 - k as f64).collect();
        let ex = sample_excursion_stratified(&bessel(1.0), &r, 0.5, &levels, 15.0, 60, 3, ExcursionOptions::default()).unwrap();
        let rep = occupation_check(&ex, &r, 0.5, (-2.0, 4.0), 6).unwrap();
        assert!(rep.pass, "{rep:?}");
        // doubling R leaves the normalised shape unchanged
        let r2 = parse_rate("2*exp(x)").unwrap();
        let rep2 = occupation_check(&ex, &r2, 0.5, (-2.0, 4.0), 6).unwrap();
        for (a, b) in rep.expected.iter().zip(&rep2.expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn occupation_needs_mass() {
        let r = parse_rate("exp(x)").unwrap();
        let ex = sample_excursion_continuous(&bessel(1.0), &r, 0.5, 0.0, 15.0, 20, 2, ExcursionOptions::default()).unwrap();
        assert!(matches!(occupation_check(&ex, &r, 0.5, (-2.0, 4.0), 6), Err(Error::InsufficientMass(_))));
    }

    #[test]
    fn scaling_of_excursions() {
        let r = parse_rate("exp(x)").unwrap();
        let opts = ExcursionOptions::default();
        let a = sample_excursion_continuous(&bessel(1.0), &r, 0.5, 0.0, 20.0, 400, 4, opts).unwrap();
        let b = sample_excursion_continuous(&bessel(1.0), &r, 0.5, 1.0, 20.0, 400, 5, opts).unwrap();
        let rep = excursion_scaling_check(&a, &b, &r, 0.5, 0.0, 1.0, 0.5).unwrap();
        assert!(rep.pass(0.01), "{rep:?}");
        assert!((rep.mass_ratio - 0.5f64.exp()).abs() < 1e-12);
        let same = excursion_scaling_check(&a, &a, &r, 0.5, 0.0, 0.0, 0.5).unwrap();
        assert_eq!(same.ks_lifetime.statistic, 0.0);
        assert_eq!(same.ks_min.statistic, 0.0);
    }

    #[test]
    fn glued_counts() {
        let r = parse_rate("exp(x)").unwrap();
        let opts = GlueOptions { start: Some(1.0), ..GlueOptions::default() };
        let rep = glue_recurrent_extension(&bessel(1.0), &r, 0.5, Regime::Continuous { x_proxy: 15.0 }, 2.0, 400.0, 4, 6, opts)
            .unwrap();
        assert!(rep.neglect_fraction < 0.05);
        for g in &rep.realizations {
            assert!(g.atoms.iter().all(|a| a.min_level <= 2.0));
            assert!(g.path.values.iter().any(|v| v.is_infinite()));
            assert_eq!(g.ids[0], 0);
        }
        assert!(rep.counts[0].count >= 100, "{:?}", rep.counts);
        assert!(rep.counts_pass(), "{:?}", rep.counts);
    }

    #[test]
    fn threshold_too_high() {
        let r = parse_rate("exp(x)").unwrap();
        let e = glue_recurrent_extension(&bessel(1.0), &r, 0.5, Regime::Continuous { x_proxy: 15.0 }, -6.0, 5.0, 1, 6, GlueOptions::default());
        assert!(matches!(e, Err(Error::ThresholdTooHigh { .. })), "{e:?}");
    }

    #[test]
    fn brownian_cramer_limit_is_one() {
        let rep = cramer_limit_check(&bessel(1.0), 0.5, 0.0, &[2.0, 4.0], 20_000, 7, 0.5, 100_000).unwrap();
        assert_eq!(rep.c_theta, Some(1.0));
        assert_eq!(rep.within(3.0), Some(true), "{:?}", rep.rows);
        assert!(matches!(
            cramer_limit_check(&bessel(1.0), 0.3, 0.0, &[2.0], 10, 7, 0.5, 100),
            Err(Error::NotCramer { .. })
        ));
    }
}

//! The time change `X_t = x + ξ_{η(t)}`, the shift-and-reclock transform
//! `Φ_z`, and explosion detection on grid paths.
//!
//! Grid paths are step functions: the value at node `k` holds on
//! `[t_k, t_{k+1})`, and additive functionals use that left value.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::levy::{IncrementSampler, LevyModel, Step};
use crate::num::Scalar;
use crate::rate::RateFunction;
use crate::rng::{self, Phase, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum PathStatus<T> {
    Alive,
    Exploded { zeta: T },
    Censored { horizon: T },
}

impl<T: Scalar> PathStatus<T> {
    pub fn label(&self) -> &'static str {
        match self {
            PathStatus::Alive => "alive",
            PathStatus::Exploded { .. } => "exploded",
            PathStatus::Censored { .. } => "censored",
        }
    }
}

/// A discretised càdlàg path; `+∞` marks the cemetery after explosion.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Serialize")]
pub struct Path<T = f64> {
    pub times: Vec<T>,
    pub values: Vec<T>,
    pub status: PathStatus<T>,
    pub dt_base: T,
}

impl<T: Scalar> Path<T> {
    /// A Lévy path `ξ_0 = 0, ξ_dt, …` on the uniform grid.
    pub fn levy(values: Vec<T>, dt: T) -> Self {
        let times = (0..values.len()).map(|k| T::lit(k as f64) * dt).collect();
        Path { times, values, status: PathStatus::Alive, dt_base: dt }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the first `+∞` value, if any.
    pub fn explosion_index(&self) -> Option<usize> {
        self.values.iter().position(|v| *v == T::infinity())
    }

    /// Step-function value at time `t` (left node), `+∞` past explosion.
    pub fn at(&self, t: T) -> T {
        let k = self.times.partition_point(|s| *s <= t);
        if k == 0 {
            return self.values[0];
        }
        if let PathStatus::Exploded { zeta } = self.status {
            if t >= zeta {
                return T::infinity();
            }
        }
        self.values[k - 1]
    }

    pub fn min_value(&self) -> T {
        self.values.iter().fold(T::infinity(), |m, v| m.min(*v))
    }

    pub fn check_invariants(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.times.len() != self.values.len() {
            return bad("times and values differ in length");
        }
        if self.times.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("times must be strictly increasing");
        }
        let cut = self.explosion_index().unwrap_or(self.values.len());
        if self.values[..cut].iter().any(|v| !v.is_finite()) || self.values[cut..].iter().any(|v| *v != T::infinity()) {
            return bad("values must be finite before the explosion index and +inf after it");
        }
        if let PathStatus::Exploded { zeta } = self.status {
            if self.times.last().is_some_and(|t| zeta > *t) {
                return bad("explosion time beyond the last grid time");
            }
        }
        Ok(())
    }

    /// Writes rows `t,value,status,excursion_id`.
    pub fn write_csv<W: Write>(&self, w: &mut csv::Writer<W>, excursion_id: i64) -> Result<()> {
        let status = self.status.label();
        for (t, v) in self.times.iter().zip(&self.values) {
            let value = if *v == T::infinity() { "inf".to_string() } else { format!("{}", v) };
            w.write_record([format!("{}", t), value, status.to_string(), excursion_id.to_string()])?;
        }
        Ok(())
    }
}

/// Cumulative left-point integral `Σ_{j<k} f(v_j)(t_{j+1}-t_j)` over the nodes.
fn clock<T: Scalar>(times: &[T], values: &[T], f: impl Fn(T) -> T) -> Vec<T> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = T::zero();
    out.push(acc);
    for k in 1..times.len() {
        acc = acc + f(values[k - 1]) * (times[k] - times[k - 1]);
        out.push(acc);
    }
    out
}

/// Samples `offset + values[j]` at each grid time, `j` the last node with `clock_j <= t`.
fn resample<T: Scalar>(clock: &[T], values: &[T], offset: T, grid: &[T], end: T) -> Vec<T> {
    grid.iter()
        .map(|&t| {
            if t >= end {
                return T::infinity();
            }
            let j = clock.partition_point(|c| *c <= t).max(1) - 1;
            offset + values[j]
        })
        .collect()
}

/// Tail test used to decide explosion beyond the simulated range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailTest {
    /// No information: the end of the data is a censoring horizon.
    None,
    /// Remainder `φ(x_end)/mean`, valid for `E[ξ_1] ∈ (0, ∞)`.
    Mean(f64),
}

/// Relative size of the remaining clock below which the path counts as exploded.
pub const EXPLOSION_RTOL: f64 = 1e-3;

/// `X_t = x0 + ξ_{η(t)}` on `t_grid`, censoring or exploding past the data.
pub fn apply_time_change<T: Scalar>(levy_path: &Path<T>, rate: &RateFunction, x0: T, t_grid: &[T]) -> Path<T> {
    apply_time_change_with(levy_path, rate, x0, t_grid, TailTest::None)
}

pub fn apply_time_change_with<T: Scalar>(
    levy_path: &Path<T>,
    rate: &RateFunction,
    x0: T,
    t_grid: &[T],
    tail: TailTest,
) -> Path<T> {
    let a = clock(&levy_path.times, &levy_path.values, |v| T::one() / rate.eval(x0 + v));
    let a_end = *a.last().unwrap();
    // the last node's value holds up to the end of the data
    let mut zeta = None;
    if let TailTest::Mean(m) = tail {
        if m > 0.0 && m.is_finite() {
            let x_end = x0 + *levy_path.values.last().unwrap();
            if let Ok(phi) = rate.phi(x_end) {
                let rem = phi / T::lit(m);
                if rem.is_finite() && rem <= T::lit(EXPLOSION_RTOL) * a_end {
                    zeta = Some(a_end + rem);
                }
            }
        }
    }
    let last = *t_grid.last().unwrap();
    let (grid, status): (Vec<T>, PathStatus<T>) = match zeta {
        Some(z) if z <= last => (t_grid.to_vec(), PathStatus::Exploded { zeta: z }),
        Some(_) => (t_grid.iter().copied().filter(|t| *t <= a_end).collect(), PathStatus::Alive),
        None if a_end >= last => (t_grid.to_vec(), PathStatus::Alive),
        None => (t_grid.iter().copied().filter(|t| *t <= a_end).collect(), PathStatus::Censored { horizon: a_end }),
    };
    let values = resample(&a, &levy_path.values, x0, &grid, if zeta.is_some() { a_end } else { T::infinity() });
    Path { times: grid, values, status, dt_base: levy_path.dt_base }
}

/// `g(z, +∞) = lim R(x)/R(z+x)` from the tail class of `R`.
fn ratio_at_infinity<T: Scalar>(rate: &RateFunction, z: T) -> T {
    match rate.class_pos() {
        Some(c) => T::lit((-c.rate * z.as_f64()).exp()),
        None => T::one(),
    }
}

/// `G(s) = ∫_0^s g(z, w_u) du` at the nodes, plus `G(ζ)` when the path exploded.
fn transform_clock<T: Scalar>(path: &Path<T>, rate: &RateFunction, z: T) -> (Vec<T>, Option<T>) {
    let cut = path.explosion_index().unwrap_or(path.len());
    let g = |v: T| rate.ratio(z, v);
    let mut nodes = clock(&path.times[..cut], &path.values[..cut], g);
    let lifetime = match path.status {
        PathStatus::Exploded { zeta } => {
            let k = cut - 1;
            let next = if cut < path.len() { path.times[cut] } else { zeta };
            let end = next.min(zeta);
            let g_inf = ratio_at_infinity(rate, z);
            let total = nodes[k] + g(path.values[k]) * (end - path.times[k]) + g_inf * (zeta - end);
            Some(total)
        }
        _ => None,
    };
    if cut < path.len() {
        nodes.truncate(cut);
    }
    (nodes, lifetime)
}

/// `Φ_z(w)_t = z + w_{h_z(t)}` resampled on the input grid.
pub fn phi_transform<T: Scalar>(path: &Path<T>, rate: &RateFunction, z: T) -> Path<T> {
    let (nodes, lifetime) = transform_clock(path, rate, z);
    let cut = nodes.len();
    let last_known = match path.status {
        PathStatus::Exploded { .. } => lifetime.unwrap(),
        _ => {
            // the final node holds until the end of the grid
            let t_last = *path.times.last().unwrap();
            nodes[cut - 1] + rate.ratio(z, path.values[cut - 1]) * (t_last - path.times[cut - 1])
        }
    };
    let t_last = *path.times.last().unwrap();
    let (grid, status, end) = match (path.status, lifetime) {
        (PathStatus::Exploded { .. }, Some(zl)) if zl <= t_last => {
            (path.times.clone(), PathStatus::Exploded { zeta: zl }, zl)
        }
        (PathStatus::Exploded { .. }, Some(zl)) => (path.times.clone(), PathStatus::Alive, zl),
        _ if last_known >= t_last => (path.times.clone(), PathStatus::Alive, T::infinity()),
        _ => (
            path.times.iter().copied().filter(|t| *t < last_known).collect(),
            PathStatus::Censored { horizon: last_known },
            T::infinity(),
        ),
    };
    let values = resample(&nodes, &path.values[..cut], z, &grid, end);
    Path { times: grid, values, status, dt_base: path.dt_base }
}

/// Lifetime `ζ' = ∫_0^ζ R(X_s)/R(z+X_s) ds` of `Φ_z(X)`.
pub fn lifetime_of_transform<T: Scalar>(path: &Path<T>, rate: &RateFunction, z: T) -> Result<T> {
    match path.status {
        PathStatus::Exploded { .. } => Ok(transform_clock(path, rate, z).1.unwrap()),
        _ => Err(Error::NotExploded),
    }
}

/// Simulates a Lévy path and time-changes it onto `t_grid`.
pub fn simulate_time_changed(
    model: &LevyModel,
    rate: &RateFunction,
    x0: f64,
    dt: f64,
    n_steps: usize,
    t_grid: &[f64],
    rng: &mut StreamRng,
) -> Result<Path<f64>> {
    let sampler = IncrementSampler::new(model, dt)?;
    let levy = Path::levy(sampler.path(n_steps, rng), dt);
    let mean = model.mean();
    let tail = if mean > 0.0 && mean.is_finite() { TailTest::Mean(mean) } else { TailTest::None };
    Ok(apply_time_change_with(&levy, rate, x0, t_grid, tail))
}

/// Incremental simulation of `X` on the clock `∫ ds / R(x + ξ_s)`.
#[derive(Debug, Clone)]
pub struct Walker<'a> {
    sampler: IncrementSampler,
    rate: &'a RateFunction,
    pub x: f64,
    pub clock: f64,
    pub steps: usize,
}

/// One Lévy step seen in both clocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkStep {
    pub from: f64,
    pub step: Step,
    /// Clock at the start of the step.
    pub clock_before: f64,
}

impl<'a> Walker<'a> {
    pub fn new(model: &LevyModel, rate: &'a RateFunction, x0: f64, dt: f64) -> Result<Self> {
        Ok(Walker { sampler: IncrementSampler::new(model, dt)?, rate, x: x0, clock: 0.0, steps: 0 })
    }

    pub fn dt(&self) -> f64 {
        self.sampler.dt()
    }

    /// Advances one Lévy step; the clock uses the value at the step's start.
    pub fn step<R: rand::Rng + ?Sized>(&mut self, rng: &mut R) -> WalkStep {
        let from = self.x;
        let clock_before = self.clock;
        let step = self.sampler.step(from, rng);
        self.clock += self.sampler.dt() / self.rate.eval(from);
        self.x = step.end;
        self.steps += 1;
        WalkStep { from, step, clock_before }
    }
}

/// Settings for [`marginal_at`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginalOptions {
    pub dt: f64,
    pub max_steps: usize,
    /// A path whose estimated remaining clock is below `rtol * t` and ends before `t` counts as exploded.
    pub rtol: f64,
}

impl Default for MarginalOptions {
    fn default() -> Self {
        MarginalOptions { dt: 0.01, max_steps: 1_000_000, rtol: 0.01 }
    }
}

/// Samples of one time marginal; `+∞` marks explosion before `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Marginal {
    pub values: Vec<f64>,
    pub censored: usize,
}

/// `X_t` under `P_{x0}`, or `Φ_z(X)_t` under `P_{x0}` when `z` is given.
#[allow(clippy::too_many_arguments)]
pub fn marginal_at(
    model: &LevyModel,
    rate: &RateFunction,
    x0: f64,
    z: Option<f64>,
    t: f64,
    n: usize,
    seed: u64,
    opts: MarginalOptions,
) -> Result<Marginal> {
    IncrementSampler::new(model, opts.dt)?;
    let mean = model.mean();
    let shift = z.unwrap_or(0.0);
    let out: Vec<Option<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i, Phase::Path);
            let mut w = Walker::new(model, rate, x0, opts.dt).expect("validated step");
            let mut own = 0.0;
            let mut next_check = x0 + 1.0;
            while w.steps < opts.max_steps {
                let before = w.x;
                let c0 = w.clock;
                w.step(&mut rng);
                own += match z {
                    Some(z) => (w.clock - c0) * rate.ratio(z, before),
                    None => w.clock - c0,
                };
                if own > t {
                    return Some(shift + before);
                }
                if w.x >= next_check {
                    next_check = tail_check_level(w.x);
                    let speed = if mean.is_finite() { mean } else { (w.x - x0) / (w.steps as f64 * opts.dt) };
                    if speed > 0.0 {
                        // remaining clock of X, or of Φ_z(X) which runs at 1/R(z + ξ)
                        let rem = rate.phi(shift + w.x).unwrap_or(f64::INFINITY) / speed;
                        if rem <= opts.rtol * t && own + rem < t {
                            return Some(f64::INFINITY);
                        }
                    }
                }
            }
            None
        })
        .collect();
    let values: Vec<f64> = out.iter().flatten().copied().collect();
    Ok(Marginal { censored: n - values.len(), values })
}

/// Next level at which the explosion tail test is worth evaluating.
pub(crate) fn tail_check_level(x: f64) -> f64 {
    (x * 1.1).max(x + 1.0)
}

/// Scaling invariance: `Φ_z(X)_t` under `P_{x0}` against `X_t` under `P_{x0+z}`.
#[allow(clippy::too_many_arguments)]
pub fn scaling_invariance(
    model: &LevyModel,
    rate: &RateFunction,
    x0: f64,
    z: f64,
    t: f64,
    n: usize,
    seed: u64,
    opts: MarginalOptions,
) -> Result<crate::stats::KsResult> {
    let a = marginal_at(model, rate, x0, Some(z), t, n, rng::derive_seed(seed, 0), opts)?;
    let b = marginal_at(model, rate, x0 + z, None, t, n, rng::derive_seed(seed, 1), opts)?;
    crate::stats::ks_two_sample_seeded(&a.values, &b.values, seed)
}

/// Outcome of the explosion probe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplosionReport {
    pub explosion_freq: f64,
    pub zeta_samples: Vec<f64>,
    pub exploded: usize,
    pub survived: usize,
    pub inconclusive: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Exploded,
    Survived,
    Inconclusive,
}

/// Fraction of paths allowed to be inconclusive before the probe gives up.
pub const PROBE_INCONCLUSIVE_LIMIT: f64 = 0.05;

/// Estimates `P_x(ζ < ∞)` from paths simulated up to Lévy time `horizon_s`.
pub fn explosion_probe(
    model: &LevyModel,
    rate: &RateFunction,
    x0: f64,
    horizon_s: f64,
    n_paths: usize,
    seed: u64,
) -> Result<ExplosionReport> {
    explosion_probe_with(model, rate, x0, horizon_s, n_paths, seed, 0.01)
}

pub fn explosion_probe_with(
    model: &LevyModel,
    rate: &RateFunction,
    x0: f64,
    horizon_s: f64,
    n_paths: usize,
    seed: u64,
    dt: f64,
) -> Result<ExplosionReport> {
    let sampler = IncrementSampler::new(model, dt)?;
    let n_steps = (horizon_s / dt).ceil() as usize;
    let mean = model.mean();
    let results: Vec<(Verdict, f64)> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i, Phase::Path);
            let mut x = 0.0;
            let mut a = 0.0;
            let mut a_half = 0.0;
            for k in 0..n_steps {
                a += dt / rate.eval(x0 + x);
                x += sampler.sample(&mut rng);
                if k + 1 == n_steps / 2 {
                    a_half = a;
                }
            }
            if !(mean > 0.0) {
                // oscillating or drifting down: no explosion
                return (Verdict::Survived, f64::INFINITY);
            }
            let phi = rate.phi(x0 + x).unwrap_or(f64::NAN);
            if phi == f64::INFINITY {
                return (Verdict::Survived, f64::INFINITY);
            }
            if mean.is_finite() {
                let rem = phi / mean;
                if rem <= EXPLOSION_RTOL * a {
                    return (Verdict::Exploded, a + rem);
                }
            } else if a - a_half <= EXPLOSION_RTOL * a && phi.is_finite() {
                return (Verdict::Exploded, a);
            }
            (Verdict::Inconclusive, f64::NAN)
        })
        .collect();
    let exploded = results.iter().filter(|r| r.0 == Verdict::Exploded).count();
    let survived = results.iter().filter(|r| r.0 == Verdict::Survived).count();
    let inconclusive = n_paths - exploded - survived;
    if inconclusive as f64 > PROBE_INCONCLUSIVE_LIMIT * n_paths as f64 {
        return Err(Error::InconclusiveTail { inconclusive, total: n_paths });
    }
    Ok(ExplosionReport {
        explosion_freq: exploded as f64 / (exploded + survived).max(1) as f64,
        zeta_samples: results.iter().filter(|r| r.0 == Verdict::Exploded).map(|r| r.1).collect(),
        exploded,
        survived,
        inconclusive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::parse_rate;
    use approx::assert_relative_eq;

    fn brownian_path(n: usize, dt: f64, seed: u64) -> Path<f64> {
        let m = LevyModel::brownian(1.0, 1.0).unwrap();
        let s = IncrementSampler::new(&m, dt).unwrap();
        let mut rng = rng::stream(seed, 0, Phase::Path);
        Path::levy(s.path(n, &mut rng), dt)
    }

    #[test]
    fn unit_rate_is_translation() {
        let p = brownian_path(1000, 0.01, 1);
        let r = parse_rate("1").unwrap();
        let x = apply_time_change(&p, &r, 3.0, &p.times[..900]);
        for k in 0..900 {
            assert_relative_eq!(x.values[k], 3.0 + p.values[k], epsilon = 1e-12);
        }
        assert_eq!(x.status, PathStatus::Alive);
    }

    #[test]
    fn constant_rate_scales_time() {
        // R ≡ 2: X_t = x0 + ξ_{2t}
        let p = brownian_path(1000, 0.01, 2);
        let r = parse_rate("2").unwrap();
        let grid: Vec<f64> = (0..400).map(|k| k as f64 * 0.01).collect();
        let x = apply_time_change(&p, &r, 0.0, &grid);
        for (k, v) in x.values.iter().enumerate() {
            assert_relative_eq!(*v, p.values[2 * k], epsilon = 1e-12);
        }
    }

    #[test]
    fn censoring_past_the_data() {
        let p = brownian_path(100, 0.01, 3);
        let r = parse_rate("1").unwrap();
        let grid: Vec<f64> = (0..300).map(|k| k as f64 * 0.01).collect();
        let x = apply_time_change(&p, &r, 0.0, &grid);
        assert!(matches!(x.status, PathStatus::Censored { .. }));
        assert!(x.len() <= 101);
        x.check_invariants().unwrap();
    }

    #[test]
    fn exponential_rate_gives_linear_clock() {
        // R = e^x: g(z, x) = e^{-z} so h_z(t) = e^{z} t
        let m = LevyModel::brownian(1.0, 1.0).unwrap();
        let r = parse_rate("exp(x)").unwrap();
        let mut rng = rng::stream(4, 0, Phase::Path);
        let grid: Vec<f64> = (0..2000).map(|k| k as f64 * 1e-3).collect();
        let x = simulate_time_changed(&m, &r, 0.0, 1e-3, 40_000, &grid, &mut rng).unwrap();
        assert!(matches!(x.status, PathStatus::Exploded { .. }));
        x.check_invariants().unwrap();
        let z = 2f64.ln();
        let y = phi_transform(&x, &r, z);
        y.check_invariants().unwrap();
        let zeta = match x.status {
            PathStatus::Exploded { zeta } => zeta,
            _ => unreachable!(),
        };
        let zl = lifetime_of_transform(&x, &r, z).unwrap();
        assert_relative_eq!(zl, zeta / 2.0, max_relative = 1e-12);
        // Φ_z(X)_t = z + X_{2t}
        for k in 0..y.len() {
            let t = y.times[k];
            if 2.0 * t < zeta - 0.01 {
                let expect = z + x.at(2.0 * t + 1e-12);
                assert!((y.values[k] - expect).abs() < 1e-9 || (y.values[k] - z - x.at(2.0 * t - 1e-3)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_shift_is_identity() {
        let p = brownian_path(500, 0.01, 5);
        let r = parse_rate("max(1,x)^2 + 1").unwrap();
        let y = phi_transform(&p, &r, 0.0);
        assert_eq!(y.values, p.values);
    }

    #[test]
    fn lifetime_needs_explosion() {
        let p = brownian_path(10, 0.1, 6);
        let r = parse_rate("1").unwrap();
        assert_eq!(lifetime_of_transform(&p, &r, 1.0), Err(Error::NotExploded));
    }

    #[test]
    fn single_precision_paths() {
        let p: Path<f32> = Path::levy(vec![0.0, 0.5, 1.0, 0.25], 0.5);
        let r = parse_rate("2").unwrap();
        let x = apply_time_change(&p, &r, 1.0f32, &[0.0, 0.25, 0.5, 0.75]);
        assert_eq!(x.values, vec![1.0, 1.5, 2.0, 1.25]);
    }

    #[test]
    fn explosion_dichotomy() {
        let up = LevyModel::brownian(1.0, 1.0).unwrap();
        let r = explosion_probe(&up, &parse_rate("exp(x)").unwrap(), 0.0, 50.0, 50, 7).unwrap();
        assert_eq!(r.explosion_freq, 1.0);
        let r = explosion_probe(&up, &parse_rate("max(1,x)").unwrap(), 0.0, 50.0, 50, 7).unwrap();
        assert_eq!(r.explosion_freq, 0.0);
        let down = LevyModel::brownian(-1.0, 1.0).unwrap();
        let r = explosion_probe(&down, &parse_rate("exp(x)").unwrap(), 0.0, 50.0, 50, 7).unwrap();
        assert_eq!(r.explosion_freq, 0.0);
    }

    #[test]
    fn csv_rows() {
        let p: Path<f64> = Path {
            times: vec![0.0, 1.0],
            values: vec![2.0, f64::INFINITY],
            status: PathStatus::Exploded { zeta: 0.5 },
            dt_base: 0.1,
        };
        let mut w = csv::Writer::from_writer(vec![]);
        p.write_csv(&mut w, 3).unwrap();
        let s = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(s, "0,2,exploded,3\n1,inf,exploded,3\n");
    }

    #[test]
    fn scaling_invariance_holds() {
        let m = LevyModel::brownian(1.0, 4.0).unwrap();
        for src in ["exp(x/2)", "max(1,x)^2 + 1"] {
            let r = parse_rate(src).unwrap();
            let ks = scaling_invariance(&m, &r, 0.0, 1.0, 1.0, 1000, 9, MarginalOptions::default()).unwrap();
            assert!(!ks.rejects(0.01), "{src}: {ks:?}");
        }
        // a wrong shift is detected
        let r = parse_rate("exp(x/2)").unwrap();
        let a = marginal_at(&m, &r, 0.0, Some(1.0), 1.0, 1000, 1, MarginalOptions::default()).unwrap();
        let b = marginal_at(&m, &r, 2.0, None, 1.0, 1000, 2, MarginalOptions::default()).unwrap();
        assert!(crate::stats::ks_two_sample(&a.values, &b.values).unwrap().rejects(0.01));
    }
}

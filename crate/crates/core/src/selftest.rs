//! Acceptance criteria as runnable checks, shared by the `selftest`
//! subcommand and the acceptance test target.

use std::time::Instant;

use serde::Serialize;

use crate::classifier::{classify_boundary, Verdict};
use crate::entrance::{speed_law, SimOptions};
use crate::error::Result;
use crate::excursion::{
    cramer_limit_check, glue_recurrent_extension, occupation_check, sample_excursion_stratified, ExcursionOptions,
    GlueOptions, Regime,
};
use crate::levy::{IncrementSampler, LevyModel};
use crate::rate::{parse_rate, RateFunction};
use crate::rng::{self, Phase};
use crate::stats;
use crate::time_change::{explosion_probe, phi_transform, scaling_invariance, MarginalOptions, Path};

pub const CRITERIA: [u8; 11] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "criterion {:>2} {} {:<28} {} ({:.1} s)",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.seconds
        )
    }
}

pub fn name(id: u8) -> &'static str {
    match id {
        1 => "bessel dictionary",
        2 => "alpha-theta law",
        3 => "stable dictionary",
        4 => "cramer first passage",
        5 => "speed law",
        6 => "R-scaling invariance",
        7 => "round trip",
        8 => "occupation law",
        9 => "explosion zero-one",
        10 => "gluing consistency",
        11 => "KS calibration",
        _ => "unknown",
    }
}

/// Runs one criterion; errors inside a check count as a failure with the error as detail.
pub fn run(id: u8, seed: u64) -> CriterionResult {
    let start = Instant::now();
    let outcome = match id {
        1 => bessel_dictionary(),
        2 => alpha_theta_law(),
        3 => stable_dictionary(),
        4 => cramer_first_passage(seed),
        5 => speed(seed),
        6 => r_scaling(seed),
        7 => round_trip(seed),
        8 => occupation(seed),
        9 => explosion(seed),
        10 => gluing(seed),
        11 => ks_calibration(seed),
        _ => Ok((false, format!("no criterion {id}"))),
    };
    let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionResult { id, name: name(id), pass, detail, seconds: start.elapsed().as_secs_f64() }
}

pub fn run_all(ids: &[u8], seed: u64) -> Vec<CriterionResult> {
    ids.iter().map(|&id| run(id, seed)).collect()
}

type Outcome = Result<(bool, String)>;

fn rate(src: &str) -> Result<RateFunction> {
    parse_rate(src)
}

/// `ξ = 2B + λ`, the dictionary model for Bessel processes.
fn bessel(lambda: f64) -> Result<LevyModel> {
    LevyModel::brownian(lambda, 4.0)
}

fn bessel_dictionary() -> Outcome {
    let start = Instant::now();
    let r = rate("exp(x)")?;
    let mut wrong = Vec::new();
    let cases: [(f64, Option<f64>, &str); 7] = [
        (-1.0, None, "Entrance"),
        (0.0, None, "Entrance"),
        (0.5, Some(0.25), "RegularContinuous"),
        (1.0, Some(0.5), "RegularContinuous"),
        (1.9, Some(0.95), "RegularContinuous"),
        (2.5, None, "NoExtension"),
        (4.0, None, "NoExtension"),
    ];
    for (lambda, theta, want) in cases {
        let v = classify_boundary(&bessel(lambda)?, &r).verdict;
        let ok = v.name() == want
            && match (theta, &v) {
                (Some(t), Verdict::RegularContinuous { theta }) => (t - theta).abs() < 1e-8,
                _ => true,
            };
        if !ok {
            wrong.push(format!("λ={lambda}: {v}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((wrong.is_empty() && secs < 1.0, format!("7 cases, {} wrong {:?}, {secs:.3} s", wrong.len(), wrong)))
}

fn alpha_theta_law() -> Outcome {
    let mut wrong = Vec::new();
    for alpha in [0.5, 1.0, 2.0] {
        let r = rate(&format!("exp(x/{alpha})"))?;
        for theta in [0.4, 0.6, 1.2] {
            let v = classify_boundary(&bessel(2.0 * theta)?, &r).verdict;
            let continuous = matches!(v, Verdict::RegularContinuous { .. });
            if continuous != (alpha * theta < 1.0) {
                wrong.push(format!("α={alpha} θ={theta}: {v}"));
            }
        }
    }
    Ok((wrong.is_empty(), format!("9 cases, {} wrong {:?}", wrong.len(), wrong)))
}

fn stable_dictionary() -> Outcome {
    let mut wrong = Vec::new();
    let s08 = LevyModel::stable(0.8, 1.0)?;
    for src in ["exp(2*x)", "max(1,x)^2", "exp(x)", "max(1,x)^1.2"] {
        let v = classify_boundary(&s08, &rate(src)?).verdict;
        if matches!(v, Verdict::Entrance | Verdict::RegularContinuous { .. }) {
            wrong.push(format!("α=0.8 R={src}: {v}"));
        }
    }
    match classify_boundary(&s08, &rate("exp(2*x)")?).verdict {
        Verdict::RegularJumpIn { theta_set } if !theta_set.empty && theta_set.hi == 2.0 && !theta_set.hi_closed => {}
        v => wrong.push(format!("α=0.8 R=exp(2x): {v}, want RegularJumpIn (0, 2)")),
    }
    let s15 = LevyModel::stable(1.5, 1.0)?;
    for (p, entrance) in [(1.2, false), (1.5, false), (2.0, true)] {
        let v = classify_boundary(&s15, &rate(&format!("max(1,x)^{p}"))?).verdict;
        if matches!(v, Verdict::Entrance) != entrance {
            wrong.push(format!("α=1.5 p={p}: {v}"));
        }
    }
    Ok((wrong.is_empty(), format!("8 cases, {} wrong {:?}", wrong.len(), wrong)))
}

fn cramer_first_passage(seed: u64) -> Outcome {
    let start = Instant::now();
    let rep = cramer_limit_check(&bessel(1.0)?, 0.5, 0.0, &[2.0, 4.0, 6.0], 100_000, seed, 0.5, 1_000_000)?;
    let secs = start.elapsed().as_secs_f64();
    let ok = rep.within(3.0) == Some(true) && secs < 120.0;
    let rows: Vec<String> = rep.rows.iter().map(|r| format!("x={}: {:.4}±{:.4}", r.x, r.scaled, r.scaled_stderr)).collect();
    Ok((ok, format!("e^(θx)p̂ {}", rows.join(", "))))
}

fn speed(seed: u64) -> Outcome {
    let start = Instant::now();
    let m = LevyModel::brownian(-1.0, 1.0)?;
    let r = rate("max(1,x)^2")?;
    let ts = [1e-3, 3e-3, 1e-2];
    let opts = SimOptions { dt: 0.1, max_steps: 10_000_000 };
    let a = speed_law(&m, &r, 1e3, &ts, 2000, seed, opts)?;
    let b = speed_law(&m, &r, 2e3, &ts, 2000, rng::derive_seed(seed, 2), opts)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (p, q) in a.points.iter().zip(&b.points) {
        let shift = (q.level_median / p.level_median - 1.0).abs();
        ok &= (0.9..=1.1).contains(&p.level_median) && shift < 0.01;
        parts.push(format!("t={}: {:.4} (doubled {:.4}, Δ {:.2}%)", p.t, p.level_median, q.level_median, 100.0 * shift));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 300.0;
    Ok((ok, format!("median X_t·t {}", parts.join(", "))))
}

fn r_scaling(seed: u64) -> Outcome {
    let m = bessel(1.0)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for src in ["exp(x/2)", "max(1,x)^2 + 1"] {
        let ks = scaling_invariance(&m, &rate(src)?, 0.0, 1.0, 1.0, 5000, seed, MarginalOptions::default())?;
        let crit = stats::ks_critical(0.01, ks.n1, ks.n2);
        ok &= ks.statistic < crit;
        parts.push(format!("R={src}: D={:.4} < {:.4}", ks.statistic, crit));
    }
    Ok((ok, parts.join(", ")))
}

/// Largest `sup_t |Φ_{-z}(Φ_z(w))_t - w_t|` over `paths` Brownian paths on `[0, 1]`.
pub fn round_trip_error(rate: &RateFunction, z: f64, dt: f64, paths: usize, seed: u64) -> Result<f64> {
    let m = bessel(1.0)?;
    let sampler = IncrementSampler::new(&m, dt)?;
    let n = (1.0 / dt).round() as usize;
    let mut worst = 0.0f64;
    for i in 0..paths as u64 {
        let mut rng = rng::stream(seed, i, Phase::Path);
        let w = Path::levy(sampler.path(n, &mut rng), dt);
        let back = phi_transform(&phi_transform(&w, rate, z), rate, -z);
        let k = back.len().min(w.len());
        for j in 0..k {
            if back.values[j].is_finite() {
                worst = worst.max((back.values[j] - w.values[j]).abs());
            }
        }
    }
    Ok(worst)
}

fn round_trip(seed: u64) -> Outcome {
    let r = rate("exp(x/2)")?;
    let coarse = round_trip_error(&r, 1.0, 1e-3, 100, seed)?;
    let fine = round_trip_error(&r, 1.0, 5e-4, 100, rng::derive_seed(seed, 1))?;
    let ratio = fine / coarse;
    Ok(((0.4..=0.6).contains(&ratio), format!("sup error {coarse:.4} -> {fine:.4}, ratio {ratio:.3} (want [0.4, 0.6])")))
}

fn occupation(seed: u64) -> Outcome {
    let r = rate("exp(x)")?;
    let levels: Vec<f64> = (0..7).map(|k| 4.0 - k as f64).collect();
    let ex = sample_excursion_stratified(&bessel(1.0)?, &r, 0.5, &levels, 15.0, 60, seed, ExcursionOptions::default())?;
    let rep = occupation_check(&ex, &r, 0.5, (-2.0, 4.0), 12)?;
    Ok((
        rep.pass && ex.len() >= 300,
        format!("{} excursions, χ²={:.2} on {} dof, p={:.3}", ex.len(), rep.chi_square, rep.dof, rep.p_value),
    ))
}

fn explosion(seed: u64) -> Outcome {
    let m = LevyModel::brownian(1.0, 1.0)?;
    let e = explosion_probe(&m, &rate("exp(x)")?, 0.0, 50.0, 200, seed)?;
    let l = explosion_probe(&m, &rate("max(1,x)")?, 0.0, 50.0, 200, seed)?;
    Ok((
        e.explosion_freq >= 0.98 && l.explosion_freq <= 0.02,
        format!("R=exp(x): {:.3}, R=max(1,x): {:.3}", e.explosion_freq, l.explosion_freq),
    ))
}

fn gluing(seed: u64) -> Outcome {
    let r = rate("exp(x)")?;
    let rep = glue_recurrent_extension(
        &bessel(1.0)?,
        &r,
        0.5,
        Regime::Continuous { x_proxy: 15.0 },
        2.0,
        2000.0,
        8,
        seed,
        GlueOptions::default(),
    )?;
    let parts: Vec<String> = rep
        .counts
        .iter()
        .map(|c| format!("a={}: {} (ratio {:.3}, z={:.2})", c.level, c.count, c.ratio, c.z_score))
        .collect();
    Ok((
        rep.counts_pass() && rep.neglect_fraction < 0.05,
        format!("{}; neglected {:.2}%", parts.join(", "), 100.0 * rep.neglect_fraction),
    ))
}

/// Rejection rate at level 0.01 of the two-sample test over `reps` same-law pairs of size `n`.
pub fn ks_rejection_rate(reps: usize, n: usize, seed: u64) -> Result<f64> {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let mut rejected = 0;
    for i in 0..reps as u64 {
        let mut rng = rng::stream(seed, i, Phase::Study);
        let a: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        rejected += stats::ks_two_sample(&a, &b)?.rejects(0.01) as usize;
    }
    Ok(rejected as f64 / reps as f64)
}

fn ks_calibration(seed: u64) -> Outcome {
    let rate = ks_rejection_rate(1000, 200, seed)?;
    Ok(((0.005..=0.02).contains(&rate), format!("rejection rate {:.2}% over 1000 repetitions", 100.0 * rate)))
}

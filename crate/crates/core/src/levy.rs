//! Lévy process families, their exponents and moments, and exact-in-law
//! increment samplers on a time grid.
//!
//! Sign conventions: `drift` is the coefficient of `t` in the path, so for a
//! Brownian model `E[ξ_1] = drift`. The characteristic exponent satisfies
//! `E[e^{iqξ_t}] = e^{-tΨ(q)}` and the Laplace exponent is
//! `ψ(θ) = log E[e^{-θξ_1}]`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Phase, StreamRng};

/// Law of a single jump of a compound Poisson component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpLaw {
    ExponentialUp { mean: f64 },
    ExponentialDown { mean: f64 },
    TwoSidedExponential { mean_up: f64, mean_down: f64, p_up: f64 },
    PointMassMixture { values: Vec<f64>, weights: Vec<f64> },
}

impl JumpLaw {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidModel(m.to_string()));
        match self {
            JumpLaw::ExponentialUp { mean } | JumpLaw::ExponentialDown { mean } => {
                if !(*mean > 0.0 && mean.is_finite()) {
                    return bad("exponential jump mean must be positive");
                }
            }
            JumpLaw::TwoSidedExponential { mean_up, mean_down, p_up } => {
                if !(*mean_up > 0.0 && *mean_down > 0.0 && mean_up.is_finite() && mean_down.is_finite()) {
                    return bad("two-sided exponential means must be positive");
                }
                if !(0.0..=1.0).contains(p_up) {
                    return bad("p_up must lie in [0, 1]");
                }
            }
            JumpLaw::PointMassMixture { values, weights } => {
                if values.is_empty() || values.len() != weights.len() {
                    return bad("point-mass mixture needs matching non-empty values and weights");
                }
                if weights.iter().any(|w| !(*w >= 0.0)) || values.iter().any(|v| !v.is_finite()) {
                    return bad("point-mass weights must be non-negative and values finite");
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return bad("point-mass weights must sum to 1");
                }
            }
        }
        Ok(())
    }

    fn is_point_mass(&self) -> bool {
        matches!(self, JumpLaw::PointMassMixture { .. })
    }

    pub fn has_positive(&self) -> bool {
        match self {
            JumpLaw::ExponentialUp { .. } => true,
            JumpLaw::ExponentialDown { .. } => false,
            JumpLaw::TwoSidedExponential { p_up, .. } => *p_up > 0.0,
            JumpLaw::PointMassMixture { values, weights } => {
                values.iter().zip(weights).any(|(v, w)| *v > 0.0 && *w > 0.0)
            }
        }
    }

    pub fn has_negative(&self) -> bool {
        match self {
            JumpLaw::ExponentialUp { .. } => false,
            JumpLaw::ExponentialDown { .. } => true,
            JumpLaw::TwoSidedExponential { p_up, .. } => *p_up < 1.0,
            JumpLaw::PointMassMixture { values, weights } => {
                values.iter().zip(weights).any(|(v, w)| *v < 0.0 && *w > 0.0)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            JumpLaw::ExponentialUp { mean } => *mean,
            JumpLaw::ExponentialDown { mean } => -*mean,
            JumpLaw::TwoSidedExponential { mean_up, mean_down, p_up } => p_up * mean_up - (1.0 - p_up) * mean_down,
            JumpLaw::PointMassMixture { values, weights } => values.iter().zip(weights).map(|(v, w)| v * w).sum(),
        }
    }

    pub fn second_moment(&self) -> f64 {
        match self {
            JumpLaw::ExponentialUp { mean } | JumpLaw::ExponentialDown { mean } => 2.0 * mean * mean,
            JumpLaw::TwoSidedExponential { mean_up, mean_down, p_up } => {
                2.0 * (p_up * mean_up * mean_up + (1.0 - p_up) * mean_down * mean_down)
            }
            JumpLaw::PointMassMixture { values, weights } => {
                values.iter().zip(weights).map(|(v, w)| v * v * w).sum()
            }
        }
    }

    /// `E[e^{-θJ}]`, `+∞` outside the domain.
    pub fn laplace(&self, theta: f64) -> f64 {
        let down = |m: f64| if theta * m < 1.0 { 1.0 / (1.0 - theta * m) } else { f64::INFINITY };
        let up = |m: f64| if theta * m > -1.0 { 1.0 / (1.0 + theta * m) } else { f64::INFINITY };
        match self {
            JumpLaw::ExponentialUp { mean } => up(*mean),
            JumpLaw::ExponentialDown { mean } => down(*mean),
            JumpLaw::TwoSidedExponential { mean_up, mean_down, p_up } => {
                let a = if *p_up > 0.0 { p_up * up(*mean_up) } else { 0.0 };
                let b = if *p_up < 1.0 { (1.0 - p_up) * down(*mean_down) } else { 0.0 };
                a + b
            }
            JumpLaw::PointMassMixture { values, weights } => {
                values.iter().zip(weights).map(|(v, w)| w * (-theta * v).exp()).sum()
            }
        }
    }

    /// `E[e^{-sJ}]` for complex `s` in the domain of analyticity.
    pub fn laplace_complex(&self, s: Complex64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        match self {
            JumpLaw::ExponentialUp { mean } => one / (one + s * mean),
            JumpLaw::ExponentialDown { mean } => one / (one - s * mean),
            JumpLaw::TwoSidedExponential { mean_up, mean_down, p_up } => {
                one / (one + s * mean_up) * p_up + one / (one - s * mean_down) * (1.0 - p_up)
            }
            JumpLaw::PointMassMixture { values, weights } => {
                values.iter().zip(weights).map(|(v, w)| (-s * v).exp() * w).sum()
            }
        }
    }

    /// `E[e^{iqJ}]`.
    pub fn characteristic(&self, q: f64) -> Complex64 {
        self.laplace_complex(Complex64::new(0.0, -q))
    }

    /// `P(J > u)` for `u >= 0`.
    pub fn upper_tail(&self, u: f64) -> f64 {
        match self {
            JumpLaw::ExponentialUp { mean } => (-u / mean).exp(),
            JumpLaw::ExponentialDown { .. } => 0.0,
            JumpLaw::TwoSidedExponential { mean_up, p_up, .. } => p_up * (-u / mean_up).exp(),
            JumpLaw::PointMassMixture { values, weights } => {
                values.iter().zip(weights).filter(|(v, _)| **v > u).map(|(_, w)| w).sum()
            }
        }
    }

    /// `P(J < x)` for `x <= 0`.
    pub fn lower_tail(&self, x: f64) -> f64 {
        match self {
            JumpLaw::ExponentialUp { .. } => 0.0,
            JumpLaw::ExponentialDown { mean } => (x / mean).exp(),
            JumpLaw::TwoSidedExponential { mean_down, p_up, .. } => (1.0 - p_up) * (x / mean_down).exp(),
            JumpLaw::PointMassMixture { values, weights } => {
                values.iter().zip(weights).filter(|(v, _)| **v < x).map(|(_, w)| w).sum()
            }
        }
    }

    /// Exponentially tilted law `∝ e^{-θx} J(dx)` and its normalising factor `E[e^{-θJ}]`.
    pub fn tilt(&self, theta: f64) -> Result<(f64, JumpLaw)> {
        let factor = self.laplace(theta);
        if !factor.is_finite() {
            return Err(Error::InvalidArgument(format!("jump law has no exponential moment at {theta}")));
        }
        let law = match self {
            JumpLaw::ExponentialUp { mean } => JumpLaw::ExponentialUp { mean: mean / (1.0 + theta * mean) },
            JumpLaw::ExponentialDown { mean } => JumpLaw::ExponentialDown { mean: mean / (1.0 - theta * mean) },
            JumpLaw::TwoSidedExponential { mean_up, mean_down, p_up } => {
                let up = p_up / (1.0 + theta * mean_up);
                let down = (1.0 - p_up) / (1.0 - theta * mean_down);
                JumpLaw::TwoSidedExponential {
                    mean_up: mean_up / (1.0 + theta * mean_up),
                    mean_down: mean_down / (1.0 - theta * mean_down),
                    p_up: up / (up + down),
                }
            }
            JumpLaw::PointMassMixture { values, weights } => JumpLaw::PointMassMixture {
                values: values.clone(),
                weights: values.iter().zip(weights).map(|(v, w)| w * (-theta * v).exp() / factor).collect(),
            },
        };
        Ok((factor, law))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            JumpLaw::ExponentialUp { mean } => mean * rng.sample::<f64, _>(Exp1),
            JumpLaw::ExponentialDown { mean } => -mean * rng.sample::<f64, _>(Exp1),
            JumpLaw::TwoSidedExponential { mean_up, mean_down, p_up } => {
                let e: f64 = rng.sample(Exp1);
                if rng.random::<f64>() < *p_up {
                    mean_up * e
                } else {
                    -mean_down * e
                }
            }
            JumpLaw::PointMassMixture { values, weights } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, w) in values.iter().zip(weights) {
                    acc += w;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().unwrap()
            }
        }
    }
}

/// Supported Lévy process families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LevyFamily {
    BrownianDrift { drift: f64, sigma2: f64 },
    CompoundPoissonDrift { drift: f64, rate: f64, jumps: JumpLaw },
    /// Spectrally positive strictly α-stable process with
    /// `log E[e^{-θξ_1}] = -scale·θ^α` for α < 1 and `+scale·θ^α` for α > 1.
    SpectrallyPositiveStable { alpha: f64, scale: f64 },
    BrownianPlusCompoundPoisson { drift: f64, sigma2: f64, rate: f64, jumps: JumpLaw },
}

/// A validated Lévy process. Killing is never modelled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LevyFamily", into = "LevyFamily")]
pub struct LevyModel {
    family: LevyFamily,
}

impl TryFrom<LevyFamily> for LevyModel {
    type Error = Error;

    fn try_from(family: LevyFamily) -> Result<Self> {
        LevyModel::new(family)
    }
}

impl From<LevyModel> for LevyFamily {
    fn from(m: LevyModel) -> Self {
        m.family
    }
}

/// Parts of the triplet used by the generic formulas.
struct Parts<'a> {
    drift: f64,
    sigma2: f64,
    jumps: Option<(f64, &'a JumpLaw)>,
}

impl LevyModel {
    pub fn new(family: LevyFamily) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidModel(m.to_string()));
        match &family {
            LevyFamily::BrownianDrift { drift, sigma2 } => {
                if !drift.is_finite() || !(*sigma2 >= 0.0 && sigma2.is_finite()) {
                    return bad("Brownian drift must be finite and variance non-negative");
                }
                if *sigma2 == 0.0 {
                    return bad("pure drift is degenerate; use a positive variance");
                }
            }
            LevyFamily::CompoundPoissonDrift { drift, rate, jumps } => {
                if !drift.is_finite() || !(*rate >= 0.0 && rate.is_finite()) {
                    return bad("compound Poisson drift must be finite and rate non-negative");
                }
                jumps.validate()?;
                if jumps.is_point_mass() && *drift == 0.0 {
                    return bad("point-mass jumps need a non-zero drift to stay non-lattice");
                }
                if *rate == 0.0 && *drift == 0.0 {
                    return bad("zero process");
                }
            }
            LevyFamily::SpectrallyPositiveStable { alpha, scale } => {
                if !(*alpha > 0.0 && *alpha < 2.0) || *alpha == 1.0 {
                    return bad("stable index must lie in (0,1) or (1,2)");
                }
                if !(*scale > 0.0 && scale.is_finite()) {
                    return bad("stable scale must be positive");
                }
            }
            LevyFamily::BrownianPlusCompoundPoisson { drift, sigma2, rate, jumps } => {
                if !drift.is_finite() || !(*sigma2 >= 0.0) || !(*rate >= 0.0) {
                    return bad("invalid Brownian plus compound Poisson parameters");
                }
                jumps.validate()?;
                if jumps.is_point_mass() && *drift == 0.0 && *sigma2 == 0.0 {
                    return bad("point-mass jumps need a diffuse component");
                }
            }
        }
        Ok(LevyModel { family })
    }

    pub fn brownian(drift: f64, sigma2: f64) -> Result<Self> {
        Self::new(LevyFamily::BrownianDrift { drift, sigma2 })
    }

    pub fn compound_poisson(drift: f64, rate: f64, jumps: JumpLaw) -> Result<Self> {
        Self::new(LevyFamily::CompoundPoissonDrift { drift, rate, jumps })
    }

    pub fn stable(alpha: f64, scale: f64) -> Result<Self> {
        Self::new(LevyFamily::SpectrallyPositiveStable { alpha, scale })
    }

    pub fn brownian_cp(drift: f64, sigma2: f64, rate: f64, jumps: JumpLaw) -> Result<Self> {
        Self::new(LevyFamily::BrownianPlusCompoundPoisson { drift, sigma2, rate, jumps })
    }

    pub fn family(&self) -> &LevyFamily {
        &self.family
    }

    /// `(alpha, scale)` for the stable family.
    pub fn stable_params(&self) -> Option<(f64, f64)> {
        match self.family {
            LevyFamily::SpectrallyPositiveStable { alpha, scale } => Some((alpha, scale)),
            _ => None,
        }
    }

    fn parts(&self) -> Option<Parts<'_>> {
        match &self.family {
            LevyFamily::BrownianDrift { drift, sigma2 } => Some(Parts { drift: *drift, sigma2: *sigma2, jumps: None }),
            LevyFamily::CompoundPoissonDrift { drift, rate, jumps } => {
                Some(Parts { drift: *drift, sigma2: 0.0, jumps: Some((*rate, jumps)) })
            }
            LevyFamily::BrownianPlusCompoundPoisson { drift, sigma2, rate, jumps } => {
                Some(Parts { drift: *drift, sigma2: *sigma2, jumps: Some((*rate, jumps)) })
            }
            LevyFamily::SpectrallyPositiveStable { .. } => None,
        }
    }

    /// Drift coefficient of the triplet; zero for the stable family.
    pub fn drift(&self) -> f64 {
        self.parts().map(|p| p.drift).unwrap_or(0.0)
    }

    pub fn sigma2(&self) -> f64 {
        self.parts().map(|p| p.sigma2).unwrap_or(0.0)
    }

    /// `(rate, law)` of the compound Poisson component, if any.
    pub fn jump_part(&self) -> Option<(f64, &JumpLaw)> {
        self.parts().and_then(|p| p.jumps).filter(|(r, _)| *r > 0.0)
    }

    pub fn has_positive_jumps(&self) -> bool {
        match self.family {
            LevyFamily::SpectrallyPositiveStable { .. } => true,
            _ => self.jump_part().is_some_and(|(_, j)| j.has_positive()),
        }
    }

    pub fn has_negative_jumps(&self) -> bool {
        match self.family {
            LevyFamily::SpectrallyPositiveStable { .. } => false,
            _ => self.jump_part().is_some_and(|(_, j)| j.has_negative()),
        }
    }

    /// No negative jumps.
    pub fn is_spectrally_positive(&self) -> bool {
        !self.has_negative_jumps()
    }

    /// No positive jumps.
    pub fn is_spectrally_negative(&self) -> bool {
        !self.has_positive_jumps()
    }

    /// `σ_st^α = scale·|cos(πα/2)|`, the stable scale in the usual parametrisation.
    fn stable_sigma_alpha(alpha: f64, scale: f64) -> f64 {
        scale * (PI * alpha / 2.0).cos().abs()
    }

    /// Characteristic exponent `Ψ(q)` with `E[e^{iqξ_t}] = e^{-tΨ(q)}`.
    pub fn char_exponent(&self, q: f64) -> Complex64 {
        if q == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        match self.parts() {
            Some(p) => {
                let mut psi = Complex64::new(0.5 * p.sigma2 * q * q, -p.drift * q);
                if let Some((rate, law)) = p.jumps {
                    psi += (Complex64::new(1.0, 0.0) - law.characteristic(q)) * rate;
                }
                psi
            }
            None => {
                let (alpha, scale) = self.stable_params().unwrap();
                let s = Self::stable_sigma_alpha(alpha, scale);
                let skew = (PI * alpha / 2.0).tan() * q.signum();
                Complex64::new(1.0, -skew) * (s * q.abs().powf(alpha))
            }
        }
    }

    /// `log E[e^{-θξ_1}]`, `+∞` where the moment diverges.
    pub fn laplace_exponent(&self, theta: f64) -> f64 {
        if theta == 0.0 {
            return 0.0;
        }
        match self.parts() {
            Some(p) => {
                let mut v = -theta * p.drift + 0.5 * p.sigma2 * theta * theta;
                if let Some((rate, law)) = p.jumps {
                    let l = law.laplace(theta);
                    if !l.is_finite() {
                        return f64::INFINITY;
                    }
                    v += rate * (l - 1.0);
                }
                v
            }
            None => {
                let (alpha, scale) = self.stable_params().unwrap();
                if theta < 0.0 {
                    return f64::INFINITY;
                }
                if alpha < 1.0 {
                    -scale * theta.powf(alpha)
                } else {
                    scale * theta.powf(alpha)
                }
            }
        }
    }

    /// `E[e^{-θξ_1}]` in `(0, ∞]`.
    pub fn laplace_mgf(&self, theta: f64) -> f64 {
        self.laplace_exponent(theta).exp()
    }

    /// `log E[e^{-sξ_1}]` continued to complex `s` with `Re s >= 0`;
    /// only meaningful for models without negative jumps.
    pub fn laplace_exponent_complex(&self, s: Complex64) -> Complex64 {
        match self.parts() {
            Some(p) => {
                let mut v = -s * p.drift + s * s * (0.5 * p.sigma2);
                if let Some((rate, law)) = p.jumps {
                    v += (law.laplace_complex(s) - 1.0) * rate;
                }
                v
            }
            None => {
                let (alpha, scale) = self.stable_params().unwrap();
                let sa = s.powf(alpha) * scale;
                if alpha < 1.0 {
                    -sa
                } else {
                    sa
                }
            }
        }
    }

    /// Supremum of the θ-domain on which `E[e^{-θξ_1}]` is finite.
    pub fn mgf_domain_sup(&self) -> f64 {
        match self.jump_part() {
            Some((_, JumpLaw::ExponentialDown { mean })) => 1.0 / mean,
            Some((_, JumpLaw::TwoSidedExponential { mean_down, p_up, .. })) if *p_up < 1.0 => 1.0 / mean_down,
            _ => f64::INFINITY,
        }
    }

    /// `E[ξ_1]`; `+∞` for the stable family with α < 1.
    pub fn mean(&self) -> f64 {
        match self.parts() {
            Some(p) => p.drift + p.jumps.map(|(r, j)| r * j.mean()).unwrap_or(0.0),
            None => {
                let (alpha, _) = self.stable_params().unwrap();
                if alpha < 1.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        }
    }

    /// `Var(ξ_1)`, `None` when the second moment is infinite.
    pub fn variance(&self) -> Option<f64> {
        self.parts().map(|p| p.sigma2 + p.jumps.map(|(r, j)| r * j.second_moment()).unwrap_or(0.0))
    }

    /// Esscher-type tilt of the Lévy triplet by `e^{-θx}` (no killing check).
    pub(crate) fn tilted_unchecked(&self, theta: f64) -> Result<LevyModel> {
        let p = self.parts().ok_or_else(|| Error::Unsupported("tilt of the stable family".into()))?;
        let drift = p.drift - p.sigma2 * theta;
        match p.jumps {
            None => LevyModel::brownian(drift, p.sigma2),
            Some((rate, law)) => {
                let (factor, law) = law.tilt(theta)?;
                let rate = rate * factor;
                if p.sigma2 > 0.0 {
                    LevyModel::brownian_cp(drift, p.sigma2, rate, law)
                } else {
                    LevyModel::compound_poisson(drift, rate, law)
                }
            }
        }
    }
}

/// A batch of i.i.d. increments of `ξ` over steps of length `dt`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Increments {
    pub dt: f64,
    pub values: Vec<f64>,
    pub seed: u64,
}

/// One step of a grid path: the end value and the minimum over the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub end: f64,
    /// Value just before the jumps of the step (jumps sit at the right endpoint).
    pub pre_jump: f64,
    /// Minimum of the continuous part over the step, exact for the Gaussian bridge.
    pub continuous_min: f64,
}

#[derive(Debug, Clone)]
enum Kind {
    Diffusive { drift: f64, sd: f64, jumps: Option<(Poisson<f64>, JumpLaw)> },
    Stable { alpha: f64, gamma: f64, b: f64, s: f64 },
}

/// Increment sampler for a fixed model and step.
#[derive(Debug, Clone)]
pub struct IncrementSampler {
    dt: f64,
    kind: Kind,
}

impl IncrementSampler {
    pub fn new(model: &LevyModel, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let kind = match model.parts() {
            Some(p) => {
                let jumps = match p.jumps {
                    Some((rate, law)) if rate > 0.0 => Some((
                        Poisson::new(rate * dt).map_err(|e| Error::InvalidModel(e.to_string()))?,
                        law.clone(),
                    )),
                    _ => None,
                };
                Kind::Diffusive { drift: p.drift * dt, sd: (p.sigma2 * dt).sqrt(), jumps }
            }
            None => {
                let (alpha, scale) = model.stable_params().unwrap();
                let t = (PI * alpha / 2.0).tan();
                Kind::Stable {
                    alpha,
                    gamma: LevyModel::stable_sigma_alpha(alpha, scale).powf(1.0 / alpha) * dt.powf(1.0 / alpha),
                    b: t.atan() / alpha,
                    s: (1.0 + t * t).powf(1.0 / (2.0 * alpha)),
                }
            }
        };
        Ok(IncrementSampler { dt, kind })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn jumps<R: Rng + ?Sized>(pois: &Poisson<f64>, law: &JumpLaw, rng: &mut R) -> f64 {
        let n = pois.sample(rng) as u64;
        (0..n).map(|_| law.sample(rng)).sum()
    }

    /// Chambers-Mallows-Stuck variate for the totally skewed stable law.
    fn stable<R: Rng + ?Sized>(alpha: f64, b: f64, s: f64, rng: &mut R) -> f64 {
        let v = PI * (rng.random::<f64>() - 0.5);
        let w: f64 = rng.sample(Exp1);
        let a = alpha * (v + b);
        s * a.sin() / v.cos().powf(1.0 / alpha) * ((v - a).cos() / w).powf((1.0 - alpha) / alpha)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            Kind::Diffusive { drift, sd, jumps } => {
                let mut x = drift + if *sd > 0.0 { sd * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
                if let Some((pois, law)) = jumps {
                    x += Self::jumps(pois, law, rng);
                }
                x
            }
            Kind::Stable { alpha, gamma, b, s } => gamma * Self::stable(*alpha, *b, *s, rng),
        }
    }

    /// Advances from `start`, also reporting the in-step minimum of the
    /// continuous part (Brownian bridge minimum when a Gaussian part is present).
    pub fn step<R: Rng + ?Sized>(&self, start: f64, rng: &mut R) -> Step {
        match &self.kind {
            Kind::Diffusive { drift, sd, jumps } => {
                let pre = start + drift + if *sd > 0.0 { sd * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
                let continuous_min = if *sd > 0.0 {
                    let u: f64 = 1.0 - rng.random::<f64>();
                    let d = pre - start;
                    0.5 * (start + pre - (d * d - 2.0 * sd * sd * u.ln()).sqrt())
                } else {
                    start.min(pre)
                };
                let end = match jumps {
                    Some((pois, law)) => pre + Self::jumps(pois, law, rng),
                    None => pre,
                };
                Step { end, pre_jump: pre, continuous_min }
            }
            Kind::Stable { .. } => {
                let end = start + self.sample(rng);
                Step { end, pre_jump: end, continuous_min: start.min(end) }
            }
        }
    }

    /// Cumulative path `ξ_0 = 0, ξ_dt, …, ξ_{n·dt}`.
    pub fn path<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let mut out = Vec::with_capacity(n + 1);
        let mut x = 0.0;
        out.push(x);
        for _ in 0..n {
            x += self.sample(rng);
            out.push(x);
        }
        out
    }
}

/// Draws `n` i.i.d. increments over `dt`, reproducible from `seed`.
pub fn simulate_increments(model: &LevyModel, dt: f64, n: usize, seed: u64) -> Result<Increments> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one increment".into()));
    }
    let sampler = IncrementSampler::new(model, dt)?;
    let mut rng: StreamRng = rng::stream(seed, 0, Phase::Increments);
    let values = (0..n).map(|_| sampler.sample(&mut rng)).collect();
    Ok(Increments { dt, values, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_exponent() {
        let m = LevyModel::brownian(0.0, 1.0).unwrap();
        let psi = m.char_exponent(2.0);
        assert_relative_eq!(psi.re, 2.0);
        assert_relative_eq!(psi.im, 0.0);
    }

    #[test]
    fn compound_poisson_exponent_matches_quadrature() {
        let m = LevyModel::compound_poisson(0.0, 1.0, JumpLaw::ExponentialUp { mean: 1.0 }).unwrap();
        let psi = m.char_exponent(1.0);
        let closed = Complex64::new(1.0, 0.0) - Complex64::new(1.0, 0.0) / Complex64::new(1.0, -1.0);
        // independent route: ∫_0^∞ (1 - e^{ix}) e^{-x} dx by quadrature
        let re = quad::integrate_tail(
            |x: f64| (1.0 - x.cos()) * (-x).exp(),
            0.0,
            quad::Decay::Exponential { rate: 1.0 },
            1e-12,
        );
        let im = quad::integrate_tail(|x: f64| -x.sin() * (-x).exp(), 0.0, quad::Decay::Exponential { rate: 1.0 }, 1e-12);
        assert_relative_eq!(psi.re, closed.re, epsilon = 1e-14);
        assert_relative_eq!(psi.im, closed.im, epsilon = 1e-14);
        assert_relative_eq!(psi.re, re, epsilon = 1e-8);
        assert_relative_eq!(psi.im, im, epsilon = 1e-8);
    }

    #[test]
    fn laplace_values() {
        let lam = 1.3;
        let m = LevyModel::brownian(lam, 4.0).unwrap();
        assert_relative_eq!(m.laplace_mgf(0.7), (-lam * 0.7 + 2.0 * 0.49f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(m.laplace_mgf(lam / 2.0), 1.0, max_relative = 1e-14);
        let s = LevyModel::stable(0.8, 1.0).unwrap();
        assert_relative_eq!(s.laplace_mgf(2.0), (-(2f64.powf(0.8))).exp(), max_relative = 1e-14);
        assert!(s.laplace_mgf(0.5) < 1.0);
        let s = LevyModel::stable(1.5, 1.0).unwrap();
        assert_relative_eq!(s.laplace_mgf(1.0), 1f64.exp(), max_relative = 1e-14);
        let d = LevyModel::compound_poisson(1.0, 1.0, JumpLaw::ExponentialDown { mean: 1.0 }).unwrap();
        assert_eq!(d.laplace_mgf(1.0), f64::INFINITY);
        assert_eq!(d.laplace_mgf(0.0), 1.0);
    }

    #[test]
    fn stable_exponent_continues_to_laplace() {
        // Ψ(iθ) = -log E[e^{-θξ}] links the two exponents
        for &alpha in &[0.6, 1.4] {
            let m = LevyModel::stable(alpha, 0.7).unwrap();
            let (a, c) = m.stable_params().unwrap();
            let s = LevyModel::stable_sigma_alpha(a, c);
            let theta: f64 = 1.3;
            let z = Complex64::new(0.0, theta).powf(alpha) * s * Complex64::new(1.0, -(PI * alpha / 2.0).tan());
            assert_relative_eq!(z.re, -m.laplace_exponent(theta), max_relative = 1e-10);
            assert!(z.im.abs() < 1e-10);
        }
    }

    #[test]
    fn means() {
        assert_eq!(LevyModel::brownian(-1.0, 1.0).unwrap().mean(), -1.0);
        assert_eq!(LevyModel::stable(1.5, 1.0).unwrap().mean(), 0.0);
        assert_eq!(LevyModel::stable(0.5, 1.0).unwrap().mean(), f64::INFINITY);
        let m = LevyModel::compound_poisson(-2.0, 1.0, JumpLaw::ExponentialUp { mean: 1.0 }).unwrap();
        assert_eq!(m.mean(), -1.0);
        let inc = simulate_increments(&m, 1.0, 200_000, 3).unwrap();
        let mean = inc.values.iter().sum::<f64>() / inc.values.len() as f64;
        let se = (m.variance().unwrap() / 200_000.0).sqrt();
        assert!((mean + 1.0).abs() < 4.0 * se, "{mean}");
    }

    #[test]
    fn invalid_models() {
        assert!(LevyModel::stable(1.0, 1.0).is_err());
        assert!(LevyModel::stable(2.0, 1.0).is_err());
        assert!(LevyModel::brownian(0.0, -1.0).is_err());
        let bad = JumpLaw::PointMassMixture { values: vec![1.0, 2.0], weights: vec![0.5, 0.6] };
        assert!(LevyModel::compound_poisson(1.0, 1.0, bad).is_err());
        let lattice = JumpLaw::PointMassMixture { values: vec![1.0, -1.0], weights: vec![0.5, 0.5] };
        assert!(LevyModel::compound_poisson(0.0, 1.0, lattice.clone()).is_err());
        assert!(LevyModel::compound_poisson(0.5, 1.0, lattice).is_ok());
        assert!(simulate_increments(&LevyModel::brownian(0.0, 1.0).unwrap(), 1.0, 0, 1).is_err());
        assert!(simulate_increments(&LevyModel::brownian(0.0, 1.0).unwrap(), 0.0, 5, 1).is_err());
    }

    #[test]
    fn serde_roundtrip_validates() {
        let m = LevyModel::brownian(1.0, 4.0).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<LevyModel>(&s).unwrap(), m);
        let bad = r#"{"family":"spectrally_positive_stable","alpha":1.0,"scale":1.0}"#;
        assert!(serde_json::from_str::<LevyModel>(bad).is_err());
    }

    #[test]
    fn bridge_minimum_is_below_endpoints() {
        let m = LevyModel::brownian(0.0, 1.0).unwrap();
        let s = IncrementSampler::new(&m, 0.1).unwrap();
        let mut rng = rng::stream(1, 0, Phase::Path);
        for _ in 0..1000 {
            let st = s.step(0.0, &mut rng);
            assert!(st.continuous_min <= 0.0 && st.continuous_min <= st.end);
        }
    }
}

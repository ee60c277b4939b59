//! Boundary classification at `+∞`: the (H1)/(H2) conditions, the entrance
//! and regular integral tests, and the combined verdict.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fluctuation::{cramer_theta, renewal_plus, FeasibleSet};
use crate::levy::{JumpLaw, LevyModel};
use crate::quad::{self, Decay};
use crate::rate::{integrate_over_tail, End, RateFunction, TailClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum H1Branch {
    NegativeMean,
    ZeroMeanIntegral,
    FamilyFact,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H1Record {
    pub holds: bool,
    pub branch: Option<H1Branch>,
    pub detail: String,
}

impl H1Record {
    fn yes(branch: H1Branch, detail: impl Into<String>) -> Self {
        H1Record { holds: true, branch: Some(branch), detail: detail.into() }
    }

    fn no(detail: impl Into<String>) -> Self {
        H1Record { holds: false, branch: None, detail: detail.into() }
    }
}

/// Checks (H1) for a model.
pub fn check_h1(model: &LevyModel) -> H1Record {
    let mean = model.mean();
    if mean < 0.0 {
        return H1Record::yes(H1Branch::NegativeMean, format!("E[ξ_1] = {mean}"));
    }
    if mean > 0.0 {
        return H1Record::no(format!("E[ξ_1] = {mean} > 0"));
    }
    if model.is_spectrally_positive() {
        return H1Record::yes(H1Branch::FamilyFact, "zero mean without negative jumps: H_- is a unit drift");
    }
    if let Some((rate, law)) = model.jump_part() {
        if law.has_positive() {
            let value = zero_mean_integral(rate, law);
            return if value.is_finite() {
                H1Record::yes(H1Branch::ZeroMeanIntegral, format!("zero-mean integral = {value:.6e}"))
            } else {
                H1Record::no("zero-mean integral diverges")
            };
        }
    }
    match model.variance() {
        Some(v) if v.is_finite() => H1Record::yes(H1Branch::FamilyFact, format!("zero mean with variance {v}")),
        _ => H1Record::no("zero mean with infinite variance"),
    }
}

/// Finite support end or exponential scale of a one-sided jump tail.
fn tail_extent(law: &JumpLaw, upper: bool) -> (f64, Option<f64>) {
    match law {
        JumpLaw::ExponentialUp { mean } if upper => (0.0, Some(*mean)),
        JumpLaw::ExponentialDown { mean } if !upper => (0.0, Some(*mean)),
        JumpLaw::TwoSidedExponential { mean_up, mean_down, .. } => {
            (0.0, Some(if upper { *mean_up } else { *mean_down }))
        }
        JumpLaw::PointMassMixture { values, .. } => {
            let end = values.iter().map(|v| if upper { *v } else { -*v }).fold(0.0, f64::max);
            (end, None)
        }
        _ => (0.0, None),
    }
}

/// `∫_1^∞ u Π̄⁻(u) / D(u) du` with `D(u) = ∫_0^u dv ∫_v^∞ Π̄⁺(w) dw`,
/// by nested quadrature over the jump tails.
fn zero_mean_integral(rate: f64, law: &JumpLaw) -> f64 {
    let up = |w: f64| rate * law.upper_tail(w);
    let down = |u: f64| rate * law.lower_tail(-u);
    let (up_end, up_scale) = tail_extent(law, true);
    let inner = |v: f64| match up_scale {
        Some(m) => quad::integrate_tail(up, v, Decay::Exponential { rate: 1.0 / m }, 1e-10),
        None => quad::integrate(up, v, up_end.max(v), 0.0, 1e-10, 200).value,
    };
    let outer = |u: f64| {
        let d = quad::integrate(inner, 0.0, u, 0.0, 1e-9, 200).value;
        if d > 0.0 {
            u * down(u) / d
        } else if down(u) > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    };
    let (down_end, down_scale) = tail_extent(law, false);
    match down_scale {
        Some(m) => quad::integrate_tail(outer, 1.0, Decay::Exponential { rate: 1.0 / m }, 1e-8),
        None => quad::integrate(outer, 1.0, down_end.max(1.0), 0.0, 1e-8, 200).value,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H2Record {
    pub feasible_set: FeasibleSet,
    pub cramer_root: Option<f64>,
}

/// Outcome of an integral test `∫_0^∞ f(y) dy < ∞`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralRecord {
    pub finite: bool,
    /// Value of the integral from 0 when finite and computed.
    pub value: Option<f64>,
    /// Asymptotic class of the integrand at `+∞`, when known.
    pub integrand: Option<TailClass>,
    pub note: String,
}

fn integral_record(f: impl Fn(f64) -> f64, class: Option<TailClass>, what: &str, value: bool) -> Result<IntegralRecord> {
    let finite = match class {
        Some(c) => c.integrable(End::PosInf),
        None => integrate_over_tail(&f, 0.0, None, what)?.is_finite(),
    };
    let value = if finite && value { Some(integrate_over_tail(&f, 0.0, class, what)?) } else { None };
    let note = match class {
        Some(c) if finite => format!("{what} ~ {c}: integrable"),
        Some(c) => format!("{what} ~ {c}: divergent (borderline counts as divergent)"),
        None => format!("{what}: decided numerically"),
    };
    Ok(IntegralRecord { finite, value, integrand: class, note })
}

/// Entrance test `∫^∞ ν_+(y)/R(y) dy < ∞`.
pub fn entrance_test(model: &LevyModel, rate: &RateFunction) -> Result<IntegralRecord> {
    entrance_integral(model, rate, true)
}

fn entrance_integral(model: &LevyModel, rate: &RateFunction, value: bool) -> Result<IntegralRecord> {
    let nu = renewal_plus(model)?;
    let class = rate.class_pos().map(|c| nu.growth().mul(&c.recip()));
    let f = |y: f64| nu.eval(y).unwrap_or(f64::NAN) / rate.eval(y);
    let mut rec = integral_record(f, class, "ν_+/R", value)?;
    rec.note = format!("{} [{}: {}]", rec.note, nu.kind(), nu.normalization_note);
    Ok(rec)
}

/// Regular test `∫^∞ e^{θy}/R(y) dy < ∞`.
pub fn regular_test(model: &LevyModel, rate: &RateFunction, theta: f64) -> Result<IntegralRecord> {
    let h2 = cramer_theta(model);
    if !h2.feasible_set.contains(theta) {
        return Err(Error::InvalidArgument(format!("θ = {theta} outside the feasible set {}", h2.feasible_set)));
    }
    regular_integral(rate, theta)
}

fn regular_integral(rate: &RateFunction, theta: f64) -> Result<IntegralRecord> {
    let class = rate.class_pos().map(|c| TailClass { rate: theta, ..TailClass::constant(1.0) }.mul(&c.recip()));
    integral_record(|y: f64| (theta * y).exp() / rate.eval(y), class, "e^(θy)/R", true)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Verdict {
    Entrance,
    RegularContinuous { theta: f64 },
    RegularJumpIn { theta_set: FeasibleSet },
    NoExtension { reason: String },
    Indeterminate { reason: String },
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Entrance => "Entrance",
            Verdict::RegularContinuous { .. } => "RegularContinuous",
            Verdict::RegularJumpIn { .. } => "RegularJumpIn",
            Verdict::NoExtension { .. } => "NoExtension",
            Verdict::Indeterminate { .. } => "Indeterminate",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::RegularContinuous { theta } => write!(f, "RegularContinuous(θ={theta})"),
            Verdict::RegularJumpIn { theta_set } => write!(f, "RegularJumpIn(θ∈{theta_set})"),
            Verdict::NoExtension { reason } => write!(f, "NoExtension({reason})"),
            Verdict::Indeterminate { reason } => write!(f, "Indeterminate({reason})"),
            Verdict::Entrance => write!(f, "Entrance"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularIntegral {
    pub theta: f64,
    #[serde(flatten)]
    pub record: IntegralRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryReport {
    pub model: LevyModel,
    pub rate: String,
    pub h1: H1Record,
    pub h2: H2Record,
    pub entrance_integral: Option<IntegralRecord>,
    pub regular_integrals: Vec<RegularIntegral>,
    /// θ with `E[e^{-θξ_1}] < 1` and a finite regular integral.
    pub jump_in_set: Option<FeasibleSet>,
    pub verdict: Verdict,
    pub explosion_expected: bool,
}

/// Largest θ-interval `(0, hi)` on which `e^{θy}/R(y)` is integrable.
fn rate_theta_bound(rate: &RateFunction) -> Option<(f64, bool)> {
    rate.class_pos().map(|c| {
        let at_edge = TailClass { rate: c.rate, ..TailClass::constant(1.0) }.mul(&c.recip());
        (c.rate, at_edge.integrable(End::PosInf))
    })
}

/// Combines (H1), (H2) and the integral tests into a verdict.
pub fn classify_boundary(model: &LevyModel, rate: &RateFunction) -> BoundaryReport {
    let h1 = check_h1(model);
    let c = cramer_theta(model);
    let h2 = H2Record { feasible_set: c.feasible_set, cramer_root: c.root };
    let mut report = BoundaryReport {
        model: model.clone(),
        rate: rate.source.clone(),
        h1,
        h2,
        entrance_integral: None,
        regular_integrals: Vec::new(),
        jump_in_set: None,
        verdict: Verdict::Indeterminate { reason: String::new() },
        explosion_expected: false,
    };
    report.explosion_expected = explosion_expected(model, rate);
    report.verdict = match decide(model, rate, &mut report) {
        Ok(v) => v,
        Err(e) => Verdict::Indeterminate { reason: e.to_string() },
    };
    report
}

fn decide(model: &LevyModel, rate: &RateFunction, report: &mut BoundaryReport) -> Result<Verdict> {
    let ent = entrance_integral(model, rate, report.h1.holds)?;
    let entrance_finite = ent.finite;
    report.entrance_integral = Some(ent);
    if report.h1.holds {
        if entrance_finite {
            return Ok(Verdict::Entrance);
        }
        return Ok(Verdict::NoExtension { reason: "(H1) holds but ∫ ν_+/R diverges".into() });
    }
    let fs = report.h2.feasible_set;
    if fs.empty {
        return Ok(Verdict::NoExtension { reason: format!("(H1) fails ({}) and (H2) fails", report.h1.detail) });
    }
    // jump-in candidates: strict part of the feasible set, cut by the rate's integrability bound
    let strict = FeasibleSet { hi_closed: fs.hi_closed && report.h2.cramer_root.is_none(), ..fs };
    let jump_in = match rate_theta_bound(rate) {
        Some((q, edge)) if q < strict.hi => FeasibleSet { empty: q <= 0.0, hi: q, hi_closed: edge },
        Some((q, edge)) if q == strict.hi => FeasibleSet { hi_closed: strict.hi_closed && edge, ..strict },
        Some(_) => strict,
        None => return Err(Error::UnknownTail(format!("tail class of R = {} unknown", rate.source))),
    };
    let probe = if jump_in.hi.is_finite() { 0.5 * jump_in.hi } else { 1.0 };
    if !jump_in.empty {
        report.regular_integrals.push(RegularIntegral { theta: probe, record: regular_integral(rate, probe)? });
        report.jump_in_set = Some(jump_in);
    }
    if let Some(root) = report.h2.cramer_root {
        let rec = regular_integral(rate, root)?;
        let finite = rec.finite;
        report.regular_integrals.push(RegularIntegral { theta: root, record: rec });
        if finite {
            return Ok(Verdict::RegularContinuous { theta: root });
        }
        return Ok(Verdict::NoExtension {
            reason: format!("Cramér root θ = {root} but ∫ e^(θy)/R diverges"),
        });
    }
    if !jump_in.empty {
        return Ok(Verdict::RegularJumpIn { theta_set: jump_in });
    }
    Ok(Verdict::NoExtension { reason: "no θ with E[e^(-θξ_1)] < 1 and ∫ e^(θy)/R < ∞".into() })
}

/// Explosion heuristic: upward drift with `∫^∞ U(dy)/R(y) < ∞`, where the
/// potential density grows like `y^{p-1}` for `ν_+ ~ y^p`.
pub fn explosion_expected(model: &LevyModel, rate: &RateFunction) -> bool {
    if !(model.mean() > 0.0) {
        return false;
    }
    let p = match model.stable_params() {
        Some((alpha, _)) if alpha < 1.0 => alpha,
        _ => 1.0,
    };
    match rate.class_pos() {
        Some(c) => TailClass::power_law(1.0, p - 1.0).mul(&c.recip()).integrable(End::PosInf),
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::parse_rate;

    fn bessel(lambda: f64) -> LevyModel {
        LevyModel::brownian(lambda, 4.0).unwrap()
    }

    #[test]
    fn h1_examples() {
        let h = check_h1(&LevyModel::brownian(-1.0, 1.0).unwrap());
        assert!(h.holds && h.branch == Some(H1Branch::NegativeMean));
        let h = check_h1(&LevyModel::stable(1.5, 1.0).unwrap());
        assert!(h.holds && h.branch == Some(H1Branch::FamilyFact));
        assert!(!check_h1(&LevyModel::stable(0.8, 1.0).unwrap()).holds);
        let two = JumpLaw::TwoSidedExponential { mean_up: 1.0, mean_down: 1.0, p_up: 0.5 };
        let h = check_h1(&LevyModel::compound_poisson(0.0, 1.0, two).unwrap());
        assert!(h.holds && h.branch == Some(H1Branch::ZeroMeanIntegral), "{h:?}");
    }

    #[test]
    fn zero_mean_integral_closed_form() {
        // symmetric exponential(1), rate 1: Π̄±(u) = e^{-u}/2, D(u) = (1 - e^{-u})/2
        let law = JumpLaw::TwoSidedExponential { mean_up: 1.0, mean_down: 1.0, p_up: 0.5 };
        let v = zero_mean_integral(1.0, &law);
        let oracle = quad::integrate_tail(
            |u: f64| u * (-u).exp() / (1.0 - (-u).exp()),
            1.0,
            Decay::Exponential { rate: 1.0 },
            1e-12,
        );
        assert!((v - oracle).abs() < 1e-7 * oracle, "{v} vs {oracle}");
    }

    #[test]
    fn entrance_examples() {
        let bm = LevyModel::brownian(0.0, 1.0).unwrap();
        assert!(entrance_test(&bm, &parse_rate("max(1,x)^3").unwrap()).unwrap().finite);
        assert!(!entrance_test(&bm, &parse_rate("max(1,x)^2").unwrap()).unwrap().finite);
        let st = LevyModel::stable(1.5, 1.0).unwrap();
        assert!(entrance_test(&st, &parse_rate("max(1,x)^2").unwrap()).unwrap().finite);
        assert!(!entrance_test(&st, &parse_rate("max(1,x)^1.5").unwrap()).unwrap().finite);
        let r = entrance_test(&LevyModel::brownian(-1.0, 4.0).unwrap(), &parse_rate("exp(x/2)").unwrap()).unwrap();
        assert!(r.finite && r.value.unwrap() > 0.0);
    }

    #[test]
    fn regular_examples() {
        let m = bessel(1.0);
        let r = parse_rate("exp(x)").unwrap();
        assert!(regular_integral(&r, 0.5).unwrap().finite);
        assert!(!regular_integral(&r, 1.5).unwrap().finite);
        assert!(!regular_integral(&r, 1.0).unwrap().finite);
        assert!(regular_integral(&parse_rate("exp(2*x)").unwrap(), 1.0).unwrap().finite);
        assert!(regular_test(&m, &r, 0.4).is_ok());
        assert!(regular_test(&m, &r, 0.6).is_err());
        let v = regular_integral(&r, 0.5).unwrap().value.unwrap();
        assert!((v - 2.0).abs() < 1e-8);
    }

    #[test]
    fn bessel_sweep() {
        let r = parse_rate("exp(x)").unwrap();
        for lambda in [-1.0, 0.0] {
            assert_eq!(classify_boundary(&bessel(lambda), &r).verdict, Verdict::Entrance);
        }
        for lambda in [0.5, 1.0, 1.9] {
            match classify_boundary(&bessel(lambda), &r).verdict {
                Verdict::RegularContinuous { theta } => assert!((theta - lambda / 2.0).abs() < 1e-9),
                v => panic!("λ={lambda}: {v}"),
            }
        }
        for lambda in [2.0, 2.5, 4.0] {
            let rep = classify_boundary(&bessel(lambda), &r);
            assert_eq!(rep.verdict.name(), "NoExtension", "λ={lambda}");
            assert!(rep.jump_in_set.is_some());
        }
    }

    #[test]
    fn stable_dictionary() {
        let sub = LevyModel::stable(0.8, 1.0).unwrap();
        let rep = classify_boundary(&sub, &parse_rate("exp(2*x)").unwrap());
        assert_eq!(rep.verdict, Verdict::RegularJumpIn { theta_set: FeasibleSet { empty: false, hi: 2.0, hi_closed: false } });
        let st = LevyModel::stable(1.5, 1.0).unwrap();
        for (p, entrance) in [(1.2, false), (1.5, false), (2.0, true)] {
            let rep = classify_boundary(&st, &parse_rate(&format!("max(1,x)^{p}")).unwrap());
            assert_eq!(rep.verdict == Verdict::Entrance, entrance, "p={p}: {}", rep.verdict);
        }
    }

    #[test]
    fn unknown_tail_is_indeterminate() {
        let r = parse_rate("max(1,x)^2 * (2 + log(log(max(3,x))))").unwrap();
        let rep = classify_boundary(&bessel(1.0), &r);
        assert_eq!(rep.verdict.name(), "Indeterminate");
    }

    #[test]
    fn report_serializes() {
        let rep = classify_boundary(&bessel(1.0), &parse_rate("exp(x)").unwrap());
        let json = serde_json::to_string(&rep).unwrap();
        assert!(json.contains("RegularContinuous"));
    }

    #[test]
    fn explosion_heuristic() {
        assert!(explosion_expected(&LevyModel::brownian(1.0, 1.0).unwrap(), &parse_rate("exp(x)").unwrap()));
        assert!(!explosion_expected(&LevyModel::brownian(1.0, 1.0).unwrap(), &parse_rate("max(1,x)").unwrap()));
        assert!(!explosion_expected(&LevyModel::brownian(-1.0, 1.0).unwrap(), &parse_rate("exp(x)").unwrap()));
    }
}

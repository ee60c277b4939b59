//! Rate functions `R(x)`: parsing, evaluation, asymptotic classes and the
//! speed function `φ(b) = ∫_b^∞ dx / R(x)`.

mod expr;
mod parse;
mod tail;

use serde::Serialize;

pub use expr::Expr;
pub use parse::parse_expr;
pub use tail::{infer, End, Tail, TailClass};

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::quad::{self, Decay};

/// A parsed, validated rate function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFunction {
    pub source: String,
    #[serde(skip)]
    ast: Expr,
    pub tail_pos: Tail,
    pub tail_neg: Tail,
}

/// Parses and validates a rate expression.
pub fn parse_rate(src: &str) -> Result<RateFunction> {
    RateFunction::from_expr(src.trim().to_string(), parse_expr(src)?)
}

impl RateFunction {
    pub fn from_expr(source: String, ast: Expr) -> Result<Self> {
        let tail_pos = infer(&ast, End::PosInf);
        let tail_neg = infer(&ast, End::NegInf);
        let r = RateFunction { source, ast, tail_pos, tail_neg };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        for i in -10_000..=10_000 {
            let x = i as f64 * 0.01;
            let v = self.eval(x);
            if v.is_nan() || v <= 0.0 {
                return Err(Error::Domain(format!("R({x}) = {v} is not strictly positive")));
            }
        }
        match self.tail_pos {
            Tail::Zero => return Err(Error::Domain("R vanishes near +infinity".into())),
            Tail::Class(c) if c.coef <= 0.0 => {
                return Err(Error::Domain(format!("R ~ {c} is eventually negative at +infinity")))
            }
            _ => {}
        }
        match self.tail_neg {
            Tail::Class(c) if c.coef > 0.0 => {
                if !c.bounded(End::NegInf) {
                    return Err(Error::Domain(format!(
                        "R ~ {c} is unbounded as x -> -infinity, so liminf 1/R(x) = 0"
                    )));
                }
                Ok(())
            }
            Tail::Class(c) => Err(Error::Domain(format!("R ~ {c} is eventually negative at -infinity"))),
            Tail::Zero => Err(Error::Domain("R vanishes near -infinity".into())),
            Tail::Unknown => Err(Error::Domain(
                "cannot verify liminf 1/R(x) > 0 as x -> -infinity: tail class unknown".into(),
            )),
        }
    }

    #[inline]
    pub fn eval<T: Scalar>(&self, x: T) -> T {
        self.ast.eval(x)
    }

    pub fn expr(&self) -> &Expr {
        &self.ast
    }

    /// `g(z, x) = R(x) / R(z + x)`, with `g(z, +∞) = 1`.
    #[inline]
    pub fn ratio<T: Scalar>(&self, z: T, x: T) -> T {
        if x == T::infinity() {
            T::one()
        } else {
            self.eval(x) / self.eval(z + x)
        }
    }

    pub fn class_pos(&self) -> Option<TailClass> {
        self.tail_pos.class()
    }

    /// `φ(b) = ∫_b^∞ dx / R(x)`; `+∞` when the tail diverges.
    pub fn phi<T: Scalar>(&self, b: T) -> Result<T> {
        let f = |x: T| T::one() / self.eval(x);
        integrate_over_tail(f, b, self.tail_pos.class().map(|c| c.recip()), "1/R")
    }

    /// Inverse of the strictly decreasing `φ`.
    pub fn phi_inverse<T: Scalar>(&self, u: T) -> Result<T> {
        if !(u > T::zero()) || !u.is_finite() {
            return Err(Error::OutOfRange(u.as_f64()));
        }
        let mut lo = T::zero();
        let mut phi_lo = self.phi(lo)?;
        if !phi_lo.is_finite() {
            return Err(Error::OutOfRange(u.as_f64()));
        }
        // bracket: phi(lo) >= u >= phi(hi)
        let mut step = T::one();
        let (mut hi, mut phi_hi);
        if phi_lo >= u {
            hi = lo + step;
            phi_hi = phi_lo - self.segment(lo, hi);
            while phi_hi > u {
                lo = hi;
                phi_lo = phi_hi;
                step = step + step;
                hi = lo + step;
                phi_hi = phi_lo - self.segment(lo, hi);
                if !hi.is_finite() {
                    return Err(Error::OutOfRange(u.as_f64()));
                }
            }
        } else {
            hi = lo;
            while phi_lo < u {
                hi = lo;
                phi_hi = phi_lo;
                step = step + step;
                lo = hi - step;
                phi_lo = phi_hi + self.segment(lo, hi);
                if !lo.is_finite() {
                    return Err(Error::OutOfRange(u.as_f64()));
                }
            }
        }
        let tol = u * T::lit(1e-13).max(T::tol_floor());
        let mut b = lo;
        let mut phi_b = phi_lo;
        for _ in 0..200 {
            if (phi_b - u).abs() <= tol {
                return Ok(b);
            }
            // Newton step with derivative -1/R(b), falling back to bisection
            let newton = b + (phi_b - u) * self.eval(b);
            let next = if newton > lo && newton < hi { newton } else { (lo + hi) * T::lit(0.5) };
            let phi_next = phi_lo - self.segment(lo, next);
            if phi_next > u {
                lo = next;
                phi_lo = phi_next;
            } else {
                hi = next;
            }
            if next == b {
                return Ok(b);
            }
            b = next;
            phi_b = phi_next;
            if (hi - lo).abs() <= T::epsilon() * b.abs().max(T::one()) {
                return Ok(b);
            }
        }
        Ok(b)
    }

    fn segment<T: Scalar>(&self, a: T, b: T) -> T {
        quad::integrate(|x: T| T::one() / self.eval(x), a, b, T::zero(), T::lit(1e-14).max(T::tol_floor()), 400).value
    }
}

/// Decay hint for an integrable tail class at `+∞`.
pub fn decay_of<T: Scalar>(class: &TailClass) -> Decay<T> {
    if class.rate < 0.0 {
        Decay::Exponential { rate: T::lit(-class.rate) }
    } else {
        Decay::Power { exponent: T::lit(-class.power), log_exponent: T::lit(-class.log_power) }
    }
}

/// `∫_b^∞ f` deciding convergence from the class of `f` when known, and by
/// geometric-window extrapolation otherwise.
pub fn integrate_over_tail<T, F>(f: F, b: T, class: Option<TailClass>, what: &str) -> Result<T>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    let tol = T::lit(1e-12).max(T::tol_floor());
    match class {
        Some(c) => {
            if !c.integrable(End::PosInf) {
                return Ok(T::infinity());
            }
            Ok(quad::integrate_tail(f, b, decay_of(&c), tol))
        }
        None => extrapolate(f, b, what),
    }
}

/// Ratio test on consecutive window integrals.
fn extrapolate<T, F>(f: F, b: T, what: &str) -> Result<T>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    let parts = quad::window_partials(&f, b, 48, T::lit(1e-10).max(T::tol_floor()));
    let values: Vec<f64> = parts.iter().map(|p| p.1.as_f64()).collect();
    let total: f64 = values.iter().sum();
    let tail = &values[values.len() - 8..];
    let ratios: Vec<f64> = tail.windows(2).map(|w| w[1] / w[0]).collect();
    if !total.is_finite() || ratios.iter().all(|r| *r >= 1.0 - 1e-9) {
        return Ok(T::infinity());
    }
    let r_max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if r_max < 0.9 && ratios.iter().all(|r| *r >= 0.0) {
        let last = *tail.last().unwrap();
        return Ok(T::lit(total + last * r_max / (1.0 - r_max)));
    }
    if tail.iter().all(|v| v.abs() < 1e-300) {
        return Ok(T::lit(total));
    }
    Err(Error::UnknownTail(format!(
        "{what}: window ratios {:?} neither settle below 0.9 nor reach 1",
        ratios
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn standard_rates_parse() {
        let r = parse_rate("exp(x/2)").unwrap();
        assert_eq!(r.class_pos().unwrap().rate, 0.5);
        assert_eq!(r.tail_neg.class().unwrap().rate, 0.5);
        let r = parse_rate("1").unwrap();
        assert_eq!(r.class_pos().unwrap(), TailClass::constant(1.0));
    }

    #[test]
    fn violations_are_rejected() {
        assert!(matches!(parse_rate("exp(-x)"), Err(Error::Domain(_))));
        assert!(matches!(parse_rate("x"), Err(Error::Domain(_))));
        assert!(matches!(parse_rate("max(1,x)^2 - 1"), Err(Error::Domain(_))));
        assert!(matches!(parse_rate("1 +"), Err(Error::Parse { .. })));
    }

    #[test]
    fn phi_closed_forms() {
        let r = parse_rate("max(1, x)^2").unwrap();
        assert_relative_eq!(r.phi(1.0f64).unwrap(), 1.0, max_relative = 1e-9);
        assert_relative_eq!(r.phi(0.0f64).unwrap(), 2.0, max_relative = 1e-9);
        let r = parse_rate("exp(x)").unwrap();
        assert_relative_eq!(r.phi(0.0f64).unwrap(), 1.0, max_relative = 1e-9);
        assert_relative_eq!(r.phi(3.0f64).unwrap(), (-3.0f64).exp(), max_relative = 1e-9);
        let r = parse_rate("max(1, x)").unwrap();
        assert_eq!(r.phi(1.0f64).unwrap(), f64::INFINITY);
        let r = parse_rate("max(1, x)^3").unwrap();
        assert_relative_eq!(r.phi(2.0f64).unwrap(), 0.125, max_relative = 1e-9);
    }

    #[test]
    fn phi_single_precision() {
        let r = parse_rate("exp(x)").unwrap();
        assert!((r.phi(1.0f32).unwrap() - (-1.0f32).exp()).abs() < 1e-5);
    }

    #[test]
    fn phi_inverse_closed_forms() {
        let r = parse_rate("max(1,x)^2").unwrap();
        assert_relative_eq!(r.phi_inverse(0.1f64).unwrap(), 10.0, max_relative = 1e-9);
        let r = parse_rate("exp(x)").unwrap();
        assert_relative_eq!(r.phi_inverse((-3.0f64).exp()).unwrap(), 3.0, max_relative = 1e-9);
        // below zero: phi(b) = 2 - b for b < 1 ... for max(1,x)^2
        let r = parse_rate("max(1,x)^2").unwrap();
        assert_relative_eq!(r.phi_inverse(5.0f64).unwrap(), -3.0, max_relative = 1e-9);
    }

    #[test]
    fn phi_inverse_errors() {
        let r = parse_rate("max(1,x)").unwrap();
        assert!(matches!(r.phi_inverse(0.5f64), Err(Error::OutOfRange(_))));
        let r = parse_rate("exp(x)").unwrap();
        assert!(matches!(r.phi_inverse(0.0f64), Err(Error::OutOfRange(_))));
        assert!(matches!(r.phi_inverse(-1.0f64), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn unknown_tail_fallback() {
        // (x - x) cancels symbolically, so the tail is Unknown and the numerics decide
        let f = |x: f64| (-x).exp();
        assert_relative_eq!(integrate_over_tail(f, 0.0, None, "test").unwrap(), 1.0, max_relative = 1e-6);
        let g = |x: f64| 1.0 / x.max(1.0);
        assert_eq!(integrate_over_tail(g, 1.0, None, "test").unwrap(), f64::INFINITY);
        let h = |x: f64| 1.0 / (x.max(2.0) * x.max(2.0).ln());
        assert!(matches!(integrate_over_tail(h, 2.0, None, "test"), Err(Error::UnknownTail(_))));
    }
}

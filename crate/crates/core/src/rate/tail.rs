//! Asymptotic classes `c·|x|^p·(ln|x|)^k·e^{q x}` and the bottom-up rules
//! that infer them from an expression tree.

use std::cmp::Ordering;

use serde::Serialize;

use super::expr::Expr;

/// Which end of the real line an asymptotic statement refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum End {
    PosInf,
    NegInf,
}

impl End {
    fn sign(self) -> f64 {
        match self {
            End::PosInf => 1.0,
            End::NegInf => -1.0,
        }
    }
}

/// `f(x) ~ coef · |x|^power · (ln|x|)^log_power · e^{rate·x}` at the given end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailClass {
    pub coef: f64,
    pub power: f64,
    pub log_power: f64,
    pub rate: f64,
}

impl TailClass {
    pub const fn constant(c: f64) -> Self {
        TailClass { coef: c, power: 0.0, log_power: 0.0, rate: 0.0 }
    }

    pub fn power_law(coef: f64, power: f64) -> Self {
        TailClass { coef, power, log_power: 0.0, rate: 0.0 }
    }

    /// Growth key at an end; larger means asymptotically larger in magnitude.
    fn key(&self, end: End) -> (f64, f64, f64) {
        (self.rate * end.sign(), self.power, self.log_power)
    }

    pub fn mul(&self, o: &TailClass) -> TailClass {
        TailClass {
            coef: self.coef * o.coef,
            power: self.power + o.power,
            log_power: self.log_power + o.log_power,
            rate: self.rate + o.rate,
        }
    }

    pub fn recip(&self) -> TailClass {
        TailClass { coef: 1.0 / self.coef, power: -self.power, log_power: -self.log_power, rate: -self.rate }
    }

    fn powf(&self, e: f64) -> Option<TailClass> {
        let coef = if self.coef > 0.0 {
            self.coef.powf(e)
        } else if e == e.round() {
            self.coef.powi(e as i32)
        } else {
            return None;
        };
        Some(TailClass { coef, power: self.power * e, log_power: self.log_power * e, rate: self.rate * e })
    }

    /// Whether `∫ |f|` converges at the given end. Borderline classes diverge.
    pub fn integrable(&self, end: End) -> bool {
        let (q, p, k) = self.key(end);
        q < 0.0 || (q == 0.0 && (p < -1.0 || (p == -1.0 && k < -1.0)))
    }

    /// Whether `|f|` stays bounded at the given end.
    pub fn bounded(&self, end: End) -> bool {
        let (q, p, k) = self.key(end);
        q < 0.0 || (q == 0.0 && (p < 0.0 || (p == 0.0 && k <= 0.0)))
    }

    pub fn cmp_growth(&self, o: &TailClass, end: End) -> Ordering {
        let a = self.key(end);
        let b = o.key(end);
        a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2))
    }
}

impl std::fmt::Display for TailClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.coef)?;
        if self.power != 0.0 {
            write!(f, "·|x|^{}", self.power)?;
        }
        if self.log_power != 0.0 {
            write!(f, "·ln|x|^{}", self.log_power)?;
        }
        if self.rate != 0.0 {
            write!(f, "·e^({}x)", self.rate)?;
        }
        Ok(())
    }
}

/// Result of asymptotic inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Tail {
    /// Identically zero near the end.
    Zero,
    Class(TailClass),
    Unknown,
}

impl Tail {
    pub fn class(self) -> Option<TailClass> {
        match self {
            Tail::Class(c) => Some(c),
            _ => None,
        }
    }

    fn neg(self) -> Tail {
        match self {
            Tail::Class(c) => Tail::Class(TailClass { coef: -c.coef, ..c }),
            t => t,
        }
    }
}

fn add(a: Tail, b: Tail, end: End) -> Tail {
    match (a, b) {
        (Tail::Unknown, _) | (_, Tail::Unknown) => Tail::Unknown,
        (Tail::Zero, t) | (t, Tail::Zero) => t,
        (Tail::Class(x), Tail::Class(y)) => match x.cmp_growth(&y, end) {
            Ordering::Greater => Tail::Class(x),
            Ordering::Less => Tail::Class(y),
            Ordering::Equal => {
                let c = x.coef + y.coef;
                if c.abs() <= 1e-12 * x.coef.abs().max(y.coef.abs()) {
                    // leading terms cancel; next order unknown
                    Tail::Unknown
                } else {
                    Tail::Class(TailClass { coef: c, ..x })
                }
            }
        },
    }
}

fn max(a: Tail, b: Tail, end: End) -> Tail {
    match (a, b) {
        (Tail::Unknown, _) | (_, Tail::Unknown) => Tail::Unknown,
        (Tail::Zero, Tail::Zero) => Tail::Zero,
        (Tail::Zero, Tail::Class(c)) | (Tail::Class(c), Tail::Zero) => {
            if c.coef > 0.0 {
                Tail::Class(c)
            } else {
                Tail::Zero
            }
        }
        (Tail::Class(x), Tail::Class(y)) => {
            let pick = match (x.coef > 0.0, y.coef > 0.0) {
                (true, false) => x,
                (false, true) => y,
                (true, true) => match x.cmp_growth(&y, end) {
                    Ordering::Greater => x,
                    Ordering::Less => y,
                    Ordering::Equal => {
                        if x.coef >= y.coef {
                            x
                        } else {
                            y
                        }
                    }
                },
                (false, false) => match x.cmp_growth(&y, end) {
                    Ordering::Greater => y,
                    Ordering::Less => x,
                    Ordering::Equal => {
                        if x.coef >= y.coef {
                            x
                        } else {
                            y
                        }
                    }
                },
            };
            Tail::Class(pick)
        }
    }
}

/// `exp(arg)` for arguments of the form `k·log(b)`.
fn log_multiple(arg: &Expr) -> Option<(f64, &Expr)> {
    match arg {
        Expr::Log(b) => Some((1.0, b)),
        Expr::Mul(a, b) => match (a.as_ref(), b.as_ref()) {
            (k, Expr::Log(inner)) | (Expr::Log(inner), k) if k.is_constant() => Some((k.eval(0.0f64), inner)),
            _ => None,
        },
        _ => None,
    }
}

/// Infers the asymptotic class of `expr` at `end`.
pub fn infer(expr: &Expr, end: End) -> Tail {
    match expr {
        Expr::Const(c) => {
            if *c == 0.0 {
                Tail::Zero
            } else {
                Tail::Class(TailClass::constant(*c))
            }
        }
        Expr::X => Tail::Class(TailClass::power_law(end.sign(), 1.0)),
        Expr::Neg(a) => infer(a, end).neg(),
        Expr::Add(a, b) => add(infer(a, end), infer(b, end), end),
        Expr::Sub(a, b) => add(infer(a, end), infer(b, end).neg(), end),
        Expr::Mul(a, b) => match (infer(a, end), infer(b, end)) {
            (Tail::Unknown, _) | (_, Tail::Unknown) => Tail::Unknown,
            (Tail::Zero, _) | (_, Tail::Zero) => Tail::Zero,
            (Tail::Class(x), Tail::Class(y)) => Tail::Class(x.mul(&y)),
        },
        Expr::Div(a, b) => match (infer(a, end), infer(b, end)) {
            (Tail::Unknown, _) | (_, Tail::Unknown) | (_, Tail::Zero) => Tail::Unknown,
            (Tail::Zero, _) => Tail::Zero,
            (Tail::Class(x), Tail::Class(y)) => Tail::Class(x.mul(&y.recip())),
        },
        Expr::Pow(base, ex) => {
            if ex.is_constant() {
                let e = ex.eval(0.0f64);
                match infer(base, end) {
                    Tail::Zero if e > 0.0 => Tail::Zero,
                    Tail::Class(c) => c.powf(e).map(Tail::Class).unwrap_or(Tail::Unknown),
                    _ => Tail::Unknown,
                }
            } else if base.is_constant() && base.eval(0.0f64) > 0.0 {
                let k = base.eval(0.0f64).ln();
                infer(&Expr::Exp(Box::new(Expr::Mul(Box::new(Expr::Const(k)), ex.clone()))), end)
            } else {
                Tail::Unknown
            }
        }
        Expr::Exp(arg) => {
            if let Some((slope, intercept)) = arg.affine() {
                return Tail::Class(TailClass { coef: intercept.exp(), power: 0.0, log_power: 0.0, rate: slope });
            }
            if let Some((k, inner)) = log_multiple(arg) {
                return match infer(inner, end) {
                    Tail::Class(c) if c.coef > 0.0 => c.powf(k).map(Tail::Class).unwrap_or(Tail::Unknown),
                    _ => Tail::Unknown,
                };
            }
            Tail::Unknown
        }
        Expr::Log(arg) => match infer(arg, end) {
            Tail::Class(c) if c.coef > 0.0 => {
                if c.rate != 0.0 {
                    Tail::Class(TailClass::power_law(c.rate * end.sign(), 1.0))
                } else if c.power != 0.0 {
                    Tail::Class(TailClass { coef: c.power, power: 0.0, log_power: 1.0, rate: 0.0 })
                } else if c.log_power != 0.0 {
                    Tail::Unknown
                } else if c.coef != 1.0 {
                    Tail::Class(TailClass::constant(c.coef.ln()))
                } else {
                    Tail::Unknown
                }
            }
            _ => Tail::Unknown,
        },
        Expr::Max(a, b) => max(infer(a, end), infer(b, end), end),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::parse::parse_expr;

    fn cls(src: &str, end: End) -> TailClass {
        infer(&parse_expr(src).unwrap(), end).class().unwrap_or_else(|| panic!("{src} has no class"))
    }

    #[test]
    fn exponentials() {
        let c = cls("exp(x/2)", End::PosInf);
        assert_eq!((c.coef, c.rate), (1.0, 0.5));
        let c = cls("exp(x/2)", End::NegInf);
        assert_eq!(c.rate, 0.5);
        assert!(c.bounded(End::NegInf));
        assert!(!cls("exp(-x)", End::NegInf).bounded(End::NegInf));
        let c = cls("3*exp(2*x+1)", End::PosInf);
        assert!((c.coef - 3.0 * 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn powers_and_max() {
        let c = cls("max(1, x)^2", End::PosInf);
        assert_eq!((c.coef, c.power), (1.0, 2.0));
        let c = cls("max(1, x)^2", End::NegInf);
        assert_eq!((c.coef, c.power), (1.0, 0.0));
        let c = cls("max(1,x)^2 + 1", End::PosInf);
        assert_eq!(c.power, 2.0);
        let c = cls("x^2 + x", End::NegInf);
        assert_eq!((c.coef, c.power), (1.0, 2.0));
        assert!(matches!(infer(&parse_expr("x - x").unwrap(), End::PosInf), Tail::Unknown));
    }

    #[test]
    fn logs() {
        let c = cls("max(2, x) * log(max(2, x))", End::PosInf);
        assert_eq!((c.power, c.log_power), (1.0, 1.0));
        assert!(!c.recip().integrable(End::PosInf));
        let c = cls("log(exp(3*x))", End::PosInf);
        assert_eq!((c.coef, c.power), (3.0, 1.0));
        let c = cls("exp(2*log(max(1,x)))", End::PosInf);
        assert_eq!(c.power, 2.0);
    }

    #[test]
    fn integrability() {
        assert!(TailClass::power_law(1.0, -2.0).integrable(End::PosInf));
        assert!(!TailClass::power_law(1.0, -1.0).integrable(End::PosInf));
        let borderline = TailClass { coef: 1.0, power: -1.0, log_power: -2.0, rate: 0.0 };
        assert!(borderline.integrable(End::PosInf));
        let exp = TailClass { coef: 1.0, power: 5.0, log_power: 0.0, rate: -0.1 };
        assert!(exp.integrable(End::PosInf));
        assert!(!exp.integrable(End::NegInf));
    }
}

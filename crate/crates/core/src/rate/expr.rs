use serde::Serialize;

use crate::num::Scalar;

/// Expression tree for a rate function of one variable `x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Expr {
    Const(f64),
    X,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn eval<T: Scalar>(&self, x: T) -> T {
        match self {
            Expr::Const(c) => T::lit(*c),
            Expr::X => x,
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, b) => {
                let base = a.eval(x);
                let e = b.eval(x);
                // integer exponents keep negative bases meaningful
                if e == e.round() && e.abs() < T::lit(1024.0) {
                    base.powi(e.to_i32().unwrap_or(0))
                } else {
                    base.powf(e)
                }
            }
            Expr::Exp(a) => a.eval(x).exp(),
            Expr::Log(a) => a.eval(x).ln(),
            Expr::Max(a, b) => a.eval(x).max(b.eval(x)),
        }
    }

    /// True when the subtree does not mention `x`.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::X => false,
            Expr::Neg(a) | Expr::Exp(a) | Expr::Log(a) => a.is_constant(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b)
            | Expr::Max(a, b) => a.is_constant() && b.is_constant(),
        }
    }

    /// Exact affine decomposition `slope * x + intercept`, when the tree is affine.
    pub fn affine(&self) -> Option<(f64, f64)> {
        match self {
            Expr::Const(c) => Some((0.0, *c)),
            Expr::X => Some((1.0, 0.0)),
            Expr::Neg(a) => a.affine().map(|(s, c)| (-s, -c)),
            Expr::Add(a, b) => {
                let (s1, c1) = a.affine()?;
                let (s2, c2) = b.affine()?;
                Some((s1 + s2, c1 + c2))
            }
            Expr::Sub(a, b) => {
                let (s1, c1) = a.affine()?;
                let (s2, c2) = b.affine()?;
                Some((s1 - s2, c1 - c2))
            }
            Expr::Mul(a, b) => {
                let (s1, c1) = a.affine()?;
                let (s2, c2) = b.affine()?;
                if s1 != 0.0 && s2 != 0.0 {
                    return None;
                }
                Some((s1 * c2 + s2 * c1, c1 * c2))
            }
            Expr::Div(a, b) => {
                let (s1, c1) = a.affine()?;
                let (s2, c2) = b.affine()?;
                if s2 != 0.0 || c2 == 0.0 {
                    return None;
                }
                Some((s1 / c2, c1 / c2))
            }
            _ if self.is_constant() => Some((0.0, self.eval(0.0f64))),
            _ => None,
        }
    }
}

impl std::fmt::Display for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::X => write!(f, "x"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Log(a) => write!(f, "log({a})"),
            Expr::Max(a, b) => write!(f, "max({a}, {b})"),
        }
    }
}

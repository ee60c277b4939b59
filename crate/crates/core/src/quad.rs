//! Adaptive Gauss-Kronrod quadrature and improper tail integrals.

use crate::num::Scalar;

// 15-point Kronrod nodes on [0, 1] (symmetric half) with Kronrod and Gauss weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub abs_error: T,
    pub intervals: usize,
}

fn gk15<T: Scalar, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let half = (b - a) * T::lit(0.5);
    let center = (a + b) * T::lit(0.5);
    let fc = f(center);
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for (j, &x) in XGK.iter().enumerate().take(7) {
        let dx = half * T::lit(x);
        let s = f(center - dx) + f(center + dx);
        kronrod = kronrod + s * T::lit(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + s * T::lit(WG[j / 2]);
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (value, err)
}

/// Globally adaptive G7/K15 on a finite interval.
///
/// Bisects the interval with the largest error estimate until
/// `err <= max(abs_tol, rel_tol * |value|)` or `max_intervals` is reached.
pub fn integrate<T, F>(f: F, a: T, b: T, abs_tol: T, rel_tol: T, max_intervals: usize) -> QuadResult<T>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    if a == b {
        return QuadResult { value: T::zero(), abs_error: T::zero(), intervals: 0 };
    }
    let (v, e) = gk15(&f, a, b);
    let mut parts: Vec<(T, T, T, T)> = vec![(a, b, v, e)];
    let mut value = v;
    let mut err = e;
    let floor = T::tol_floor();
    while parts.len() < max_intervals {
        let target = abs_tol.max(rel_tol.max(floor) * value.abs());
        if err <= target {
            break;
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (lo, hi, pv, pe) = parts.swap_remove(idx);
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            // interval exhausted at this precision
            parts.push((lo, hi, pv, T::zero()));
            err = err - pe;
            continue;
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        value = value - pv + v1 + v2;
        err = err - pe + e1 + e2;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    // re-sum to shed accumulated cancellation
    let value = parts.iter().fold(T::zero(), |s, p| s + p.2);
    let abs_error = parts.iter().fold(T::zero(), |s, p| s + p.3);
    QuadResult { value, abs_error, intervals: parts.len() }
}

/// Leading-order decay of an integrand used to close a tail integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decay<T> {
    /// `f(x) ~ poly(x) e^{-rate x}` with `rate > 0`.
    Exponential { rate: T },
    /// `f(x) ~ x^{-exponent} (ln x)^{-log_exponent}`, integrable: `exponent > 1`,
    /// or `exponent == 1` with `log_exponent > 1`.
    Power { exponent: T, log_exponent: T },
}

impl<T: Scalar> Decay<T> {
    /// Estimate of `∫_u^∞ f` from the integrand value at `u`.
    fn remainder(&self, fu: T, u: T) -> T {
        match *self {
            Decay::Exponential { rate } => fu / rate,
            Decay::Power { exponent, log_exponent } => {
                if exponent > T::one() {
                    fu * u.abs() / (exponent - T::one())
                } else {
                    fu * u.abs() * u.abs().ln() / (log_exponent - T::one())
                }
            }
        }
    }
}

/// Next window edge: windows grow geometrically once away from the origin.
pub(crate) fn next_edge<T: Scalar>(x: T) -> T {
    x + x.abs().max(T::one())
}

/// `∫_b^∞ f` for an integrand with known decay, summing geometric windows
/// and closing with the analytic remainder.
pub fn integrate_tail<T, F>(f: F, b: T, decay: Decay<T>, rel_tol: T) -> T
where
    T: Scalar,
    F: Fn(T) -> T,
{
    let rel_tol = rel_tol.max(T::tol_floor());
    let mut lo = b;
    let mut sum = T::zero();
    for _ in 0..400 {
        let hi = next_edge(lo);
        let part = integrate(&f, lo, hi, T::zero(), rel_tol * T::lit(0.1), 200).value;
        sum = sum + part;
        let fu = f(hi);
        if !fu.is_finite() {
            return T::infinity();
        }
        let rem = decay.remainder(fu, hi);
        lo = hi;
        let scale = sum.abs().max(T::min_positive_value());
        if hi >= T::one() && rem.abs() <= rel_tol * scale && part.abs() <= scale {
            return sum + rem;
        }
        if fu == T::zero() {
            return sum;
        }
    }
    sum
}

/// Partial integrals over consecutive geometric windows starting at `b`.
pub fn window_partials<T, F>(f: F, b: T, windows: usize, rel_tol: T) -> Vec<(T, T)>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    let mut out = Vec::with_capacity(windows);
    let mut lo = b;
    for _ in 0..windows {
        let hi = next_edge(lo);
        let part = integrate(&f, lo, hi, T::zero(), rel_tol, 200).value;
        out.push((hi, part));
        lo = hi;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x: f64| 3.0 * x * x, 0.0, 2.0, 0.0, 1e-12, 50);
        assert_relative_eq!(r.value, 8.0, max_relative = 1e-14);
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, 0.0, 1e-10, 500);
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-8);
    }

    #[test]
    fn works_in_single_precision() {
        let r = integrate(|x: f32| x.exp(), 0.0, 1.0, 0.0, 1e-6, 50);
        assert!((r.value - (1f32.exp() - 1.0)).abs() < 1e-5);
    }

    #[test]
    fn tails() {
        let e = integrate_tail(|x: f64| (-x).exp(), 0.0, Decay::Exponential { rate: 1.0 }, 1e-12);
        assert_relative_eq!(e, 1.0, max_relative = 1e-10);
        let p = integrate_tail(|x: f64| x.powi(-2), 1.0, Decay::Power { exponent: 2.0, log_exponent: 0.0 }, 1e-12);
        assert_relative_eq!(p, 1.0, max_relative = 1e-8);
        let slow = integrate_tail(|x: f64| x.powf(-1.5), 1.0, Decay::Power { exponent: 1.5, log_exponent: 0.0 }, 1e-10);
        assert_relative_eq!(slow, 2.0, max_relative = 1e-6);
    }
}

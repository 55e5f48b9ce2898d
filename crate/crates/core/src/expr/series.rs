//! Local power-law expansions.
//!
//! Near a finite point `p` an expression is expanded in `τ = |x − p|`, near
//! `±∞` in `τ = 1/|x|`, as a truncated generalized power series
//! `Σ cᵢ τ^{eᵢ} + O(τ^h)`. The leading term gives the local exponent. Every
//! operation tracks the horizon `h` up to which the expansion is exact, so a
//! reported exponent is never a guess: when cancellation or an essential
//! singularity makes the leading term unknowable, no exponent is returned.

use super::{BinOp, Expr, Func};

/// Side from which a point is approached.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// From below: `x ↑ p`.
    Left,
    /// From above: `x ↓ p`.
    Right,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }

    pub fn flip(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

const MAX_TERMS: usize = 8;
const EXP_TOL: f64 = 1e-9;
const CANCEL_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
struct Series {
    /// Ascending exponents, nonzero coefficients.
    terms: Vec<(f64, f64)>,
    /// All omitted terms are `O(τ^horizon)`; `INFINITY` means exact.
    horizon: f64,
}

impl Series {
    fn zero() -> Series {
        Series {
            terms: Vec::new(),
            horizon: f64::INFINITY,
        }
    }

    fn constant(c: f64) -> Series {
        if c == 0.0 {
            Series::zero()
        } else {
            Series {
                terms: vec![(c, 0.0)],
                horizon: f64::INFINITY,
            }
        }
    }

    fn is_exact_zero(&self) -> bool {
        self.terms.is_empty() && self.horizon == f64::INFINITY
    }

    /// Exponent of the dominant part (the horizon if no term is known).
    fn order(&self) -> f64 {
        self.terms.first().map_or(self.horizon, |t| t.1)
    }

    fn normalize(mut terms: Vec<(f64, f64)>, horizon: f64) -> Series {
        terms.retain(|t| t.1 < horizon - EXP_TOL);
        terms.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut merged: Vec<(f64, f64, f64)> = Vec::new(); // (coef, exp, magnitude)
        for (c, e) in terms {
            match merged.last_mut() {
                Some(last) if (last.1 - e).abs() <= EXP_TOL => {
                    last.0 += c;
                    last.2 = last.2.max(c.abs());
                }
                _ => merged.push((c, e, c.abs())),
            }
        }
        let mut out: Vec<(f64, f64)> = merged
            .into_iter()
            .filter(|(c, _, mag)| c.abs() > CANCEL_TOL * mag)
            .map(|(c, e, _)| (c, e))
            .collect();
        let mut horizon = horizon;
        if out.len() > MAX_TERMS {
            horizon = out[MAX_TERMS].1;
            out.truncate(MAX_TERMS);
        }
        Series { terms: out, horizon }
    }

    fn add(&self, other: &Series) -> Series {
        let horizon = self.horizon.min(other.horizon);
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Series::normalize(terms, horizon)
    }

    fn neg(&self) -> Series {
        Series {
            terms: self.terms.iter().map(|&(c, e)| (-c, e)).collect(),
            horizon: self.horizon,
        }
    }

    fn scale(&self, k: f64) -> Series {
        if k == 0.0 {
            return Series::zero();
        }
        Series {
            terms: self.terms.iter().map(|&(c, e)| (c * k, e)).collect(),
            horizon: self.horizon,
        }
    }

    fn mul(&self, other: &Series) -> Series {
        if self.is_exact_zero() || other.is_exact_zero() {
            return Series::zero();
        }
        let horizon = (self.horizon + other.order()).min(other.horizon + self.order());
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for &(a, ea) in &self.terms {
            for &(b, eb) in &other.terms {
                terms.push((a * b, ea + eb));
            }
        }
        Series::normalize(terms, horizon)
    }

    /// Splits `c₀ τ^{e₀} (1 + u)`; `None` if no leading term is known.
    fn factor(&self) -> Option<(f64, f64, Series)> {
        let &(c0, e0) = self.terms.first()?;
        let u = Series {
            terms: self.terms[1..].iter().map(|&(c, e)| (c / c0, e - e0)).collect(),
            horizon: self.horizon - e0,
        };
        Some((c0, e0, u))
    }

    /// `Σ_{n≥0} coef(n) uⁿ` for `u = o(1)`, truncated consistently.
    fn compose(u: &Series, coef: impl Fn(usize) -> f64, terminates_at: Option<usize>) -> Series {
        if u.is_exact_zero() {
            return Series::constant(coef(0));
        }
        let du = u.order();
        debug_assert!(du > 0.0);
        let n_max = terminates_at.unwrap_or(MAX_TERMS);
        let mut acc = Series::constant(coef(0));
        let mut un = Series::constant(1.0);
        for n in 1..=n_max {
            un = un.mul(u);
            let c = coef(n);
            if c != 0.0 {
                acc = acc.add(&un.scale(c));
            }
        }
        if terminates_at.is_none() {
            let rem = (n_max as f64 + 1.0) * du;
            acc = Series::normalize(acc.terms, acc.horizon.min(rem));
        }
        acc
    }

    fn shift(&self, c: f64, e: f64) -> Series {
        Series {
            terms: self.terms.iter().map(|&(a, x)| (a * c, x + e)).collect(),
            horizon: self.horizon + e,
        }
    }

    fn powc(&self, k: f64) -> Option<Series> {
        if self.is_exact_zero() {
            return if k > 0.0 { Some(Series::zero()) } else { None };
        }
        let (c0, e0, u) = self.factor()?;
        let integral = k.fract() == 0.0;
        let lead = if c0 > 0.0 {
            c0.powf(k)
        } else if integral {
            let odd = (k.abs() as u64) % 2 == 1;
            c0.abs().powf(k) * if odd { -1.0 } else { 1.0 }
        } else {
            return None;
        };
        if u.order() <= 0.0 {
            return None;
        }
        let terminates = (integral && k >= 0.0 && u.horizon == f64::INFINITY).then_some(k as usize);
        let body = Series::compose(&u, |n| binomial(k, n), terminates);
        Some(body.shift(lead, k * e0))
    }

    fn exp(&self) -> Option<Series> {
        if self.terms.iter().any(|t| t.1 < -EXP_TOL) {
            return None;
        }
        if self.order() < -EXP_TOL {
            return None;
        }
        let c = self.terms.iter().find(|t| t.1.abs() <= EXP_TOL).map_or(0.0, |t| t.0);
        let u = Series {
            terms: self.terms.iter().copied().filter(|t| t.1 > EXP_TOL).collect(),
            horizon: self.horizon,
        };
        if u.order() <= 0.0 {
            return None;
        }
        let body = Series::compose(&u, |n| 1.0 / factorial(n), None);
        Some(body.scale(c.exp()))
    }

    fn ln(&self) -> Option<Series> {
        let (c0, e0, u) = self.factor()?;
        if e0.abs() > EXP_TOL || c0 <= 0.0 || u.order() <= 0.0 {
            return None;
        }
        let body = Series::compose(
            &u,
            |n| {
                if n == 0 {
                    0.0
                } else {
                    let s = if n % 2 == 1 { 1.0 } else { -1.0 };
                    s / n as f64
                }
            },
            None,
        );
        Some(body.add(&Series::constant(c0.ln())))
    }
}

fn binomial(k: f64, n: usize) -> f64 {
    (0..n).fold(1.0, |acc, i| acc * (k - i as f64) / (i as f64 + 1.0))
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

#[derive(Clone, Copy)]
enum Point {
    Finite(f64, f64),
    Infinite(f64),
}

fn expand(e: &Expr, at: Point) -> Option<Series> {
    Some(match e {
        Expr::Num(v) => Series::constant(*v),
        Expr::X => match at {
            Point::Finite(p, s) => Series::normalize(vec![(p, 0.0), (s, 1.0)], f64::INFINITY),
            Point::Infinite(s) => Series::normalize(vec![(s, -1.0)], f64::INFINITY),
        },
        Expr::Neg(a) => expand(a, at)?.neg(),
        Expr::Bin(op, a, b) => {
            let sa = expand(a, at)?;
            match op {
                BinOp::Pow => return pow(&sa, b, at),
                _ => {
                    let sb = expand(b, at)?;
                    match op {
                        BinOp::Add => sa.add(&sb),
                        BinOp::Sub => sa.add(&sb.neg()),
                        BinOp::Mul => sa.mul(&sb),
                        BinOp::Div => sa.mul(&sb.powc(-1.0)?),
                        BinOp::Pow => unreachable!(),
                    }
                }
            }
        }
        Expr::Call(f, args) => {
            let sa = expand(&args[0], at)?;
            match f {
                Func::Exp => sa.exp()?,
                Func::Log => sa.ln()?,
                Func::Sqrt => sa.powc(0.5)?,
                Func::Abs => {
                    if sa.is_exact_zero() {
                        sa
                    } else {
                        let &(c0, _) = sa.terms.first()?;
                        if c0 < 0.0 {
                            sa.neg()
                        } else {
                            sa
                        }
                    }
                }
                Func::Sign => {
                    if sa.is_exact_zero() {
                        Series::zero()
                    } else {
                        Series::constant(sa.terms.first()?.0.signum())
                    }
                }
                Func::Pow => return pow(&sa, &args[1], at),
            }
        }
    })
}

fn pow(base: &Series, exponent: &Expr, at: Point) -> Option<Series> {
    if let Some(k) = exponent.constant_value() {
        return base.powc(k);
    }
    let se = expand(exponent, at)?;
    se.mul(&base.ln()?).exp()
}

/// Local form of an expression near a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LocalBehavior {
    /// Identically zero near the point.
    Zero,
    /// `coef·|x − p|^exponent` (or `coef·|x|^exponent` at infinity), with the
    /// remainder of order `next` in the same convention.
    Power { coef: f64, exponent: f64, next: f64 },
}

/// Leading power-law term of `e` near `p` approached from `side`; ignored
/// for infinite `p`.
pub fn local_behavior(e: &Expr, p: crate::scalar::ExtendedReal<f64>, side: Side) -> Option<LocalBehavior> {
    use crate::scalar::ExtendedReal as X;
    let (at, flip) = match p {
        X::Finite(v) => (Point::Finite(v, side.sign()), 1.0),
        X::PosInf => (Point::Infinite(1.0), -1.0),
        X::NegInf => (Point::Infinite(-1.0), -1.0),
    };
    let s = expand(e, at)?;
    if s.is_exact_zero() {
        return Some(LocalBehavior::Zero);
    }
    let &(coef, e0) = s.terms.first()?;
    let next = s.terms.get(1).map_or(s.horizon, |t| t.1);
    Some(LocalBehavior::Power {
        coef,
        exponent: flip * e0,
        next: flip * next,
    })
}

/// Exponent `q` such that `e(x) ~ C·|x − p|^q` as `x → p` from `side`
/// (or `C·|x|^q` as `x → ±∞`), with `C ≠ 0`. `None` when no exact power law
/// is derivable.
pub fn leading_exponent(e: &Expr, p: crate::scalar::ExtendedReal<f64>, side: Side) -> Option<f64> {
    match local_behavior(e, p, side)? {
        LocalBehavior::Power { exponent, .. } => Some(exponent),
        LocalBehavior::Zero => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::scalar::ExtendedReal;

    fn q(s: &str, p: f64, side: Side) -> Option<f64> {
        leading_exponent(&parse(s).unwrap(), ExtendedReal::Finite(p), side)
    }

    fn q_inf(s: &str) -> Option<f64> {
        leading_exponent(&parse(s).unwrap(), ExtendedReal::PosInf, Side::Left)
    }

    #[test]
    fn simple_powers() {
        assert_eq!(q("1/x^2", 0.0, Side::Right), Some(-2.0));
        assert_eq!(q("exp(x)", 0.0, Side::Right), Some(0.0));
        assert_eq!(q("exp(x)/x", 0.0, Side::Right), Some(-1.0));
        assert_eq!(q("abs(x)^(-3/4)", 0.0, Side::Left), Some(-0.75));
        assert_eq!(q("(1/x)^2", 0.0, Side::Left), Some(-2.0));
    }

    #[test]
    fn shifted_points_and_cancellation() {
        assert_eq!(q("x - 1", 1.0, Side::Right), Some(1.0));
        assert_eq!(q("1/((x-1)*(x+2))", 1.0, Side::Left), Some(-1.0));
        assert_eq!(q("x^2 - 2*x + 1", 1.0, Side::Right), Some(2.0));
    }

    #[test]
    fn analytic_cancellation() {
        // exp(x) - 1 - x = x²/2 + ...
        assert_eq!(q("exp(x) - 1 - x", 0.0, Side::Right), Some(2.0));
        // log(1 + x) ~ x
        assert_eq!(q("log(1 + x)", 0.0, Side::Right), Some(1.0));
        // sqrt(1 + x) - 1 ~ x/2
        assert_eq!(q("sqrt(1 + x) - 1", 0.0, Side::Right), Some(1.0));
    }

    #[test]
    fn unknowable_cases() {
        assert_eq!(q("exp(1/x)", 0.0, Side::Right), None);
        assert_eq!(q("log(x)", 0.0, Side::Right), None);
        assert_eq!(q("1/(x*log(1/x))", 0.0, Side::Right), None);
        assert_eq!(q("x - x", 0.0, Side::Right), None);
        assert_eq!(q("x^x", 0.0, Side::Right), None);
    }

    #[test]
    fn local_terms() {
        let lb = |s: &str, p| local_behavior(&parse(s).unwrap(), p, Side::Right).unwrap();
        assert_eq!(lb("0*x", ExtendedReal::Finite(0.0)), LocalBehavior::Zero);
        match lb("2/x + 3", ExtendedReal::Finite(0.0)) {
            LocalBehavior::Power { coef, exponent, next } => {
                assert_eq!((coef, exponent, next), (2.0, -1.0, 0.0));
            }
            other => panic!("{other:?}"),
        }
        match lb("2/x + x^(-3)", ExtendedReal::PosInf) {
            LocalBehavior::Power { coef, exponent, next } => {
                assert_eq!((coef, exponent, next), (2.0, -1.0, -3.0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn at_infinity() {
        assert_eq!(q_inf("1/x"), Some(-1.0));
        assert_eq!(q_inf("x^(-2)"), Some(-2.0));
        assert_eq!(q_inf("3*x^2 + x"), Some(2.0));
        assert_eq!(q_inf("exp(-x)"), None);
        assert_eq!(q_inf("exp(1/x)"), Some(0.0));
        assert_eq!(
            leading_exponent(&parse("x^3").unwrap(), ExtendedReal::NegInf, Side::Right),
            Some(3.0)
        );
    }
}

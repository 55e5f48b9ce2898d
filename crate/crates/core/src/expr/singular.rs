//! Candidate singular points of an expression inside an interval.

use super::{BinOp, Expr, Func};
use crate::scalar::ExtendedReal;

type Poly = Vec<f64>;

const MAX_DEGREE: usize = 32;
const SCAN_POINTS: usize = 4096;

/// Interior points of `(left, right)` where `e` may be undefined or unbounded.
///
/// Exact for rational sub-expressions (denominator roots), numeric sign-change
/// scan on the `arctan`-compactified interval otherwise. Over-approximation is
/// allowed; every returned point lies strictly inside the interval.
pub fn candidate_singularities(e: &Expr, left: ExtendedReal<f64>, right: ExtendedReal<f64>) -> Vec<f64> {
    let mut out = Vec::new();
    collect_candidates(e, left, right, &mut out);
    finalize(out, left, right)
}

fn collect_candidates(e: &Expr, l: ExtendedReal<f64>, r: ExtendedReal<f64>, out: &mut Vec<f64>) {
    match e {
        Expr::Num(_) | Expr::X => {}
        Expr::Neg(a) => collect_candidates(a, l, r, out),
        Expr::Bin(op, a, b) => {
            collect_candidates(a, l, r, out);
            collect_candidates(b, l, r, out);
            match op {
                BinOp::Div => out.extend(zeros_in(b, l, r)),
                BinOp::Pow => pow_candidates(a, b, l, r, out),
                _ => {}
            }
        }
        Expr::Call(f, args) => {
            for a in args {
                collect_candidates(a, l, r, out);
            }
            match f {
                Func::Log | Func::Sqrt => out.extend(zeros_in(&args[0], l, r)),
                Func::Pow => pow_candidates(&args[0], &args[1], l, r, out),
                Func::Exp | Func::Abs | Func::Sign => {}
            }
        }
    }
}

fn pow_candidates(base: &Expr, exponent: &Expr, l: ExtendedReal<f64>, r: ExtendedReal<f64>, out: &mut Vec<f64>) {
    match exponent.constant_value() {
        Some(c) if c >= 0.0 && c.fract() == 0.0 => {}
        _ => out.extend(zeros_in(base, l, r)),
    }
}

/// Zeros of `e` strictly inside the interval (over-approximated by sign
/// changes through poles when no exact structure is available).
pub fn zeros_in(e: &Expr, l: ExtendedReal<f64>, r: ExtendedReal<f64>) -> Vec<f64> {
    let mut out = Vec::new();
    collect_zeros(e, l, r, &mut out);
    finalize(out, l, r)
}

fn collect_zeros(e: &Expr, l: ExtendedReal<f64>, r: ExtendedReal<f64>, out: &mut Vec<f64>) {
    if let Some((num, _den)) = as_rational(e) {
        if num.iter().all(|c| *c == 0.0) {
            // identically zero: not isolated, nothing to report
            return;
        }
        out.extend(real_poly_roots(&num));
        return;
    }
    match e {
        Expr::Num(_) => {}
        Expr::X => out.push(0.0),
        Expr::Neg(a) => collect_zeros(a, l, r, out),
        Expr::Bin(BinOp::Mul, a, b) => {
            collect_zeros(a, l, r, out);
            collect_zeros(b, l, r, out);
        }
        Expr::Bin(BinOp::Div, a, _) => collect_zeros(a, l, r, out),
        Expr::Bin(BinOp::Pow, a, b) => power_zeros(a, b, l, r, out),
        Expr::Call(Func::Pow, args) => power_zeros(&args[0], &args[1], l, r, out),
        Expr::Call(Func::Abs | Func::Sqrt | Func::Sign, args) => collect_zeros(&args[0], l, r, out),
        Expr::Call(Func::Exp, _) => {}
        Expr::Call(Func::Log, args) => {
            let shifted = args[0].clone().sub(Expr::Num(1.0));
            collect_zeros(&shifted, l, r, out)
        }
        _ => out.extend(scan_sign_changes(e, l, r)),
    }
}

fn power_zeros(a: &Expr, b: &Expr, l: ExtendedReal<f64>, r: ExtendedReal<f64>, out: &mut Vec<f64>) {
    match b.constant_value() {
        Some(c) if c > 0.0 => collect_zeros(a, l, r, out),
        Some(_) => {}
        None => out.extend(scan_sign_changes(&Expr::bin(BinOp::Pow, a.clone(), b.clone()), l, r)),
    }
}

fn finalize(mut pts: Vec<f64>, l: ExtendedReal<f64>, r: ExtendedReal<f64>) -> Vec<f64> {
    let lo = l.to_float();
    let hi = r.to_float();
    pts.retain(|p| p.is_finite() && *p > lo && *p < hi);
    pts.sort_by(|a, b| a.total_cmp(b));
    let mut out: Vec<f64> = Vec::with_capacity(pts.len());
    for p in pts {
        match out.last() {
            Some(&q) if (p - q).abs() <= 1e-10 * p.abs().max(1.0) => {}
            _ => out.push(p),
        }
    }
    out
}

// ---------------------------------------------------------------------------
// rational structure

/// `(numerator, denominator)` coefficient vectors, lowest degree first.
fn as_rational(e: &Expr) -> Option<(Poly, Poly)> {
    let r = match e {
        Expr::Num(v) => (vec![*v], vec![1.0]),
        Expr::X => (vec![0.0, 1.0], vec![1.0]),
        Expr::Neg(a) => {
            let (n, d) = as_rational(a)?;
            (n.iter().map(|c| -c).collect(), d)
        }
        Expr::Bin(op, a, b) => {
            let (an, ad) = as_rational(a)?;
            match op {
                BinOp::Pow => {
                    let k = b.constant_value()?;
                    if k.fract() != 0.0 || k.abs() > MAX_DEGREE as f64 {
                        return None;
                    }
                    let k = k as i32;
                    let (pn, pd) = (poly_pow(&an, k.unsigned_abs())?, poly_pow(&ad, k.unsigned_abs())?);
                    if k >= 0 {
                        (pn, pd)
                    } else {
                        (pd, pn)
                    }
                }
                _ => {
                    let (bn, bd) = as_rational(b)?;
                    match op {
                        BinOp::Add => (poly_add(&poly_mul(&an, &bd), &poly_mul(&bn, &ad)), poly_mul(&ad, &bd)),
                        BinOp::Sub => (
                            poly_add(&poly_mul(&an, &bd), &poly_neg(&poly_mul(&bn, &ad))),
                            poly_mul(&ad, &bd),
                        ),
                        BinOp::Mul => (poly_mul(&an, &bn), poly_mul(&ad, &bd)),
                        BinOp::Div => (poly_mul(&an, &bd), poly_mul(&ad, &bn)),
                        BinOp::Pow => unreachable!(),
                    }
                }
            }
        }
        Expr::Call(Func::Pow, args) => return as_rational(&Expr::bin(BinOp::Pow, args[0].clone(), args[1].clone())),
        Expr::Call(..) => return None,
    };
    let (n, d) = (trim(r.0), trim(r.1));
    if n.len() > MAX_DEGREE + 1 || d.len() > MAX_DEGREE + 1 || d.iter().all(|c| *c == 0.0) {
        return None;
    }
    Some((n, d))
}

fn trim(mut p: Poly) -> Poly {
    while p.len() > 1 && *p.last().unwrap() == 0.0 {
        p.pop();
    }
    p
}

fn poly_add(a: &[f64], b: &[f64]) -> Poly {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, c) in a.iter().enumerate() {
        out[i] += c;
    }
    for (i, c) in b.iter().enumerate() {
        out[i] += c;
    }
    out
}

fn poly_neg(a: &[f64]) -> Poly {
    a.iter().map(|c| -c).collect()
}

fn poly_mul(a: &[f64], b: &[f64]) -> Poly {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_pow(a: &[f64], k: u32) -> Option<Poly> {
    if (a.len() - 1) * k as usize > MAX_DEGREE {
        return None;
    }
    let mut out = vec![1.0];
    for _ in 0..k {
        out = poly_mul(&out, a);
    }
    Some(out)
}

fn poly_eval(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn poly_scale(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * x.abs() + c.abs())
}

fn derivative(p: &[f64]) -> Poly {
    if p.len() <= 1 {
        return vec![0.0];
    }
    p.iter().enumerate().skip(1).map(|(i, c)| c * i as f64).collect()
}

/// Real roots of a polynomial given lowest-degree-first, sorted, with
/// multiple roots reported once.
pub fn real_poly_roots(p: &[f64]) -> Vec<f64> {
    let p = trim(p.to_vec());
    let n = p.len() - 1;
    let lead = p[n];
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![-p[0] / p[1]];
    }
    if n == 2 {
        let (c, b, a) = (p[0], p[1], p[2]);
        let disc = b * b - 4.0 * a * c;
        let scale = b * b + (4.0 * a * c).abs();
        if disc.abs() <= 1e-14 * scale {
            return vec![-b / (2.0 * a)];
        }
        if disc < 0.0 {
            return Vec::new();
        }
        let sq = disc.sqrt();
        let q = if b >= 0.0 { -0.5 * (b + sq) } else { -0.5 * (b - sq) };
        let mut roots = vec![q / a, c / q];
        roots.sort_by(|x, y| x.total_cmp(y));
        return roots;
    }
    let bound = 1.0 + p[..n].iter().map(|c| (c / lead).abs()).fold(0.0, f64::max);
    let crit = real_poly_roots(&derivative(&p));
    let mut knots = vec![-bound];
    knots.extend(crit.iter().copied().filter(|c| c.abs() < bound));
    knots.push(bound);
    let mut roots = Vec::new();
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (poly_eval(&p, a), poly_eval(&p, b));
        if fa == 0.0 {
            roots.push(a);
        }
        if fa.signum() * fb.signum() < 0.0 {
            roots.push(bisect(|x| poly_eval(&p, x), a, b, 0.0));
        }
    }
    if poly_eval(&p, bound) == 0.0 {
        roots.push(bound);
    }
    for c in crit {
        if poly_eval(&p, c).abs() <= 1e-12 * poly_scale(&p, c) {
            roots.push(c);
        }
    }
    roots.sort_by(|x, y| x.total_cmp(y));
    let mut out: Vec<f64> = Vec::new();
    for r in roots {
        match out.last() {
            Some(&q) if (r - q).abs() <= 1e-10 * r.abs().max(1.0) => {}
            _ => out.push(r),
        }
    }
    out
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, rel: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b || (b - a) <= rel * m.abs() {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

// ---------------------------------------------------------------------------
// numeric fallback

fn scan_sign_changes(e: &Expr, l: ExtendedReal<f64>, r: ExtendedReal<f64>) -> Vec<f64> {
    let ua = l.to_float().atan();
    let ub = r.to_float().atan();
    let h = (ub - ua) / (SCAN_POINTS + 1) as f64;
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for i in 1..=SCAN_POINTS {
        let x = (ua + h * i as f64).tan();
        let v = match e.eval(x) {
            Ok(v) => v,
            Err(_) => {
                prev = None;
                continue;
            }
        };
        if v == 0.0 {
            out.push(x);
        } else if let Some((px, pv)) = prev {
            if pv != 0.0 && pv.signum() != v.signum() {
                let g = |t: f64| e.eval(t).unwrap_or(f64::NAN);
                out.push(bisect_checked(g, px, x));
            }
        }
        prev = Some((x, v));
    }
    out
}

fn bisect_checked(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b || (b - a) <= 1e-12 * m.abs().max(1e-300) {
            break;
        }
        let fm = f(m);
        if fm.is_nan() || fm == 0.0 {
            // undefined exactly at the pole, or an exact zero
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

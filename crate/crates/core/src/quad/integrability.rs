//! Tri-state decision of local integrability of a nonnegative function.
//!
//! The integral is split into dyadic shells approaching the point (or
//! infinity). For `f ~ |x − p|^a` consecutive shell integrals have ratio
//! `2^{−(a+1)}`, so `q̂ = 1 + log₂ r̂` estimates `−a` and the decision is
//! `q̂ < 1`. At infinity the shells `[o + 2^k, o + 2^{k+1}]` give ratio
//! `2^{a+1}` and the same threshold on `q̂ = 1 + log₂ r̂` applies.

use super::{integrate_with, QuadError, QuadOptions};
use crate::expr::{DomainFault, Side};
use crate::scalar::{ExtendedReal, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrabilityStatus {
    Integrable,
    Divergent,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Symbolic,
    Numeric,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct IntegrabilityVerdict {
    pub status: IntegrabilityStatus,
    /// Local power `a` in `f ~ |x − p|^a` (or `|x|^a` at infinity).
    pub estimated_exponent: Option<f64>,
    /// `(k, ∫ over shell k)`.
    pub dyadic_sums: Vec<(usize, f64)>,
    pub method: Method,
    /// Median shell ratio `r̂` over the tail window.
    pub ratio: Option<f64>,
}

impl IntegrabilityVerdict {
    pub fn symbolic(status: IntegrabilityStatus, exponent: f64) -> Self {
        IntegrabilityVerdict {
            status,
            estimated_exponent: Some(exponent),
            dyadic_sums: Vec::new(),
            method: Method::Symbolic,
            ratio: None,
        }
    }

    pub fn is_integrable(&self) -> bool {
        self.status == IntegrabilityStatus::Integrable
    }

    pub fn is_divergent(&self) -> bool {
        self.status == IntegrabilityStatus::Divergent
    }
}

#[derive(Clone, Copy, Debug)]
pub struct IntegrabilityOptions {
    pub eps_cls: f64,
    /// Outer radius of the shell family at a finite point.
    pub delta: f64,
    /// Offset `o` of the shells at infinity.
    pub anchor: f64,
    pub rel_tol: f64,
    pub shells: usize,
    pub max_panels: usize,
}

impl Default for IntegrabilityOptions {
    fn default() -> Self {
        IntegrabilityOptions {
            eps_cls: 0.05,
            delta: 1.0,
            anchor: 0.0,
            rel_tol: 1e-10,
            shells: 49,
            max_panels: 4096,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShellClassification {
    pub status: IntegrabilityStatus,
    pub q_hat: Option<f64>,
    pub ratio: Option<f64>,
}

const WINDOW: usize = 8;
const MONOTONE_WINDOW: usize = 5;
const EDGE_GUARD: f64 = 1e-9;

/// Classifies a sequence of log shell integrals, ordered toward the point.
pub fn classify_log_shells(log_sums: &[f64], eps_cls: f64) -> ShellClassification {
    use IntegrabilityStatus::*;
    let inconclusive = ShellClassification {
        status: Inconclusive,
        q_hat: None,
        ratio: None,
    };
    if log_sums.contains(&f64::INFINITY) {
        return ShellClassification {
            status: Divergent,
            q_hat: Some(f64::INFINITY),
            ratio: Some(f64::INFINITY),
        };
    }
    if log_sums.len() < 2 {
        return inconclusive;
    }
    let tail = &log_sums[log_sums.len().saturating_sub(WINDOW + 1)..];
    if tail.iter().all(|&l| l == f64::NEG_INFINITY) {
        return ShellClassification {
            status: Integrable,
            q_hat: Some(f64::NEG_INFINITY),
            ratio: Some(0.0),
        };
    }
    let diffs: Vec<f64> = tail.windows(2).map(|w| w[1] - w[0]).filter(|d| !d.is_nan()).collect();
    if diffs.len() < 3 {
        return inconclusive;
    }
    let mut sorted = diffs.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let q_hat = 1.0 + median / std::f64::consts::LN_2;
    let ratio = median.exp();
    let status = if q_hat <= 1.0 - eps_cls + EDGE_GUARD {
        Integrable
    } else if q_hat >= 1.0 + eps_cls - EDGE_GUARD {
        Divergent
    } else {
        let recent = &diffs[diffs.len().saturating_sub(MONOTONE_WINDOW)..];
        if recent.iter().all(|&d| d >= (1.0 - EDGE_GUARD).ln()) {
            Divergent
        } else {
            Inconclusive
        }
    };
    ShellClassification {
        status,
        q_hat: Some(q_hat),
        ratio: Some(ratio),
    }
}

/// Verdict for a known local power `hint` (`|x|^hint` when `at_infinity`).
pub fn hint_verdict(hint: f64, at_infinity: bool) -> IntegrabilityVerdict {
    let integrable = if at_infinity { hint < -1.0 } else { hint > -1.0 };
    let status = if integrable {
        IntegrabilityStatus::Integrable
    } else {
        IntegrabilityStatus::Divergent
    };
    IntegrabilityVerdict::symbolic(status, hint)
}

fn shell_integral<T, F>(f: &mut F, a: T, b: T, opts: &IntegrabilityOptions) -> Result<f64, QuadError>
where
    T: Scalar,
    F: FnMut(T) -> Result<T, DomainFault>,
{
    let q = QuadOptions::relative(opts.rel_tol).with_max_panels(opts.max_panels);
    match integrate_with(&mut *f, ExtendedReal::Finite(a), ExtendedReal::Finite(b), &q) {
        Ok(r) => Ok(r.value.as_f64().max(0.0)),
        Err(QuadError::NonFinite) => Ok(f64::INFINITY),
        Err(QuadError::Eval(fault)) if fault.reason == "non-finite value" => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

fn numeric_verdict(sums: Vec<(usize, f64)>, eps_cls: f64, at_infinity: bool) -> IntegrabilityVerdict {
    let logs: Vec<(usize, f64)> = sums.iter().map(|&(k, v)| (k, v.ln())).collect();
    verdict_from_log_shells(&logs, eps_cls, at_infinity)
}

/// Verdict from `(k, ln ∫ over shell k)`, shells ordered toward the point.
pub fn verdict_from_log_shells(log_sums: &[(usize, f64)], eps_cls: f64, at_infinity: bool) -> IntegrabilityVerdict {
    let logs: Vec<f64> = log_sums.iter().map(|&(_, l)| l).collect();
    let c = classify_log_shells(&logs, eps_cls);
    let exponent = c
        .q_hat
        .filter(|q| q.is_finite())
        .map(|q| if at_infinity { q - 2.0 } else { -q });
    IntegrabilityVerdict {
        status: c.status,
        estimated_exponent: exponent,
        dyadic_sums: log_sums.iter().map(|&(k, l)| (k, l.exp())).collect(),
        method: Method::Numeric,
        ratio: c.ratio,
    }
}

/// Local integrability of `f ≥ 0` at the finite point `p` from `side`.
pub fn local_integrability<T, F>(
    mut f: F,
    p: T,
    side: Side,
    hint: Option<f64>,
    opts: &IntegrabilityOptions,
) -> Result<IntegrabilityVerdict, QuadError>
where
    T: Scalar,
    F: FnMut(T) -> Result<T, DomainFault>,
{
    if let Some(h) = hint {
        return Ok(hint_verdict(h, false));
    }
    let s = T::lit(side.sign());
    let delta = T::lit(opts.delta);
    let floor = T::lit(1024.0) * T::epsilon() * p.abs();
    let mut sums = Vec::with_capacity(opts.shells);
    for k in 0..opts.shells {
        let outer = delta * T::lit(0.5f64.powi(k as i32));
        let inner = outer * T::lit(0.5);
        if inner < floor || inner <= T::zero() {
            break;
        }
        let (a, b) = if side == Side::Right {
            (p + s * inner, p + s * outer)
        } else {
            (p + s * outer, p + s * inner)
        };
        if a >= b {
            break;
        }
        let v = shell_integral(&mut f, a, b, opts)?;
        sums.push((k, v));
        if v == f64::INFINITY {
            break;
        }
    }
    Ok(numeric_verdict(sums, opts.eps_cls, false))
}

/// Integrability of `f ≥ 0` at `+∞` (`Side::Right`) or `−∞` (`Side::Left`).
pub fn integrability_at_infinity<T, F>(
    mut f: F,
    side: Side,
    hint: Option<f64>,
    opts: &IntegrabilityOptions,
) -> Result<IntegrabilityVerdict, QuadError>
where
    T: Scalar,
    F: FnMut(T) -> Result<T, DomainFault>,
{
    if let Some(h) = hint {
        return Ok(hint_verdict(h, true));
    }
    let o = T::lit(opts.anchor);
    let mut sums = Vec::with_capacity(opts.shells);
    for k in 0..opts.shells {
        let inner = T::lit(2f64.powi(k as i32));
        let outer = inner * T::lit(2.0);
        let (a, b) = if side == Side::Right {
            (o + inner, o + outer)
        } else {
            (o - outer, o - inner)
        };
        if !b.is_finite() || !a.is_finite() {
            break;
        }
        let v = shell_integral(&mut f, a, b, opts)?;
        sums.push((k, v));
        if v == f64::INFINITY {
            break;
        }
    }
    Ok(numeric_verdict(sums, opts.eps_cls, true))
}

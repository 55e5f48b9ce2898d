//! Adaptive Gauss–Kronrod quadrature and local integrability decisions.

mod integrability;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::expr::DomainFault;
use crate::scalar::{ExtendedReal, Scalar};

pub use integrability::{
    classify_log_shells, hint_verdict, integrability_at_infinity, local_integrability, verdict_from_log_shells,
    IntegrabilityOptions, IntegrabilityStatus, IntegrabilityVerdict, Method, ShellClassification,
};

/// Default panel budget.
pub const MAX_PANELS: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct QuadResult<T> {
    pub value: T,
    pub abs_error_estimate: T,
    pub subdivisions: usize,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum QuadError {
    #[error("quadrature budget of {panels} panels exhausted (error estimate {error:e})")]
    Budget { panels: usize, error: f64 },
    #[error(transparent)]
    Eval(#[from] DomainFault),
    #[error("non-finite quadrature sum")]
    NonFinite,
    #[error("invalid interval: lower limit {lower} is not below upper limit {upper}")]
    InvalidInterval { lower: String, upper: String },
}

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl QuadOptions {
    pub fn absolute(tol: f64) -> Self {
        QuadOptions {
            abs_tol: tol,
            rel_tol: 0.0,
            max_panels: MAX_PANELS,
        }
    }

    pub fn relative(tol: f64) -> Self {
        QuadOptions {
            abs_tol: 0.0,
            rel_tol: tol,
            max_panels: MAX_PANELS,
        }
    }

    pub fn with_max_panels(mut self, n: usize) -> Self {
        self.max_panels = n;
        self
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Panel<T> {
    a: T,
    b: T,
    value: T,
    error: T,
    at_roundoff: bool,
}

impl<T: Scalar> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: Scalar> Eq for Panel<T> {}
impl<T: Scalar> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Scalar> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.as_f64().total_cmp(&other.error.as_f64())
    }
}

/// Returns `(value, error, at_roundoff)`; the flag marks panels whose error
/// estimate is the rounding floor, which further bisection cannot lower.
fn gk15<T, F>(f: &mut F, a: T, b: T) -> Result<(T, T, bool), QuadError>
where
    T: Scalar,
    F: FnMut(T) -> Result<T, DomainFault>,
{
    let half = T::lit(0.5);
    let center = half * (a + b);
    let h = half * (b - a);
    let fc = f(center)?;
    let mut res_g = fc * T::lit(WG[3]);
    let mut res_k = fc * T::lit(WGK[7]);
    let mut res_abs = res_k.abs();
    let mut fv1 = [T::zero(); 7];
    let mut fv2 = [T::zero(); 7];
    for j in 0..7 {
        let dx = h * T::lit(XGK[j]);
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        let w = T::lit(WGK[j]);
        res_k = res_k + w * (f1 + f2);
        res_abs = res_abs + w * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g = res_g + T::lit(WG[j / 2]) * (f1 + f2);
        }
    }
    let mean = res_k * half;
    let mut res_asc = T::lit(WGK[7]) * (fc - mean).abs();
    for j in 0..7 {
        res_asc = res_asc + T::lit(WGK[j]) * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let habs = h.abs();
    let result = res_k * h;
    res_abs = res_abs * habs;
    res_asc = res_asc * habs;
    let mut err = ((res_k - res_g) * h).abs();
    if res_asc != T::zero() && err != T::zero() {
        let scale = (T::lit(200.0) * err / res_asc).powf(T::lit(1.5));
        err = res_asc * scale.min(T::one());
    }
    let round = T::lit(50.0) * T::epsilon() * res_abs;
    let at_roundoff = err <= round;
    if res_abs > T::min_positive_value() / (T::lit(50.0) * T::epsilon()) {
        err = err.max(round);
    }
    if !result.is_finite() || !err.is_finite() {
        return Err(QuadError::NonFinite);
    }
    Ok((result, err, at_roundoff))
}

fn adaptive<T, F>(f: &mut F, a: T, b: T, opts: &QuadOptions) -> Result<QuadResult<T>, QuadError>
where
    T: Scalar,
    F: FnMut(T) -> Result<T, DomainFault>,
{
    let (v, e, r) = gk15(f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Panel {
        a,
        b,
        value: v,
        error: e,
        at_roundoff: r,
    });
    let mut total = v;
    let mut total_err = e;
    // Panels that can no longer be split in this precision.
    let mut frozen_value = T::zero();
    let mut frozen_err = T::zero();
    let mut panels = 1usize;
    let tiny = T::lit(16.0) * T::epsilon();
    loop {
        let target = T::lit(opts.abs_tol).max(T::lit(opts.rel_tol) * total.abs());
        if total_err <= target {
            break;
        }
        let Some(p) = heap.pop() else { break };
        let mid = T::lit(0.5) * (p.a + p.b);
        if p.at_roundoff
            || (p.b - p.a).abs() <= tiny * mid.abs().max(T::min_positive_value())
            || mid <= p.a
            || mid >= p.b
        {
            frozen_value = frozen_value + p.value;
            frozen_err = frozen_err + p.error;
            continue;
        }
        if panels >= opts.max_panels {
            return Err(QuadError::Budget {
                panels,
                error: total_err.as_f64(),
            });
        }
        let (v1, e1, r1) = gk15(f, p.a, mid)?;
        let (v2, e2, r2) = gk15(f, mid, p.b)?;
        panels += 1;
        total = total - p.value + v1 + v2;
        total_err = total_err - p.error + e1 + e2;
        heap.push(Panel {
            a: p.a,
            b: mid,
            value: v1,
            error: e1,
            at_roundoff: r1,
        });
        heap.push(Panel {
            a: mid,
            b: p.b,
            value: v2,
            error: e2,
            at_roundoff: r2,
        });
        if panels.is_multiple_of(64) {
            // Resynchronise the running sums to shed cancellation drift.
            total = heap.iter().fold(frozen_value, |s, p| s + p.value);
            total_err = heap.iter().fold(frozen_err, |s, p| s + p.error);
        }
    }
    let value = heap.iter().fold(frozen_value, |s, p| s + p.value);
    let err = heap.iter().fold(frozen_err, |s, p| s + p.error);
    if !value.is_finite() {
        return Err(QuadError::NonFinite);
    }
    Ok(QuadResult {
        value,
        abs_error_estimate: err,
        subdivisions: panels,
    })
}

/// `∫_a^b f` to absolute tolerance `tol`.
pub fn integrate<T, F>(f: F, a: ExtendedReal<T>, b: ExtendedReal<T>, tol: T) -> Result<QuadResult<T>, QuadError>
where
    T: Scalar,
    F: FnMut(T) -> Result<T, DomainFault>,
{
    integrate_with(f, a, b, &QuadOptions::absolute(tol.as_f64()))
}

/// `∫_a^b f` with explicit tolerances. Infinite limits are handled through
/// the substitution `x = tan u`.
pub fn integrate_with<T, F>(
    mut f: F,
    a: ExtendedReal<T>,
    b: ExtendedReal<T>,
    opts: &QuadOptions,
) -> Result<QuadResult<T>, QuadError>
where
    T: Scalar,
    F: FnMut(T) -> Result<T, DomainFault>,
{
    if a.total_cmp(&b) != Ordering::Less {
        return Err(QuadError::InvalidInterval {
            lower: a.to_string(),
            upper: b.to_string(),
        });
    }
    if let (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) = (a, b) {
        return adaptive(&mut f, a, b, opts);
    }
    let half_pi = T::lit(std::f64::consts::FRAC_PI_2);
    let to_u = |e: ExtendedReal<T>| match e {
        ExtendedReal::NegInf => -half_pi,
        ExtendedReal::PosInf => half_pi,
        ExtendedReal::Finite(v) => v.atan(),
    };
    let mut g = |u: T| {
        let c = u.cos();
        let x = u.tan();
        if !x.is_finite() || c == T::zero() {
            return Ok(T::zero());
        }
        Ok(f(x)? / (c * c))
    };
    adaptive(&mut g, to_u(a), to_u(b), opts)
}

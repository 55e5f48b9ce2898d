//! Problem data and its validation.

use std::fmt;

use super::{neighbour_delta, ClassifyOptions};
use crate::expr::{
    candidate_singularities, leading_exponent, parse, zeros_in, CompiledExpr, DomainFault, Expr, ParseError, Side,
};
use crate::quad::{local_integrability, IntegrabilityStatus, QuadError};
use crate::Extended;

/// Unvalidated problem data as read from a file.
#[derive(Clone, Debug, PartialEq)]
pub struct RawProblem {
    pub left: Extended,
    pub right: Extended,
    pub x0: f64,
    pub mu: String,
    pub sigma: String,
    pub b: String,
    pub singularity_hints: Vec<f64>,
    pub base_point: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ProblemError {
    #[error("{field}: {error}")]
    Parse { field: &'static str, error: ParseError },
    #[error("interval ({left}, {right}) is empty")]
    EmptyInterval { left: Extended, right: Extended },
    #[error("x0 = {x0} is not inside ({left}, {right})")]
    X0OutsideInterval { x0: f64, left: Extended, right: Extended },
    #[error("sigma vanishes at x0 = {x0}")]
    SigmaZeroAtX0 { x0: f64 },
    #[error("Engelbert-Schmidt condition `{condition}` fails at x = {point}")]
    EngelbertSchmidt { point: f64, condition: &'static str },
    #[error("x0 = {x0} lies in the singular set: Z vanishes identically, hence is a martingale")]
    X0InSingularSet { x0: f64 },
    #[error("base point {c} is not inside the effective interval")]
    BasePoint { c: f64 },
    #[error("integrability of `{condition}` at x = {point} is undecidable")]
    Undecidable { point: f64, condition: &'static str },
    #[error("{0}")]
    Fault(#[from] DomainFault),
    #[error("{0}")]
    Quad(String),
}

impl From<QuadError> for ProblemError {
    fn from(e: QuadError) -> Self {
        match e {
            QuadError::Eval(f) => ProblemError::Fault(f),
            other => ProblemError::Quad(other.to_string()),
        }
    }
}

/// Every violation found while validating a [`RawProblem`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemErrors(pub Vec<ProblemError>);

impl fmt::Display for ProblemErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ProblemErrors {}

impl ProblemErrors {
    pub fn x0_in_singular_set(&self) -> bool {
        self.0.iter().any(|e| matches!(e, ProblemError::X0InSingularSet { .. }))
    }
}

/// Coefficient functions built once per problem.
#[derive(Clone, Debug)]
pub struct Coefficients {
    pub mu: CompiledExpr,
    pub sigma: CompiledExpr,
    pub b: CompiledExpr,
    /// `b²/σ²`
    pub b2_over_s2: CompiledExpr,
    /// `2μ/σ²`
    pub drift: CompiledExpr,
    /// `2μ/σ² + 2b/σ`
    pub drift_tilde: CompiledExpr,
    /// `1/σ²`
    pub inv_s2: CompiledExpr,
    /// `b²`
    pub b2: CompiledExpr,
}

impl Coefficients {
    fn new(mu: &Expr, sigma: &Expr, b: &Expr) -> Self {
        let two = || Expr::num(2.0);
        let s2 = sigma.clone().square();
        let drift = two().mul(mu.clone()).div(s2.clone());
        let drift_tilde = drift.clone().add(two().mul(b.clone()).div(sigma.clone()));
        Coefficients {
            mu: CompiledExpr::new(mu),
            sigma: CompiledExpr::new(sigma),
            b: CompiledExpr::new(b),
            b2_over_s2: CompiledExpr::new(&b.clone().square().div(s2.clone())),
            drift: CompiledExpr::new(&drift),
            drift_tilde: CompiledExpr::new(&drift_tilde),
            inv_s2: CompiledExpr::new(&Expr::num(1.0).div(s2)),
            b2: CompiledExpr::new(&b.clone().square()),
        }
    }
}

/// A validated problem: `dY = μ(Y)dt + σ(Y)dW` on `J = (l, r)` from `x0`,
/// with integrand `b`.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub left: Extended,
    pub right: Extended,
    pub x0: f64,
    pub mu: Expr,
    pub sigma: Expr,
    pub b: Expr,
    pub singularity_hints: Vec<f64>,
    pub base_point: f64,
    pub coef: Coefficients,
}

impl ProblemSpec {
    pub fn contains(&self, x: f64) -> bool {
        Extended::Finite(x) > self.left && Extended::Finite(x) < self.right
    }

    /// Same problem with base point `c`.
    pub fn with_base_point(&self, c: f64) -> ProblemSpec {
        ProblemSpec {
            base_point: c,
            ..self.clone()
        }
    }

    /// Mirror image under `x ↦ −x`: `Ŷ = −Y` solves the problem with
    /// `μ̂(x) = −μ(−x)`, `σ̂(x) = σ(−x)` and, for the same `Z`,
    /// `b̂(x) = −b(−x)`.
    pub fn reflected(&self) -> ProblemSpec {
        let m = Expr::x().neg();
        let mu = self.mu.substitute(&m).neg();
        let sigma = self.sigma.substitute(&m);
        let b = self.b.substitute(&m).neg();
        ProblemSpec {
            left: self.right.neg(),
            right: self.left.neg(),
            x0: -self.x0,
            coef: Coefficients::new(&mu, &sigma, &b),
            mu,
            sigma,
            b,
            singularity_hints: self.singularity_hints.iter().map(|p| -p).collect(),
            base_point: -self.base_point,
        }
    }
}

fn interval_points(points: Vec<f64>, left: Extended, right: Extended) -> Vec<f64> {
    let mut pts: Vec<f64> = points
        .into_iter()
        .filter(|&p| Extended::Finite(p) > left && Extended::Finite(p) < right)
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-10 * a.abs().max(1.0));
    pts
}

fn bounds(left: Extended, right: Extended) -> (f64, f64) {
    (left.to_float(), right.to_float())
}

/// Parses and validates a problem, collecting every violation.
pub fn build_problem(raw: &RawProblem, opts: &ClassifyOptions) -> Result<ProblemSpec, ProblemErrors> {
    let mut errors = Vec::new();
    let mut field = |name: &'static str, text: &str| match parse(text) {
        Ok(e) => Some(e),
        Err(error) => {
            errors.push(ProblemError::Parse { field: name, error });
            None
        }
    };
    let mu = field("mu", &raw.mu);
    let sigma = field("sigma", &raw.sigma);
    let b = field("b", &raw.b);
    if raw.left >= raw.right {
        errors.push(ProblemError::EmptyInterval {
            left: raw.left,
            right: raw.right,
        });
    } else if !raw.x0.is_finite() || !(Extended::Finite(raw.x0) > raw.left && Extended::Finite(raw.x0) < raw.right) {
        errors.push(ProblemError::X0OutsideInterval {
            x0: raw.x0,
            left: raw.left,
            right: raw.right,
        });
    }
    let (Some(mu), Some(sigma), Some(b)) = (mu, sigma, b) else {
        return Err(ProblemErrors(errors));
    };
    if !errors.is_empty() {
        return Err(ProblemErrors(errors));
    }
    let spec = ProblemSpec {
        left: raw.left,
        right: raw.right,
        x0: raw.x0,
        coef: Coefficients::new(&mu, &sigma, &b),
        mu,
        sigma,
        b,
        singularity_hints: raw.singularity_hints.clone(),
        base_point: raw.base_point.unwrap_or(raw.x0),
    };
    match spec.coef.sigma.eval(spec.x0) {
        Ok(s) if s == 0.0 => errors.push(ProblemError::SigmaZeroAtX0 { x0: spec.x0 }),
        Ok(_) => {}
        Err(f) => errors.push(ProblemError::Fault(f)),
    }
    if let Err(e) = engelbert_schmidt(&spec, opts) {
        errors.push(e);
    }
    if errors.is_empty() {
        if let Err(e) = start_is_regular(&spec, opts) {
            errors.push(e);
        }
    }
    if !spec.contains(spec.base_point) {
        errors.push(ProblemError::BasePoint { c: spec.base_point });
    }
    if errors.is_empty() {
        Ok(spec)
    } else {
        Err(ProblemErrors(errors))
    }
}

fn side_status(f: &CompiledExpr, p: f64, delta: f64, eps_cls: f64) -> Result<[IntegrabilityStatus; 2], QuadError> {
    let mut out = [IntegrabilityStatus::Inconclusive; 2];
    for (i, side) in [Side::Left, Side::Right].into_iter().enumerate() {
        let hint = leading_exponent(f.source(), Extended::Finite(p), side);
        let o = crate::quad::IntegrabilityOptions {
            eps_cls,
            delta,
            ..Default::default()
        };
        out[i] = local_integrability(|x: f64| Ok(f.eval(x)?.abs()), p, side, hint, &o)?.status;
    }
    Ok(out)
}

fn engelbert_schmidt(spec: &ProblemSpec, opts: &ClassifyOptions) -> Result<(), ProblemError> {
    let (l, r) = (spec.left, spec.right);
    let c = &spec.coef;
    let mut probes = zeros_in(&spec.sigma, l, r);
    probes.extend(candidate_singularities(c.inv_s2.source(), l, r));
    probes.extend(candidate_singularities(c.drift.source(), l, r));
    let probes = interval_points(probes, spec.left, spec.right);
    for (i, &p) in probes.iter().enumerate() {
        let delta = neighbour_delta(&probes, i, spec.left, spec.right);
        let checks: [(&CompiledExpr, &'static str); 2] = [(&c.inv_s2, "1/σ² ∈ L¹_loc"), (&c.drift, "μ/σ² ∈ L¹_loc")];
        for (f, condition) in checks {
            let st = side_status(f, p, delta, opts.eps_cls)?;
            if st.contains(&IntegrabilityStatus::Divergent) {
                return Err(ProblemError::EngelbertSchmidt { point: p, condition });
            }
            if st.contains(&IntegrabilityStatus::Inconclusive) {
                return Err(ProblemError::Undecidable { point: p, condition });
            }
        }
        if matches!(c.sigma.eval(p), Ok(s) if s == 0.0) {
            return Err(ProblemError::EngelbertSchmidt {
                point: p,
                condition: "σ(x) ≠ 0",
            });
        }
    }
    Ok(())
}

fn start_is_regular(spec: &ProblemSpec, opts: &ClassifyOptions) -> Result<(), ProblemError> {
    let x0 = spec.x0;
    let (l, r) = bounds(spec.left, spec.right);
    let f = &spec.coef.b2_over_s2;
    let near = candidate_singularities(f.source(), spec.left, spec.right)
        .into_iter()
        .chain(spec.singularity_hints.iter().copied())
        .any(|p| (p - x0).abs() <= 1e-12 * x0.abs().max(1.0));
    if !near && f.eval(x0).is_ok() {
        return Ok(());
    }
    let delta = 0.5 * (x0 - l).min(r - x0).min(2.0);
    let st = side_status(f, x0, delta, opts.eps_cls)?;
    if st.contains(&IntegrabilityStatus::Divergent) {
        return Err(ProblemError::X0InSingularSet { x0 });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(l: Extended, r: Extended, x0: f64, mu: &str, sigma: &str, b: &str) -> RawProblem {
        RawProblem {
            left: l,
            right: r,
            x0,
            mu: mu.into(),
            sigma: sigma.into(),
            b: b.into(),
            singularity_hints: vec![],
            base_point: None,
        }
    }

    #[test]
    fn valid_problem() {
        let p = build_problem(
            &raw(Extended::NegInf, Extended::PosInf, 1.0, "0", "1", "1/x"),
            &ClassifyOptions::default(),
        )
        .unwrap();
        assert_eq!(p.base_point, 1.0);
    }

    #[test]
    fn es_violation_names_point() {
        let err = build_problem(
            &raw(Extended::Finite(-1.0), Extended::Finite(1.0), 0.5, "0", "x", "0"),
            &ClassifyOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(
            err.0[..],
            [ProblemError::EngelbertSchmidt { point, .. }] if point == 0.0
        ));
    }

    #[test]
    fn start_outside_and_parse_errors_are_aggregated() {
        let err = build_problem(
            &raw(Extended::Finite(0.0), Extended::Finite(1.0), 2.0, "1/+x", "1", "exp("),
            &ClassifyOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err.0.len(), 3, "{err}");
        assert!(err
            .0
            .iter()
            .any(|e| matches!(e, ProblemError::X0OutsideInterval { .. })));
    }

    #[test]
    fn start_in_singular_set() {
        let err = build_problem(
            &raw(Extended::NegInf, Extended::PosInf, 0.0, "0", "1", "1/x"),
            &ClassifyOptions::default(),
        )
        .unwrap_err();
        assert!(err.x0_in_singular_set());
    }

    #[test]
    fn reflection_negates_drift_and_b() {
        let p = build_problem(
            &raw(Extended::Finite(0.0), Extended::PosInf, 1.0, "1/x", "1", "-1/x"),
            &ClassifyOptions::default(),
        )
        .unwrap();
        let q = p.reflected();
        assert_eq!((q.left, q.right, q.x0), (Extended::NegInf, Extended::Finite(0.0), -1.0));
        assert_eq!(q.coef.mu.eval(-2.0).unwrap(), -p.coef.mu.eval(2.0).unwrap());
        assert_eq!(q.coef.b.eval(-2.0).unwrap(), -p.coef.b.eval(2.0).unwrap());
    }
}

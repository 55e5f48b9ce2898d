//! Singular set `A`, effective interval and membership in `B`.

use serde::Serialize;

use super::{neighbour_delta, ClassifyError, ClassifyOptions, EffectiveEndpoint, EndpointKind, ProblemSpec};
use crate::expr::{candidate_singularities, leading_exponent, CompiledExpr, Expr, Side};
use crate::quad::{local_integrability, IntegrabilityOptions, IntegrabilityStatus, IntegrabilityVerdict};
use crate::Extended;

const MIN_SEPARATION: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SingularCandidate {
    pub point: f64,
    pub left: IntegrabilityVerdict,
    pub right: IntegrabilityVerdict,
    pub singular: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SingularSet {
    /// Sorted points of `A`.
    pub points: Vec<f64>,
    pub candidates: Vec<SingularCandidate>,
}

fn side_verdict(
    f: &CompiledExpr,
    hint_expr: &Expr,
    p: f64,
    side: Side,
    delta: f64,
    opts: &ClassifyOptions,
) -> Result<IntegrabilityVerdict, ClassifyError> {
    let hint = leading_exponent(hint_expr, Extended::Finite(p), side);
    let o = IntegrabilityOptions {
        eps_cls: opts.eps_cls,
        delta,
        ..Default::default()
    };
    Ok(local_integrability(|x: f64| Ok(f.eval(x)?.abs()), p, side, hint, &o)?)
}

/// Points of `J` near which `b²/σ²` fails to be locally integrable.
pub fn singular_set(spec: &ProblemSpec, opts: &ClassifyOptions) -> Result<SingularSet, ClassifyError> {
    let f = &spec.coef.b2_over_s2;
    let mut pts = candidate_singularities(f.source(), spec.left, spec.right);
    pts.extend(spec.singularity_hints.iter().copied().filter(|&p| spec.contains(p)));
    pts.iter_mut().for_each(|p| *p += 0.0);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| *a == *b);
    if let Some(w) = pts.windows(2).find(|w| w[1] - w[0] < MIN_SEPARATION) {
        return Err(ClassifyError::Undecidable {
            condition: format!(
                "isolated singularities (candidates {} and {} closer than {MIN_SEPARATION})",
                w[0], w[1]
            ),
            point: Extended::Finite(w[0]),
        });
    }
    let mut set = SingularSet {
        points: Vec::new(),
        candidates: Vec::new(),
    };
    for i in 0..pts.len() {
        let p = pts[i];
        let delta = neighbour_delta(&pts, i, spec.left, spec.right);
        let left = side_verdict(f, f.source(), p, Side::Left, delta, opts)?;
        let right = side_verdict(f, f.source(), p, Side::Right, delta, opts)?;
        let singular = left.is_divergent() || right.is_divergent();
        if !singular
            && (left.status == IntegrabilityStatus::Inconclusive || right.status == IntegrabilityStatus::Inconclusive)
        {
            return Err(ClassifyError::Undecidable {
                condition: "b²/σ² ∈ L¹_loc".into(),
                point: Extended::Finite(p),
            });
        }
        if singular {
            set.points.push(p);
        }
        set.candidates.push(SingularCandidate {
            point: p,
            left,
            right,
            singular,
        });
    }
    Ok(set)
}

/// `α = max(A ∪ {l}) < x0` and `β = min(A ∪ {r}) > x0`.
pub fn effective_interval(spec: &ProblemSpec, a: &SingularSet) -> (EffectiveEndpoint, EffectiveEndpoint) {
    let x0 = spec.x0;
    let alpha = match a.points.iter().copied().rfind(|&p| p < x0) {
        Some(p) => EffectiveEndpoint {
            location: Extended::Finite(p),
            kind: EndpointKind::SingularPoint,
        },
        None => EffectiveEndpoint {
            location: spec.left,
            kind: EndpointKind::NaturalBoundary,
        },
    };
    let beta = match a.points.iter().copied().find(|&p| p > x0) {
        Some(p) => EffectiveEndpoint {
            location: Extended::Finite(p),
            kind: EndpointKind::SingularPoint,
        },
        None => EffectiveEndpoint {
            location: spec.right,
            kind: EndpointKind::NaturalBoundary,
        },
    };
    (alpha, beta)
}

/// Whether the singular point `p` belongs to `B`, seen from `side`:
/// `(x − p)·b²/σ² ∉ L¹_loc(p±)`.
pub fn b_membership(
    spec: &ProblemSpec,
    a: &SingularSet,
    p: f64,
    side: Side,
    opts: &ClassifyOptions,
) -> Result<(bool, IntegrabilityVerdict), ClassifyError> {
    let Some(i) = a.points.iter().position(|&q| q == p) else {
        return Err(ClassifyError::NotSingular(p));
    };
    let weighted = Expr::distance_to(p).mul(spec.b.clone().square().div(spec.sigma.clone().square()));
    let f = CompiledExpr::new(&weighted);
    let delta = neighbour_delta(&a.points, i, spec.left, spec.right);
    let v = side_verdict(&f, &weighted, p, side, delta, opts)?;
    match v.status {
        IntegrabilityStatus::Divergent => Ok((true, v)),
        IntegrabilityStatus::Integrable => Ok((false, v)),
        IntegrabilityStatus::Inconclusive => Err(ClassifyError::Undecidable {
            condition: "(x − p)·b²/σ² ∈ L¹_loc".into(),
            point: Extended::Finite(p),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{build_problem, RawProblem};
    use super::*;

    fn spec(l: Extended, r: Extended, x0: f64, b: &str, hints: Vec<f64>) -> ProblemSpec {
        build_problem(
            &RawProblem {
                left: l,
                right: r,
                x0,
                mu: "0".into(),
                sigma: "1".into(),
                b: b.into(),
                singularity_hints: hints,
                base_point: None,
            },
            &ClassifyOptions::default(),
        )
        .unwrap()
    }

    const R: (Extended, Extended) = (Extended::NegInf, Extended::PosInf);

    #[test]
    fn singular_sets() {
        let o = ClassifyOptions::default();
        assert_eq!(
            singular_set(&spec(R.0, R.1, 1.0, "1/x", vec![]), &o).unwrap().points,
            vec![0.0]
        );
        assert!(singular_set(&spec(R.0, R.1, 1.0, "1", vec![]), &o)
            .unwrap()
            .points
            .is_empty());
        let s = spec(R.0, R.1, 1.0, "abs(x)^(-3/4)", vec![0.0]);
        assert_eq!(singular_set(&s, &o).unwrap().points, vec![0.0]);
    }

    #[test]
    fn effective_intervals() {
        let s = spec(R.0, R.1, 1.0, "1/x", vec![]);
        let a = singular_set(&s, &ClassifyOptions::default()).unwrap();
        let (al, be) = effective_interval(&s, &a);
        assert_eq!(al.location, Extended::Finite(0.0));
        assert_eq!(al.kind, EndpointKind::SingularPoint);
        assert_eq!(be.location, Extended::PosInf);
        assert_eq!(be.kind, EndpointKind::NaturalBoundary);

        let s = spec(Extended::Finite(0.0), Extended::Finite(1.0), 0.3, "1", vec![]);
        let a = singular_set(&s, &ClassifyOptions::default()).unwrap();
        let (al, be) = effective_interval(&s, &a);
        assert_eq!(
            (al.location, be.location),
            (Extended::Finite(0.0), Extended::Finite(1.0))
        );

        let s = spec(
            Extended::Finite(-3.0),
            Extended::Finite(3.0),
            0.0,
            "1/((x+2)*(x-1))",
            vec![],
        );
        let a = singular_set(&s, &ClassifyOptions::default()).unwrap();
        assert_eq!(a.points, vec![-2.0, 1.0]);
        let (al, be) = effective_interval(&s, &a);
        assert_eq!(
            (al.location, be.location),
            (Extended::Finite(-2.0), Extended::Finite(1.0))
        );
    }

    #[test]
    fn membership_in_b() {
        let o = ClassifyOptions::default();
        let s = spec(R.0, R.1, 1.0, "1/x", vec![]);
        let a = singular_set(&s, &o).unwrap();
        assert!(b_membership(&s, &a, 0.0, Side::Right, &o).unwrap().0);
        let s = spec(R.0, R.1, 1.0, "abs(x)^(-3/4)", vec![]);
        let a = singular_set(&s, &o).unwrap();
        assert!(!b_membership(&s, &a, 0.0, Side::Right, &o).unwrap().0);
        let s = spec(R.0, R.1, 1.0, "1", vec![]);
        let a = singular_set(&s, &o).unwrap();
        assert!(matches!(
            b_membership(&s, &a, 0.5, Side::Right, &o),
            Err(ClassifyError::NotSingular(_))
        ));
    }

    #[test]
    fn log_corrected_b_is_undecidable() {
        let o = ClassifyOptions::default();
        let s = spec(
            Extended::Finite(-0.5),
            Extended::Finite(0.5),
            0.25,
            "1/(abs(x)*log(1/abs(x))^(1/4))",
            vec![],
        );
        let a = singular_set(&s, &o).unwrap();
        assert_eq!(a.points, vec![0.0]);
        assert!(matches!(
            b_membership(&s, &a, 0.0, Side::Right, &o),
            Err(ClassifyError::Undecidable { .. })
        ));
    }

    #[test]
    fn squared_log_correction_is_resolved_as_integrable() {
        // |x|·b² = 1/(|x| log²(1/|x|)) is integrable at 0; the dyadic slope
        // over the available shells already sits below the band.
        let o = ClassifyOptions::default();
        let s = spec(
            Extended::Finite(-0.5),
            Extended::Finite(0.5),
            0.25,
            "1/(abs(x)*log(1/abs(x)))",
            vec![],
        );
        let a = singular_set(&s, &o).unwrap();
        assert_eq!(a.points, vec![0.0]);
        let (member, v) = b_membership(&s, &a, 0.0, Side::Right, &o).unwrap();
        assert!(!member);
        assert!(v.estimated_exponent.unwrap() > -0.95);
    }
}

//! Four-level martingale classification of the generalized stochastic
//! exponential.
//!
//! Pipeline: singular set `A` → effective interval `(α, β)` around `x0` →
//! membership of singular endpoints in `B` → local-martingale gate → scale
//! objects, good endpoints and exits of the auxiliary diffusion `Ỹ` with drift
//! `μ + bσ` → martingale and uniform-integrability conditions.

mod problem;
mod scale;
mod singular;

use serde::Serialize;
use serde_json::{json, Value};

use crate::quad::{integrate_with, IntegrabilityVerdict, QuadError, QuadOptions, QuadResult};
use crate::Extended;

pub use problem::{build_problem, Coefficients, ProblemError, ProblemErrors, ProblemSpec, RawProblem};
pub use scale::{endpoint_good, feller_exits, scale_objects, ScaleObjects};
pub use singular::{b_membership, effective_interval, singular_set, SingularCandidate, SingularSet};

#[derive(Clone, Copy, Debug)]
pub struct ClassifyOptions {
    /// Margin of the numerical integrability classifier.
    pub eps_cls: f64,
    /// Relative tolerance of the outer quadratures.
    pub tol: f64,
    /// Sub-panels per octave of the scale-function grid.
    pub sub_panels: usize,
    /// Octaves of the scale-function grid toward each endpoint.
    pub octaves: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            eps_cls: 0.05,
            tol: 1e-8,
            sub_panels: 4,
            octaves: 48,
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ClassifyError {
    #[error("invalid problem: {0}")]
    Problem(#[from] ProblemErrors),
    #[error("undecidable: `{condition}` at {point} is inconclusive")]
    Undecidable { condition: String, point: Extended },
    #[error("internal inconsistency at {point}: {detail}")]
    Consistency { point: Extended, detail: String },
    #[error("{0} is not a point of the singular set")]
    NotSingular(f64),
    #[error("quadrature failure: {0}")]
    Quad(#[from] QuadError),
}

impl From<ProblemError> for ClassifyError {
    fn from(e: ProblemError) -> Self {
        match e {
            ProblemError::Undecidable { point, condition } => ClassifyError::Undecidable {
                condition: condition.to_string(),
                point: Extended::Finite(point),
            },
            other => ClassifyError::Problem(ProblemErrors(vec![other])),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    NotLocalMartingale,
    StrictLocalMartingale,
    Martingale,
    UniformlyIntegrableMartingale,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::NotLocalMartingale => "not_local_martingale",
            Level::StrictLocalMartingale => "strict_local_martingale",
            Level::Martingale => "martingale",
            Level::UniformlyIntegrableMartingale => "uniformly_integrable_martingale",
        }
    }

    pub fn parse(s: &str) -> Option<Level> {
        Some(match s {
            "not_local_martingale" => Level::NotLocalMartingale,
            "strict_local_martingale" => Level::StrictLocalMartingale,
            "martingale" => Level::Martingale,
            "uniformly_integrable_martingale" => Level::UniformlyIntegrableMartingale,
            _ => return None,
        })
    }

    pub fn is_local_martingale(self) -> bool {
        self >= Level::StrictLocalMartingale
    }

    pub fn is_martingale(self) -> bool {
        self >= Level::Martingale
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointKind {
    NaturalBoundary,
    SingularPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EffectiveEndpoint {
    #[serde(serialize_with = "ser_extended")]
    pub location: Extended,
    pub kind: EndpointKind,
}

/// One piece of numerical support for a condition.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Evidence {
    Integrability {
        what: String,
        verdict: IntegrabilityVerdict,
    },
    Quadrature {
        what: String,
        result: QuadResult<f64>,
    },
    Value {
        what: String,
        #[serde(serialize_with = "ser_extended")]
        value: Extended,
    },
    Note {
        what: String,
    },
}

/// Analysis of one effective endpoint.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EndpointAnalysis {
    pub endpoint: EffectiveEndpoint,
    pub s_finite: bool,
    pub s_tilde_finite: bool,
    pub good: bool,
    pub feller_exits: bool,
    pub in_b: Option<bool>,
    pub evidence: Vec<Evidence>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Condition {
    pub id: String,
    pub statement: String,
    pub holds: bool,
    pub evidence: Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub level: Level,
    pub certificate: Vec<Condition>,
    pub singular_set: SingularSet,
    pub alpha: EffectiveEndpoint,
    pub beta: EffectiveEndpoint,
    /// Present once the local-martingale gate has passed.
    pub endpoints: Option<[EndpointAnalysis; 2]>,
}

impl Verdict {
    pub fn condition(&self, id: &str) -> Option<&Condition> {
        self.certificate.iter().find(|c| c.id == id)
    }

    /// `{"level": …, "conditions": [{"id", "statement", "holds", "evidence"}]}`.
    pub fn to_json(&self) -> Value {
        json!({
            "level": self.level.as_str(),
            "conditions": self.certificate.iter().map(|c| json!({
                "id": c.id,
                "statement": c.statement,
                "holds": c.holds,
                "evidence": c.evidence,
            })).collect::<Vec<_>>(),
        })
    }
}

pub(crate) fn ser_extended<S: serde::Serializer>(v: &Extended, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Extended::Finite(x) => s.serialize_f64(*x),
        other => s.serialize_str(&other.to_string()),
    }
}

pub(crate) fn extended_json(v: Extended) -> Value {
    match v {
        Extended::Finite(x) => json!(x),
        other => json!(other.to_string()),
    }
}

/// Half the distance from `points[i]` to its nearest neighbour or finite
/// interval end, capped at 1.
pub(crate) fn neighbour_delta(points: &[f64], i: usize, left: Extended, right: Extended) -> f64 {
    let p = points[i];
    let mut d: f64 = 2.0;
    if i > 0 {
        d = d.min(p - points[i - 1]);
    }
    if i + 1 < points.len() {
        d = d.min(points[i + 1] - p);
    }
    if let Extended::Finite(l) = left {
        d = d.min(p - l);
    }
    if let Extended::Finite(r) = right {
        d = d.min(r - p);
    }
    0.5 * d
}

struct CertificateBuilder(Vec<Condition>);

impl CertificateBuilder {
    fn push(&mut self, id: &str, statement: &str, holds: bool, evidence: Value) {
        self.0.push(Condition {
            id: id.to_string(),
            statement: statement.to_string(),
            holds,
            evidence,
        });
    }
}

/// `b = 0` a.e. on `(α, β)`: structurally, or `∫|b| < 1e−12` numerically.
fn b_vanishes(spec: &ProblemSpec, alpha: Extended, beta: Extended) -> (bool, Value) {
    if spec.b.is_zero() {
        return (true, json!({"method": "structural"}));
    }
    let q = QuadOptions::absolute(1e-14).with_max_panels(1 << 14);
    let b = &spec.coef.b;
    let r = integrate_with(|x: f64| Ok(b.eval(x)?.abs()), alpha, beta, &q);
    match r {
        Ok(r) => (
            r.value < 1e-12,
            json!({"method": "quadrature", "integral_abs_b": r.value, "error": r.abs_error_estimate}),
        ),
        Err(e) => (false, json!({"method": "quadrature", "failure": e.to_string()})),
    }
}

fn endpoint_json(e: &EffectiveEndpoint) -> Value {
    json!({"location": extended_json(e.location), "kind": serde_json::to_value(e.kind).unwrap()})
}

/// Full classification.
pub fn classify(spec: &ProblemSpec, opts: &ClassifyOptions) -> Result<Verdict, ClassifyError> {
    let mut cert = CertificateBuilder(Vec::new());
    let a_set = singular_set(spec, opts)?;
    cert.push(
        "singular_set",
        "A = {x ∈ J : b²/σ² ∉ L¹_loc(x)}",
        true,
        serde_json::to_value(&a_set).unwrap(),
    );
    let (alpha, beta) = effective_interval(spec, &a_set);
    if !(Extended::Finite(spec.base_point) > alpha.location && Extended::Finite(spec.base_point) < beta.location) {
        return Err(ProblemError::BasePoint { c: spec.base_point }.into());
    }
    cert.push(
        "effective_interval",
        "x0 ∈ (α(x0), β(x0)) ⊂ J \\ A with α(x0), β(x0) ∈ A ∪ {l, r}",
        true,
        json!({"alpha": endpoint_json(&alpha), "beta": endpoint_json(&beta)}),
    );
    let mut in_b = [None, None];
    let mut gate = true;
    for (i, (e, side, id)) in [
        (&alpha, crate::expr::Side::Right, "alpha_in_B_or_boundary"),
        (&beta, crate::expr::Side::Left, "beta_in_B_or_boundary"),
    ]
    .into_iter()
    .enumerate()
    {
        let (holds, ev) = match e.kind {
            EndpointKind::NaturalBoundary => (true, json!({"kind": "natural_boundary"})),
            EndpointKind::SingularPoint => {
                let p = e.location.finite().unwrap();
                let (member, verdict) = b_membership(spec, &a_set, p, side, opts)?;
                in_b[i] = Some(member);
                (
                    member,
                    json!({"kind": "singular_point", "weighted_integrability": verdict}),
                )
            }
        };
        gate &= holds;
        cert.push(
            id,
            "endpoint ∈ B ∪ {l, r}, B decided by (x − p)·b²/σ² ∉ L¹_loc(p±)",
            holds,
            ev,
        );
    }
    cert.push(
        "local_martingale",
        "Z is a local martingale iff α(x0), β(x0) ∈ B ∪ {l, r}",
        gate,
        json!({}),
    );
    if !gate {
        return Ok(Verdict {
            level: Level::NotLocalMartingale,
            certificate: cert.0,
            singular_set: a_set,
            alpha,
            beta,
            endpoints: None,
        });
    }
    let scale = scale_objects(spec, alpha.location, beta.location, opts)?;
    let mut analyses = Vec::new();
    for (i, e) in [alpha, beta].into_iter().enumerate() {
        let (good, mut ev) = endpoint_good(spec, &scale, &e, opts)?;
        let (exits, ev2) = feller_exits(spec, &scale, &e, opts)?;
        ev.extend(ev2);
        let lim = scale.limits(i);
        if in_b[i] == Some(true) && good {
            return Err(ClassifyError::Consistency {
                point: e.location,
                detail: "endpoint in B classified as good".into(),
            });
        }
        analyses.push(EndpointAnalysis {
            endpoint: e,
            s_finite: lim.0.is_finite(),
            s_tilde_finite: lim.1.is_finite(),
            good,
            feller_exits: exits,
            in_b: in_b[i],
            evidence: ev,
        });
    }
    let [a, b]: [EndpointAnalysis; 2] = analyses.try_into().unwrap();
    Ok(finish(spec, cert, a_set, a, b, false))
}

fn finish(
    spec: &ProblemSpec,
    mut cert: CertificateBuilder,
    a_set: SingularSet,
    a: EndpointAnalysis,
    b: EndpointAnalysis,
    direct: bool,
) -> Verdict {
    let ev = |e: &EndpointAnalysis| serde_json::to_value(e).unwrap();
    cert.push(
        "alpha_good",
        "s(α) > −∞ and (s − s(α))·b²/(ρσ²) ∈ L¹_loc(α+)",
        a.good,
        ev(&a),
    );
    cert.push(
        "beta_good",
        "s(β) < ∞ and (s(β) − s)·b²/(ρσ²) ∈ L¹_loc(β−)",
        b.good,
        ev(&b),
    );
    cert.push(
        "alpha_no_exit",
        "Ỹ does not exit at α: s̃(α) = −∞ or (s̃ − s̃(α))/(ρ̃σ²) ∉ L¹_loc(α+)",
        !a.feller_exits,
        json!({}),
    );
    cert.push(
        "beta_no_exit",
        "Ỹ does not exit at β: s̃(β) = ∞ or (s̃(β) − s̃)/(ρ̃σ²) ∉ L¹_loc(β−)",
        !b.feller_exits,
        json!({}),
    );
    let martingale = (!a.feller_exits || a.good) && (!b.feller_exits || b.good);
    let statement = if direct {
        "Z is a martingale iff Ỹ does not exit at the bad endpoints of J"
    } else {
        "Z is a martingale iff Ỹ exits only at good endpoints of (α, β)"
    };
    cert.push("martingale", statement, martingale, json!({}));
    let mut level = if martingale {
        Level::Martingale
    } else {
        Level::StrictLocalMartingale
    };
    if martingale {
        let (zero, zero_ev) = b_vanishes(spec, a.endpoint.location, b.endpoint.location);
        let ui_b = a.good && !b.s_tilde_finite;
        let ui_c = b.good && !a.s_tilde_finite;
        let ui_d = a.good && b.good;
        cert.push("ui_a_b_zero", "b = 0 a.e. on (α, β)", zero, zero_ev);
        cert.push("ui_b", "α good and s̃(β) = ∞", ui_b, json!({}));
        cert.push("ui_c", "β good and s̃(α) = −∞", ui_c, json!({}));
        cert.push("ui_d", "α and β good", ui_d, json!({}));
        let ui = zero || ui_b || ui_c || ui_d;
        cert.push(
            "uniformly_integrable",
            "Z is uniformly integrable iff one of (a)–(d) holds",
            ui,
            json!({}),
        );
        if ui {
            level = Level::UniformlyIntegrableMartingale;
        }
    }
    Verdict {
        level,
        certificate: cert.0,
        singular_set: a_set,
        alpha: a.endpoint,
        beta: b.endpoint,
        endpoints: Some([a, b]),
    }
}

/// Direct criteria on `(l, r)` for the case `A = ∅`: `Z` is a martingale
/// iff `Ỹ` does not exit at the bad endpoints, and uniformly integrable iff
/// one of (a)–(d) holds. Returns `None` when `A` is not empty.
pub fn classify_without_singularities(
    spec: &ProblemSpec,
    opts: &ClassifyOptions,
) -> Result<Option<Verdict>, ClassifyError> {
    let a_set = singular_set(spec, opts)?;
    if !a_set.points.is_empty() {
        return Ok(None);
    }
    let mut cert = CertificateBuilder(Vec::new());
    cert.push(
        "singular_set",
        "b²/σ² ∈ L¹_loc(J)",
        true,
        serde_json::to_value(&a_set).unwrap(),
    );
    let l = EffectiveEndpoint {
        location: spec.left,
        kind: EndpointKind::NaturalBoundary,
    };
    let r = EffectiveEndpoint {
        location: spec.right,
        kind: EndpointKind::NaturalBoundary,
    };
    let scale = scale_objects(spec, spec.left, spec.right, opts)?;
    let analyse = |i: usize, e: EffectiveEndpoint| -> Result<EndpointAnalysis, ClassifyError> {
        let (good, ev) = endpoint_good(spec, &scale, &e, opts)?;
        let (exits, _) = feller_exits(spec, &scale, &e, opts)?;
        let lim = scale.limits(i);
        Ok(EndpointAnalysis {
            endpoint: e,
            s_finite: lim.0.is_finite(),
            s_tilde_finite: lim.1.is_finite(),
            good,
            feller_exits: exits,
            in_b: None,
            evidence: ev,
        })
    };
    let a = analyse(0, l)?;
    let b = analyse(1, r)?;
    Ok(Some(finish(spec, cert, a_set, a, b, true)))
}

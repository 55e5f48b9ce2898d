//! Scale functions `s`, `s̃` on the effective interval, good endpoints and
//! Feller exits of `Ỹ`.
//!
//! Each half-ray from the base point `c` toward an endpoint carries a knot
//! grid: a few linear panels, then `m` geometric sub-panels per octave toward
//! the endpoint. `ψ = ∫_c g` is tabulated at the knots (`g = 2μ/σ²` or
//! `2μ/σ² + 2b/σ`), panel integrals of `ρ = e^{−ψ}` are kept in log space, and
//! octave sums feed the shell classifier.

use serde::Serialize;
use serde_json::json;

use super::{ClassifyError, ClassifyOptions, EffectiveEndpoint, Evidence, ProblemSpec};
use crate::expr::{local_behavior, CompiledExpr, DomainFault, LocalBehavior, Side};
use crate::quad::{
    classify_log_shells, hint_verdict, integrate_with, verdict_from_log_shells, IntegrabilityStatus,
    IntegrabilityVerdict, QuadError, QuadOptions,
};
use crate::Extended;

const LINEAR_PANELS: usize = 64;
const MAX_PANEL_LOG_RANGE: f64 = 30.0;

fn inner_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-300,
        rel_tol: 1e-12,
        max_panels: 1 << 12,
    }
}

/// `ψ` enters only through `e^{−ψ}`, so its error is absolute.
fn psi_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-14,
        ..inner_opts()
    }
}

fn weight_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-300,
        rel_tol: 1e-8,
        max_panels: 1 << 12,
    }
}

fn cross_check_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-300,
        rel_tol: 1e-7,
        max_panels: 1 << 10,
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    if m == f64::INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn nested(e: QuadError, x: f64) -> DomainFault {
    match e {
        QuadError::Eval(f) => f,
        _ => DomainFault {
            subexpr: "inner quadrature".into(),
            x,
            reason: "non-finite value",
        },
    }
}

/// `∫_a^b f` over an unordered pair of finite points, returning the positive
/// measure integral.
fn measure_integral(
    f: impl FnMut(f64) -> Result<f64, DomainFault>,
    a: f64,
    b: f64,
    q: &QuadOptions,
) -> Result<f64, QuadError> {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if lo == hi {
        return Ok(0.0);
    }
    match integrate_with(f, Extended::Finite(lo), Extended::Finite(hi), q) {
        Ok(r) => Ok(r.value),
        Err(QuadError::NonFinite) => Ok(f64::INFINITY),
        Err(QuadError::Eval(d)) if d.reason == "non-finite value" => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Antiderivative helper for `g`.
#[derive(Clone, Debug)]
struct Field {
    g: CompiledExpr,
    constant: Option<f64>,
}

impl Field {
    fn new(g: &CompiledExpr) -> Self {
        Field {
            constant: g.constant(),
            g: g.clone(),
        }
    }

    /// Signed `∫_a^b g`.
    fn integral(&self, a: f64, b: f64) -> Result<f64, QuadError> {
        if a == b {
            return Ok(0.0);
        }
        if let Some(k) = self.constant {
            return Ok(k * (b - a));
        }
        let (lo, hi, s) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        let r = integrate_with(
            |x| self.g.eval(x),
            Extended::Finite(lo),
            Extended::Finite(hi),
            &psi_opts(),
        )?;
        Ok(s * r.value)
    }
}

/// One density `ρ = e^{−ψ}` along one ray.
#[derive(Clone, Debug, Serialize)]
pub struct RayDensity {
    #[serde(skip)]
    field: Field,
    #[serde(skip)]
    psi: Vec<f64>,
    /// Cumulative `∫ ρ` from `c` to each knot.
    #[serde(skip)]
    cumulative: Vec<f64>,
    /// `ln ∫_{knot}^{e} ρ`.
    #[serde(skip)]
    log_tail: Vec<f64>,
    /// Known local form of `ρ` at the endpoint.
    pub local: Option<RhoLocal>,
    pub limit_finite: bool,
    pub limit: f64,
    pub verdict: IntegrabilityVerdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct Ray {
    #[serde(serialize_with = "super::ser_extended")]
    pub endpoint: Extended,
    /// `−1` toward `α`, `+1` toward `β`.
    pub dir: f64,
    #[serde(skip)]
    knots: Vec<f64>,
    /// Index of the first geometric knot.
    #[serde(skip)]
    geometric_start: usize,
    #[serde(skip)]
    sub_panels: usize,
    pub plain: RayDensity,
    pub tilde: RayDensity,
}

impl Ray {
    fn inside(&self) -> Side {
        if self.dir < 0.0 {
            Side::Right
        } else {
            Side::Left
        }
    }

    fn at_infinity(&self) -> bool {
        !self.endpoint.is_finite()
    }

    fn octaves(&self) -> usize {
        (self.knots.len() - 1 - self.geometric_start) / self.sub_panels
    }

    fn panel(&self, x: f64) -> usize {
        let n = self.knots.len() - 1;
        let t = x * self.dir;
        let i = self.knots.partition_point(|&k| k * self.dir <= t);
        i.saturating_sub(1).min(n - 1)
    }

    fn density(&self, tilde: bool) -> &RayDensity {
        if tilde {
            &self.tilde
        } else {
            &self.plain
        }
    }

    /// `ψ(x)` for `x` on the ray.
    fn psi(&self, d: &RayDensity, x: f64) -> Result<f64, QuadError> {
        let j = self.panel(x);
        Ok(d.psi[j] + d.field.integral(self.knots[j], x)?)
    }

    /// `∫ ρ` from `c` to `x` along the ray, as a positive measure.
    fn mass(&self, d: &RayDensity, x: f64) -> Result<f64, QuadError> {
        let j = self.panel(x);
        let (xj, pj) = (self.knots[j], d.psi[j]);
        let part = measure_integral(
            |y| Ok((-(pj + d.field.integral(xj, y).map_err(|e| nested(e, y))?)).exp()),
            xj,
            x,
            &inner_opts(),
        )?;
        Ok(d.cumulative[j] + part)
    }

    /// Integral of `N(x)·|h(x)|` over each panel, `N(x) = ∫_x^e ρ / ρ(x)`.
    fn weight_panels(&self, d: &RayDensity, h: &CompiledExpr, from: usize) -> Result<Vec<f64>, QuadError> {
        let n = self.knots.len() - 1;
        let mut out = Vec::with_capacity(n - from);
        for j in from..n {
            let (xj, xe) = (self.knots[j], self.knots[j + 1]);
            let pj = d.psi[j];
            let tail = d.log_tail[j + 1];
            let f = &d.field;
            let w = measure_integral(
                |x| {
                    let hx = h.eval(x)?.abs();
                    if hx == 0.0 {
                        return Ok(0.0);
                    }
                    let px = pj + f.integral(xj, x).map_err(|e| nested(e, x))?;
                    let near = measure_integral(
                        |y| Ok((-f.integral(x, y).map_err(|e| nested(e, y))?).exp()),
                        x,
                        xe,
                        &inner_opts(),
                    )
                    .map_err(|e| nested(e, x))?;
                    let far = (px + tail).exp();
                    Ok((near + far) * hx)
                },
                xj,
                xe,
                &weight_opts(),
            )?;
            out.push(w);
        }
        Ok(out)
    }
}

/// `ρ`, `ρ̃`, `s`, `s̃` on `(α, β)` with base point `c`.
#[derive(Clone, Debug, Serialize)]
pub struct ScaleObjects {
    pub base_point: f64,
    /// Rays toward `α` and toward `β`.
    pub rays: [Ray; 2],
}

fn knots(c: f64, e: Extended, dir: f64, opts: &ClassifyOptions) -> (Vec<f64>, usize) {
    let m = opts.sub_panels.max(1);
    let mut out = vec![c];
    let linear_to = |target: f64, out: &mut Vec<f64>| {
        let len = (target - c).abs();
        if len > 0.0 {
            let n = ((len * 8.0).ceil() as usize).clamp(1, LINEAR_PANELS);
            for i in 1..=n {
                out.push(c + (target - c) * i as f64 / n as f64);
            }
        }
    };
    match e {
        Extended::Finite(e) => {
            let delta = (e - c).abs().min(1.0);
            linear_to(e - dir * delta, &mut out);
            let start = out.len() - 1;
            let floor = 1024.0 * f64::EPSILON * e.abs();
            let mut k = 0;
            while k < opts.octaves && delta * 0.5f64.powi(k as i32 + 1) > floor {
                k += 1;
            }
            for j in 1..=k * m {
                let tau = delta * 2f64.powf(-(j as f64) / m as f64);
                out.push(e - dir * tau);
            }
            (out, start)
        }
        _ => {
            let o = if dir > 0.0 { c.max(0.0) } else { c.min(0.0) };
            linear_to(o + dir, &mut out);
            let start = out.len() - 1;
            for j in 1..=opts.octaves * m {
                out.push(o + dir * 2f64.powf(j as f64 / m as f64));
            }
            (out, start)
        }
    }
}

/// Known local form of `ρ = e^{−∫g}` at an endpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum RhoLocal {
    /// `ρ ≍ |x − e|^power` (or `|x|^power` at infinity).
    Power { power: f64 },
    /// `ψ` diverges faster than logarithmically, with `g ~ C·|x − e|^g_exponent`;
    /// then `∫_x^e ρ / ρ(x) ~ 1/|g(x)|` whenever `ρ` decays.
    Rapid { decays: bool, g_exponent: f64 },
}

fn rho_local(g: &CompiledExpr, e: Extended, inside: Side, dir: f64) -> Option<RhoLocal> {
    let at_inf = !e.is_finite();
    match local_behavior(g.source(), e, inside)? {
        LocalBehavior::Zero => Some(RhoLocal::Power { power: 0.0 }),
        LocalBehavior::Power { coef, exponent, next } => {
            let integrable = |a: f64| if at_inf { a < -1.0 } else { a > -1.0 };
            if integrable(exponent) {
                Some(RhoLocal::Power { power: 0.0 })
            } else if exponent == -1.0 {
                integrable(next).then(|| RhoLocal::Power {
                    power: if at_inf { -dir * coef } else { dir * coef },
                })
            } else {
                Some(RhoLocal::Rapid {
                    decays: dir * coef > 0.0,
                    g_exponent: exponent,
                })
            }
        }
    }
}

fn build_density(
    g: &CompiledExpr,
    e: Extended,
    dir: f64,
    inside: Side,
    knots: &[f64],
    start: usize,
    m: usize,
    opts: &ClassifyOptions,
) -> Result<RayDensity, ClassifyError> {
    let field = Field::new(g);
    let n = knots.len() - 1;
    let mut psi = vec![0.0; n + 1];
    for j in 0..n {
        psi[j + 1] = psi[j] + field.integral(knots[j], knots[j + 1])?;
    }
    let mut log_panel = Vec::with_capacity(n);
    for j in 0..n {
        let (a, b) = (knots[j], knots[j + 1]);
        let reference = psi[j].min(psi[j + 1]);
        let pj = psi[j];
        let v = measure_integral(
            |x| Ok((reference - pj - field.integral(a, x).map_err(|e| nested(e, x))?).exp()),
            a,
            b,
            &inner_opts(),
        )?;
        log_panel.push(v.ln() - reference);
    }
    let mut cumulative = vec![0.0; n + 1];
    for j in 0..n {
        cumulative[j + 1] = cumulative[j] + log_panel[j].exp();
    }
    let at_inf = !e.is_finite();
    let octaves = (n - start) / m;
    let shells: Vec<(usize, f64)> = (0..octaves)
        .map(|k| {
            let lo = start + k * m;
            (
                k,
                log_panel[lo..lo + m]
                    .iter()
                    .fold(f64::NEG_INFINITY, |a, &b| log_add(a, b)),
            )
        })
        .collect();
    let local = rho_local(g, e, inside, dir);
    let mut verdict = match local {
        Some(RhoLocal::Power { power }) => hint_verdict(power, at_inf),
        Some(RhoLocal::Rapid { decays, .. }) => {
            let (status, a) = if decays {
                (IntegrabilityStatus::Integrable, f64::NEG_INFINITY)
            } else {
                (IntegrabilityStatus::Divergent, f64::INFINITY)
            };
            IntegrabilityVerdict::symbolic(status, a)
        }
        None => verdict_from_log_shells(&shells, opts.eps_cls, at_inf),
    };
    if local.is_some() {
        verdict.dyadic_sums = shells.iter().map(|&(k, l)| (k, l.exp())).collect();
    }
    let limit_finite = match verdict.status {
        IntegrabilityStatus::Integrable => true,
        IntegrabilityStatus::Divergent => false,
        IntegrabilityStatus::Inconclusive => {
            return Err(ClassifyError::Undecidable {
                condition: format!("finiteness of the scale function with density exp(−∫ {})", g.source()),
                point: e,
            })
        }
    };
    let mut log_tail = vec![f64::INFINITY; n + 1];
    if limit_finite {
        let ratio = match local {
            Some(RhoLocal::Power { power }) if at_inf => 2f64.powf(power + 1.0),
            Some(RhoLocal::Power { power }) => 2f64.powf(-(power + 1.0)),
            _ => {
                let logs: Vec<f64> = shells.iter().map(|s| s.1).collect();
                classify_log_shells(&logs, opts.eps_cls).ratio.unwrap_or(0.0).min(1.0)
            }
        };
        let last = shells.last().map_or(f64::NEG_INFINITY, |s| s.1);
        log_tail[n] = if ratio <= 0.0 || ratio >= 1.0 || last == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            last + (ratio / (1.0 - ratio)).ln()
        };
        for j in (0..n).rev() {
            log_tail[j] = log_add(log_panel[j], log_tail[j + 1]);
        }
    }
    let limit = if limit_finite {
        dir * (cumulative[n] + log_tail[n].exp())
    } else {
        dir * f64::INFINITY
    };
    Ok(RayDensity {
        field,
        psi,
        cumulative,
        log_tail,
        local,
        limit_finite,
        limit,
        verdict,
    })
}

/// Builds the scale objects on `(α, β)` around the problem's base point.
pub fn scale_objects(
    spec: &ProblemSpec,
    alpha: Extended,
    beta: Extended,
    opts: &ClassifyOptions,
) -> Result<ScaleObjects, ClassifyError> {
    let c = spec.base_point;
    let m = opts.sub_panels.max(1);
    let ray = |e: Extended, dir: f64| -> Result<Ray, ClassifyError> {
        let (k, start) = knots(c, e, dir, opts);
        let inside = if dir < 0.0 { Side::Right } else { Side::Left };
        let plain = build_density(&spec.coef.drift, e, dir, inside, &k, start, m, opts)?;
        let tilde = build_density(&spec.coef.drift_tilde, e, dir, inside, &k, start, m, opts)?;
        Ok(Ray {
            endpoint: e,
            dir,
            knots: k,
            geometric_start: start,
            sub_panels: m,
            plain,
            tilde,
        })
    };
    Ok(ScaleObjects {
        base_point: c,
        rays: [ray(alpha, -1.0)?, ray(beta, 1.0)?],
    })
}

impl ScaleObjects {
    fn ray_for(&self, x: f64) -> &Ray {
        if x < self.base_point {
            &self.rays[0]
        } else {
            &self.rays[1]
        }
    }

    fn signed_mass(&self, x: f64, tilde: bool) -> Result<f64, QuadError> {
        let r = self.ray_for(x);
        Ok(r.dir * r.mass(r.density(tilde), x)?)
    }

    /// `s(x) = ∫_c^x ρ`.
    pub fn s(&self, x: f64) -> Result<f64, QuadError> {
        self.signed_mass(x, false)
    }

    /// `s̃(x) = ∫_c^x ρ̃`.
    pub fn s_tilde(&self, x: f64) -> Result<f64, QuadError> {
        self.signed_mass(x, true)
    }

    /// `ρ(x) = exp(−∫_c^x 2μ/σ²)`.
    pub fn rho(&self, x: f64) -> Result<f64, QuadError> {
        let r = self.ray_for(x);
        Ok((-r.psi(&r.plain, x)?).exp())
    }

    /// `ρ̃(x) = ρ(x)·exp(−∫_c^x 2b/σ)`.
    pub fn rho_tilde(&self, x: f64) -> Result<f64, QuadError> {
        let r = self.ray_for(x);
        Ok((-r.psi(&r.tilde, x)?).exp())
    }

    /// `(s(e), s̃(e))` at the endpoint of ray `i` (0 for `α`, 1 for `β`).
    pub fn limits(&self, i: usize) -> (Extended, Extended) {
        let r = &self.rays[i];
        let lim = |d: &RayDensity| Extended::from_float(d.limit).unwrap_or(Extended::Finite(f64::NAN));
        (lim(&r.plain), lim(&r.tilde))
    }

    fn ray_index(&self, e: &EffectiveEndpoint) -> usize {
        if self.rays[0].endpoint == e.location {
            0
        } else {
            1
        }
    }
}

/// Integrability at the endpoint of `N·|h|` for the given density.
fn weight_verdict(
    ray: &Ray,
    d: &RayDensity,
    h: &CompiledExpr,
    opts: &ClassifyOptions,
) -> Result<IntegrabilityVerdict, ClassifyError> {
    let at_inf = ray.at_infinity();
    let behavior = local_behavior(h.source(), ray.endpoint, ray.inside());
    if matches!(behavior, Some(LocalBehavior::Zero)) || h.constant() == Some(0.0) {
        return Ok(IntegrabilityVerdict::symbolic(
            IntegrabilityStatus::Integrable,
            f64::NEG_INFINITY,
        ));
    }
    if let Some(LocalBehavior::Power { exponent, .. }) = behavior {
        match d.local {
            Some(RhoLocal::Power { .. }) => return Ok(hint_verdict(1.0 + exponent, at_inf)),
            Some(RhoLocal::Rapid {
                decays: true,
                g_exponent,
            }) => return Ok(hint_verdict(exponent - g_exponent, at_inf)),
            _ => {}
        }
    }
    let m = ray.sub_panels;
    let start = ray.geometric_start;
    if d.psi[start..]
        .windows(2)
        .any(|w| (w[1] - w[0]).abs() > MAX_PANEL_LOG_RANGE)
    {
        // ρ is not resolved by the grid.
        return Ok(IntegrabilityVerdict {
            status: IntegrabilityStatus::Inconclusive,
            estimated_exponent: None,
            dyadic_sums: Vec::new(),
            method: crate::quad::Method::Numeric,
            ratio: None,
        });
    }
    let panels = ray.weight_panels(d, h, ray.geometric_start)?;
    let shells: Vec<(usize, f64)> = (0..ray.octaves())
        .map(|k| (k, panels[k * m..(k + 1) * m].iter().sum::<f64>().ln()))
        .collect();
    Ok(verdict_from_log_shells(&shells, opts.eps_cls, at_inf))
}

fn verdict_evidence(what: &str, v: IntegrabilityVerdict) -> Evidence {
    Evidence::Integrability {
        what: what.to_string(),
        verdict: v,
    }
}

/// Good-endpoint test: `s(e)` finite and `|s(e) − s|·b²/(ρσ²) ∈ L¹_loc(e)`,
/// cross-checked against the `s̃`-form.
pub fn endpoint_good(
    spec: &ProblemSpec,
    scale: &ScaleObjects,
    e: &EffectiveEndpoint,
    opts: &ClassifyOptions,
) -> Result<(bool, Vec<Evidence>), ClassifyError> {
    let ray = &scale.rays[scale.ray_index(e)];
    let h = &spec.coef.b2_over_s2;
    let mut evidence = Vec::new();
    let mut form = |d: &RayDensity, name: &str| -> Result<IntegrabilityStatus, ClassifyError> {
        evidence.push(Evidence::Value {
            what: format!("{name}(e)"),
            value: Extended::from_float(d.limit).unwrap_or(Extended::Finite(f64::NAN)),
        });
        if !d.limit_finite {
            return Ok(IntegrabilityStatus::Divergent);
        }
        let v = weight_verdict(ray, d, h, opts)?;
        let st = v.status;
        evidence.push(verdict_evidence(&format!("|{name}(e) − {name}|·b²/(ρσ²) near e"), v));
        Ok(st)
    };
    let primary = form(&ray.plain, "s")?;
    let dual = form(&ray.tilde, "s̃")?;
    use IntegrabilityStatus::*;
    let good = match (primary, dual) {
        (Integrable, Divergent) | (Divergent, Integrable) => {
            return Err(ClassifyError::Consistency {
                point: e.location,
                detail: format!("s-form says {primary:?}, s̃-form says {dual:?}"),
            })
        }
        (Integrable, _) | (Inconclusive, Integrable) => true,
        (Divergent, _) | (Inconclusive, Divergent) => false,
        (Inconclusive, Inconclusive) => {
            return Err(ClassifyError::Undecidable {
                condition: "good endpoint".into(),
                point: e.location,
            })
        }
    };
    Ok((good, evidence))
}

/// Whether `Ỹ` exits at `e`: `s̃(e)` finite and
/// `|s̃(e) − s̃|/(ρ̃σ²) ∈ L¹_loc(e)`.
pub fn feller_exits(
    spec: &ProblemSpec,
    scale: &ScaleObjects,
    e: &EffectiveEndpoint,
    opts: &ClassifyOptions,
) -> Result<(bool, Vec<Evidence>), ClassifyError> {
    let ray = &scale.rays[scale.ray_index(e)];
    let d = &ray.tilde;
    let mut evidence = vec![Evidence::Value {
        what: "s̃(e)".into(),
        value: Extended::from_float(d.limit).unwrap_or(Extended::Finite(f64::NAN)),
    }];
    if !d.limit_finite {
        return Ok((false, evidence));
    }
    let v = weight_verdict(ray, d, &spec.coef.inv_s2, opts)?;
    let status = v.status;
    evidence.push(verdict_evidence("|s̃(e) − s̃|/(ρ̃σ²) near e", v));
    let exits = match status {
        IntegrabilityStatus::Integrable => true,
        IntegrabilityStatus::Divergent => false,
        IntegrabilityStatus::Inconclusive => {
            return Err(ClassifyError::Undecidable {
                condition: "Feller exit of Ỹ".into(),
                point: e.location,
            })
        }
    };
    match v_tilde_cross_check(ray, &spec.coef.inv_s2, opts) {
        Ok(cross) => {
            let agrees = cross.status == status || cross.status == IntegrabilityStatus::Inconclusive;
            evidence.push(verdict_evidence("ṽ by nested quadrature (cross-check)", cross));
            if !agrees {
                evidence.push(Evidence::Note {
                    what: "nested ṽ disagrees with the split form".into(),
                });
            }
        }
        Err(err) => evidence.push(Evidence::Note {
            what: format!("nested ṽ unavailable: {err}"),
        }),
    }
    Ok((exits, evidence))
}

/// Octave increments of `ṽ(x) = ∫_c^x ρ̃(y) ∫_c^y 1/(ρ̃σ²)` toward the endpoint.
fn v_tilde_cross_check(
    ray: &Ray,
    inv_s2: &CompiledExpr,
    opts: &ClassifyOptions,
) -> Result<IntegrabilityVerdict, QuadError> {
    let d = &ray.tilde;
    let m = ray.sub_panels;
    let start = ray.geometric_start;
    // panels past the first one that ρ̃ does not resolve are skipped
    let n = (0..ray.knots.len() - 1)
        .find(|&j| (d.psi[j + 1] - d.psi[j]).abs() > MAX_PANEL_LOG_RANGE)
        .unwrap_or(ray.knots.len() - 1);
    let f = &d.field;
    // log of ∫_c^{x_j} 1/(ρ̃σ²), so that e^{ψ} never appears unscaled
    let mut log_inner_at_knot = f64::NEG_INFINITY;
    let mut increments = Vec::with_capacity(n);
    for j in 0..n {
        let (xj, xe, pj) = (ray.knots[j], ray.knots[j + 1], d.psi[j]);
        // ∫_{x_j}^y e^{ψ(x) − ψ(x_j) − shift}/σ²
        let inner = |y: f64, shift: f64| -> Result<f64, QuadError> {
            measure_integral(
                |x| Ok((f.integral(xj, x).map_err(|e| nested(e, x))? - shift).exp() * inv_s2.eval(x)?),
                xj,
                y,
                &cross_check_opts(),
            )
        };
        let inc = measure_integral(
            |y| {
                let fy = f.integral(xj, y).map_err(|e| nested(e, y))?;
                let carried = (log_inner_at_knot - pj - fy).exp();
                Ok(carried + inner(y, fy).map_err(|e| nested(e, y))?)
            },
            xj,
            xe,
            &cross_check_opts(),
        )?;
        let fe = d.psi[j + 1] - pj;
        log_inner_at_knot = log_add(log_inner_at_knot, d.psi[j + 1] + inner(xe, fe)?.ln());
        increments.push(inc);
    }
    let shells: Vec<(usize, f64)> = (0..ray.octaves())
        .take_while(|k| start + (k + 1) * m <= n)
        .map(|k| {
            let lo = start + k * m;
            (k, increments[lo..lo + m].iter().sum::<f64>().ln())
        })
        .collect();
    Ok(verdict_from_log_shells(&shells, opts.eps_cls, ray.at_infinity()))
}

impl ScaleObjects {
    /// JSON summary of both rays.
    pub fn summary(&self) -> serde_json::Value {
        let ray = |r: &Ray| {
            json!({
                "endpoint": super::extended_json(r.endpoint),
                "s_limit": r.plain.limit,
                "s_tilde_limit": r.tilde.limit,
                "rho_local": r.plain.local,
                "rho_tilde_local": r.tilde.local,
            })
        };
        json!({"base_point": self.base_point, "alpha": ray(&self.rays[0]), "beta": ray(&self.rays[1])})
    }
}

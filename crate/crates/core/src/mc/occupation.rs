//! Occupation integrals `∫ b²(Y_t) dt`: the Brownian closed form, its Monte
//! Carlo estimate, and the refinement check that separates integrable from
//! divergent `b²/σ²`.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::{estimate_mean, Coef, McError, McEstimate, SimConfig};
use crate::classify::{singular_set, ClassifyOptions, ProblemSpec};
use crate::expr::{candidate_singularities, leading_exponent, CompiledExpr, Expr, Side};
use crate::quad::{integrate_with, local_integrability, IntegrabilityOptions, IntegrabilityStatus, QuadOptions};
use crate::Extended;

fn check_integrable(f: &Expr, p: f64, side: Side, delta: f64) -> Result<(), McError> {
    let c = CompiledExpr::new(f);
    let hint = leading_exponent(f, Extended::Finite(p), side);
    let o = IntegrabilityOptions {
        delta,
        ..Default::default()
    };
    let v = local_integrability(|x: f64| Ok(c.eval(x)?.abs()), p, side, hint, &o)
        .map_err(|e| McError::Quad(e.to_string()))?;
    match v.status {
        IntegrabilityStatus::Integrable => Ok(()),
        s => Err(McError::Divergent(format!("`{f}` near {p} ({s:?})"))),
    }
}

/// `E[∫₀^τ b²(W_t) dt]` for Brownian motion from `x0` stopped on leaving
/// `(α, β)`:
/// `2(β−x0)/(β−α)·∫_α^{x0}(y−α)b² + 2(x0−α)/(β−α)·∫_{x0}^β(β−y)b²`.
pub fn bm_occupation_expectation(b_sq: &Expr, alpha: f64, beta: f64, x0: f64) -> Result<f64, McError> {
    if !(alpha < x0 && x0 < beta) {
        return Err(McError::Config(format!("need α < x0 < β, got {alpha}, {x0}, {beta}")));
    }
    let left = Expr::x().sub(Expr::num(alpha)).mul(b_sq.clone());
    let right = Expr::num(beta).sub(Expr::x()).mul(b_sq.clone());
    let mut cuts = candidate_singularities(b_sq, Extended::Finite(alpha), Extended::Finite(beta));
    cuts.retain(|&p| p != x0);
    let delta = |p: f64| {
        let mut d = (p - alpha).min(beta - p);
        for &q in cuts.iter().chain([x0].iter()) {
            if q != p {
                d = d.min((q - p).abs());
            }
        }
        (0.5 * d).min(1.0)
    };
    check_integrable(&left, alpha, Side::Right, delta(alpha))?;
    check_integrable(&right, beta, Side::Left, delta(beta))?;
    for &p in &cuts {
        check_integrable(b_sq, p, Side::Left, delta(p))?;
        check_integrable(b_sq, p, Side::Right, delta(p))?;
    }
    let q = QuadOptions::relative(1e-10).with_max_panels(1 << 16);
    let piece = |f: &Expr, lo: f64, hi: f64| -> Result<f64, McError> {
        let c = CompiledExpr::new(f);
        let mut knots = vec![lo];
        knots.extend(cuts.iter().copied().filter(|&p| p > lo && p < hi));
        knots.push(hi);
        let mut total = 0.0;
        for w in knots.windows(2) {
            let r = integrate_with(|x: f64| c.eval(x), Extended::Finite(w[0]), Extended::Finite(w[1]), &q)
                .map_err(|e| McError::Quad(e.to_string()))?;
            total += r.value;
        }
        Ok(total)
    };
    let i1 = piece(&left, alpha, x0)?;
    let i2 = piece(&right, x0, beta)?;
    let len = beta - alpha;
    Ok(2.0 * (beta - x0) / len * i1 + 2.0 * (x0 - alpha) / len * i2)
}

/// Monte Carlo estimate of `E[∫₀^τ b²(W_t) dt]` with Euler steps of size
/// `cfg.dt`; paths still inside at `cfg.horizon` are cut there.
pub fn bm_occupation_mc(
    b_sq: &Expr,
    alpha: f64,
    beta: f64,
    x0: f64,
    cfg: &SimConfig,
) -> Result<(McEstimate, usize), McError> {
    let (mut est, cut) = bm_occupation_mc_many(std::slice::from_ref(b_sq), alpha, beta, x0, cfg)?;
    Ok((est.remove(0), cut))
}

/// [`bm_occupation_mc`] for several integrands along the same paths.
pub fn bm_occupation_mc_many(
    b_sqs: &[Expr],
    alpha: f64,
    beta: f64,
    x0: f64,
    cfg: &SimConfig,
) -> Result<(Vec<McEstimate>, usize), McError> {
    if !(cfg.dt > 0.0) || cfg.n_paths < 2 || b_sqs.is_empty() {
        return Err(McError::Config(
            "need dt > 0, at least two paths and one integrand".into(),
        ));
    }
    let fs: Vec<Coef> = b_sqs.iter().map(|e| Coef::new(&CompiledExpr::new(e))).collect();
    let dt = cfg.dt;
    let sq = dt.sqrt();
    let max_steps = cfg.steps();
    let run = |p: usize| -> Result<(Vec<f64>, bool), crate::expr::DomainFault> {
        let mut rng = cfg.rng(p);
        let mut y = x0;
        let mut acc = vec![0.0; fs.len()];
        let mut inside = true;
        for _ in 0..max_steps {
            for (a, f) in acc.iter_mut().zip(&fs) {
                *a += f.eval(y)?;
            }
            let xi: f64 = StandardNormal.sample(&mut rng);
            y += sq * xi;
            if y <= alpha || y >= beta {
                inside = false;
                break;
            }
        }
        acc.iter_mut().for_each(|a| *a *= dt);
        Ok((acc, inside))
    };
    let out: Result<Vec<(Vec<f64>, bool)>, _> = cfg.install(|| (0..cfg.n_paths).into_par_iter().map(run).collect());
    let out = out?;
    let cut = out.iter().filter(|r| r.1).count();
    let est = (0..fs.len())
        .map(|i| {
            let v: Vec<f64> = out.iter().map(|r| r.0[i]).collect();
            estimate_mean(&v, cfg.horizon)
        })
        .collect();
    Ok((est, cut))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum Det1Case {
    Integrable,
    Divergent { point: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Det1Report {
    pub case: Det1Case,
    pub interval: (f64, f64),
    pub dt: f64,
    /// Paths entering the statistic (all paths, or the crossing ones).
    pub n_used: usize,
    pub mean_coarse: f64,
    pub mean_fine: f64,
    /// `mean_fine / mean_coarse`.
    pub ratio: f64,
    pub threshold: String,
    pub passed: bool,
}

/// Refinement check on `(c, d)`: `∑ b²(y_k)·h` accumulated up to the first
/// exit from `(c, d)` or the horizon, on coupled grids `h = dt` and `dt/4`.
/// Integrable `b²/σ²` needs the fine/coarse ratio within 10% of 1; a
/// divergent point needs ratio > 2 over paths crossing it.
pub fn det1_property_check(spec: &ProblemSpec, cfg: &SimConfig, interval: (f64, f64)) -> Result<Det1Report, McError> {
    let (c, d) = interval;
    if !(c < spec.x0 && spec.x0 < d) {
        return Err(McError::Config(format!("x0 must lie in ({c}, {d})")));
    }
    let a = singular_set(spec, &ClassifyOptions::default()).map_err(|e| McError::Quad(e.to_string()))?;
    let case = match a.points.iter().find(|&&p| p > c && p < d) {
        Some(&point) => Det1Case::Divergent { point },
        None => Det1Case::Integrable,
    };
    let mu = Coef::new(&spec.coef.mu);
    let sigma = Coef::new(&spec.coef.sigma);
    let b = Coef::new(&spec.coef.b);
    let (dt, h) = (cfg.dt, cfg.dt / 4.0);
    let (sq, sqh) = (dt.sqrt(), h.sqrt());
    let steps = cfg.steps();
    let x0 = spec.x0;
    let run = |p: usize| -> Result<(f64, f64, bool), crate::expr::DomainFault> {
        let mut rng = cfg.rng(p);
        let (mut yc, mut yf) = (x0, x0);
        let (mut ac, mut af) = (0.0, 0.0);
        let (mut live_c, mut live_f) = (true, true);
        let mut crossed = false;
        for _ in 0..steps {
            let mut sum_xi = 0.0;
            for _ in 0..4 {
                let xi: f64 = StandardNormal.sample(&mut rng);
                sum_xi += xi;
                if live_f {
                    let bv = b.eval(yf)?;
                    af += bv * bv * h;
                    yf += mu.eval(yf)? * h + sigma.eval(yf)? * sqh * xi;
                    live_f = yf > c && yf < d;
                }
            }
            if live_c {
                let bv = b.eval(yc)?;
                ac += bv * bv * dt;
                let y_new = yc + mu.eval(yc)? * dt + sigma.eval(yc)? * sq * (0.5 * sum_xi);
                if let Det1Case::Divergent { point } = case {
                    crossed |= (yc - point) * (y_new - point) <= 0.0;
                }
                yc = y_new;
                live_c = yc > c && yc < d;
            }
            if !live_c && !live_f {
                break;
            }
        }
        Ok((ac, af, crossed))
    };
    let out: Result<Vec<_>, _> = cfg.install(|| (0..cfg.n_paths).into_par_iter().map(run).collect());
    let out = out?;
    let used: Vec<&(f64, f64, bool)> = match case {
        Det1Case::Integrable => out.iter().collect(),
        Det1Case::Divergent { .. } => out.iter().filter(|r| r.2).collect(),
    };
    let n_used = used.len();
    let mean = |f: &dyn Fn(&(f64, f64, bool)) -> f64| used.iter().map(|r| f(r)).sum::<f64>() / n_used.max(1) as f64;
    let mean_coarse = mean(&|r| r.0);
    let mean_fine = mean(&|r| r.1);
    let ratio = mean_fine / mean_coarse;
    let (threshold, passed) = match case {
        Det1Case::Integrable => ("|ratio − 1| ≤ 0.1".to_string(), (ratio - 1.0).abs() <= 0.1),
        Det1Case::Divergent { .. } => ("ratio > 2".to_string(), n_used > 0 && ratio > 2.0),
    };
    Ok(Det1Report {
        case,
        interval,
        dt,
        n_used,
        mean_coarse,
        mean_fine,
        ratio,
        threshold,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse;

    #[test]
    fn occupation_closed_form() {
        let v = bm_occupation_expectation(&parse("1").unwrap(), 0.0, 2.0, 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        // (x0 − α)(β − x0) for b² = 1 at an asymmetric start.
        let v = bm_occupation_expectation(&parse("1").unwrap(), -1.0, 3.0, 0.5).unwrap();
        assert!((v - 1.5 * 2.5).abs() < 1e-12);
        // b² = x^{−1/2}: I₁ = ∫₀¹ y^{1/2} = 2/3, I₂ = ∫₁² (2 − y) y^{−1/2} = 8√2/3 − 10/3.
        let v = bm_occupation_expectation(&parse("x^(-1/2)").unwrap(), 0.0, 2.0, 1.0).unwrap();
        let exact = 2.0 / 3.0 + 8.0 * 2f64.sqrt() / 3.0 - 10.0 / 3.0;
        assert!((v - exact).abs() < 1e-9, "{v} vs {exact}");
    }

    #[test]
    fn occupation_divergence_is_a_fault() {
        let r = bm_occupation_expectation(&parse("x^(-2)").unwrap(), 0.0, 2.0, 1.0);
        assert!(matches!(r, Err(McError::Divergent(_))));
    }

    #[test]
    fn occupation_mc_small() {
        let cfg = SimConfig::new(50.0, 1e-4, 4000, 9);
        let (e, cut) = bm_occupation_mc(&parse("1").unwrap(), 0.0, 2.0, 1.0, &cfg).unwrap();
        assert_eq!(cut, 0);
        // Discrete monitoring shortens exits by O(√dt).
        assert!((e.mean - 1.0).abs() < 4.0 * e.std_error + 0.02, "{e:?}");
    }
}

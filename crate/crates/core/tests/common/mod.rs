//! Random problems over the expression language and the invariants checked
//! on them. Shared by the property tests and the acceptance runner.
#![allow(dead_code)]

use gsexp::classify::{
    build_problem, classify, classify_without_singularities, singular_set, ClassifyError, ClassifyOptions,
    EndpointAnalysis, Evidence, ProblemSpec, RawProblem, Verdict,
};
use gsexp::mc::{simulate_z, SimConfig};
use gsexp::quad::IntegrabilityStatus;
use gsexp::Extended;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

#[derive(Clone, Debug)]
pub struct Instance {
    pub left: Extended,
    pub right: Extended,
    pub x0: f64,
    pub mu: String,
    pub sigma: String,
    pub b: String,
    /// Position of an alternative base point inside the effective interval, in (0, 1).
    pub base_frac: f64,
}

impl Instance {
    pub fn raw(&self) -> RawProblem {
        RawProblem {
            left: self.left,
            right: self.right,
            x0: self.x0,
            mu: self.mu.clone(),
            sigma: self.sigma.clone(),
            b: self.b.clone(),
            singularity_hints: vec![],
            base_point: None,
        }
    }

    pub fn spec(&self) -> Option<ProblemSpec> {
        build_problem(&self.raw(), &ClassifyOptions::default()).ok()
    }
}

fn coef() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.5), Just(1.0), Just(1.5), Just(2.0), -2.0..2.0f64].prop_map(|c| (c * 8.0_f64).round() / 8.0)
}

fn nonzero_coef() -> impl Strategy<Value = f64> {
    coef().prop_map(|c| if c == 0.0 { 0.75 } else { c })
}

fn drift() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("0".to_string()),
        coef().prop_map(|m| format!("{m}")),
        coef().prop_map(|m| format!("{m}*x")),
        (0.5..2.0f64).prop_map(|k| format!("{}/x", (k * 4.0).round() / 4.0)),
    ]
}

fn diffusion() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("1".to_string()),
        (0.5..2.0f64).prop_map(|s| format!("{}", (s * 4.0).round() / 4.0)),
        Just("sqrt(1 + x^2)".to_string()),
    ]
}

fn integrand() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("0".to_string()),
        nonzero_coef().prop_map(|c| format!("{c}")),
        nonzero_coef().prop_map(|c| format!("{c}/x")),
        nonzero_coef().prop_map(|c| format!("{c}*x")),
        (nonzero_coef(), prop::sample::select(vec!["-3/4", "-1/4", "1/2", "-1"]))
            .prop_map(|(c, p)| format!("{c}*abs(x)^({p})")),
    ]
}

fn domain() -> impl Strategy<Value = (Extended, Extended, f64)> {
    use gsexp::ExtendedReal::*;
    prop_oneof![
        (0.3..3.0f64, any::<bool>()).prop_map(|(x, s)| (NegInf, PosInf, if s { x } else { -x })),
        (0.3..3.0f64).prop_map(|x| (Finite(0.0), PosInf, x)),
        (1.0..3.0f64, 0.2..0.8f64).prop_map(|(r, f)| (NegInf, Finite(r), r * f)),
        (1.0..3.0f64, 1.0..3.0f64, 0.2..0.8f64).prop_map(|(l, r, f)| (Finite(-l), Finite(r), -l + (l + r) * f)),
    ]
}

pub fn instance() -> impl Strategy<Value = Instance> {
    (domain(), drift(), diffusion(), integrand(), 0.1..0.9f64).prop_map(
        |((left, right, x0), mu, sigma, b, base_frac)| {
            // `1/x` drift only on the half line.
            let mu = if mu.ends_with("/x") && left != Extended::Finite(0.0) {
                "0".into()
            } else {
                mu
            };
            Instance {
                left,
                right,
                x0: (x0 * 64.0).round() / 64.0,
                mu,
                sigma,
                b,
                base_frac,
            }
        },
    )
}

/// Verdict, or `None` for invalid or undecidable instances.
pub fn decided(spec: &ProblemSpec) -> Result<Option<Verdict>, TestCaseError> {
    match classify(spec, &ClassifyOptions::default()) {
        Ok(v) => Ok(Some(v)),
        Err(ClassifyError::Undecidable { .. }) | Err(ClassifyError::Problem(_)) => Ok(None),
        Err(e) => Err(TestCaseError::fail(format!("classification failed: {e}"))),
    }
}

fn holds(v: &Verdict, id: &str) -> Result<bool, TestCaseError> {
    v.condition(id)
        .map(|c| c.holds)
        .ok_or_else(|| TestCaseError::fail(format!("certificate lacks `{id}`")))
}

pub fn outcome_vector(v: &Verdict) -> Vec<(String, bool)> {
    v.certificate.iter().map(|c| (c.id.clone(), c.holds)).collect()
}

pub fn lattice_coherence(inst: &Instance) -> Result<(), TestCaseError> {
    let Some(spec) = inst.spec() else { return Ok(()) };
    let Some(v) = decided(&spec)? else { return Ok(()) };
    let local = holds(&v, "local_martingale")?;
    prop_assert_eq!(v.level.is_local_martingale(), local);
    if local {
        let mart = holds(&v, "martingale")?;
        prop_assert_eq!(v.level.is_martingale(), mart);
        if mart {
            let ui = holds(&v, "uniformly_integrable")?;
            prop_assert_eq!(v.level == gsexp::classify::Level::UniformlyIntegrableMartingale, ui);
            let any = ["ui_a_b_zero", "ui_b", "ui_c", "ui_d"]
                .iter()
                .map(|id| holds(&v, id))
                .collect::<Result<Vec<_>, _>>()?;
            prop_assert_eq!(ui, any.iter().any(|&h| h));
        }
    } else {
        prop_assert!(v.condition("martingale").is_none());
    }
    Ok(())
}

pub fn base_point_invariance(inst: &Instance) -> Result<(), TestCaseError> {
    let Some(spec) = inst.spec() else { return Ok(()) };
    let Some(v) = decided(&spec)? else { return Ok(()) };
    let (lo, hi) = (
        v.alpha.location.to_float().max(inst.x0 - 4.0),
        v.beta.location.to_float().min(inst.x0 + 4.0),
    );
    let c = lo + (hi - lo) * inst.base_frac;
    let Some(w) = decided(&spec.with_base_point(c))? else {
        return Ok(());
    };
    prop_assert_eq!(
        outcome_vector(&v),
        outcome_vector(&w),
        "base point {} vs {}",
        inst.x0,
        c
    );
    prop_assert_eq!(v.level, w.level);
    Ok(())
}

/// `(s-form, s̃-form)` statuses read back from the endpoint evidence.
pub fn form_statuses(e: &EndpointAnalysis) -> (Option<IntegrabilityStatus>, Option<IntegrabilityStatus>) {
    let mut out = (None, None);
    for ev in &e.evidence {
        match ev {
            Evidence::Value { what, value } if what == "s(e)" && !matches!(value, Extended::Finite(_)) => {
                out.0 = Some(IntegrabilityStatus::Divergent)
            }
            Evidence::Value { what, value } if what == "s̃(e)" && !matches!(value, Extended::Finite(_)) => {
                out.1.get_or_insert(IntegrabilityStatus::Divergent);
            }
            Evidence::Integrability { what, verdict } if what.starts_with("|s(e)") => out.0 = Some(verdict.status),
            Evidence::Integrability { what, verdict } if what.starts_with("|s̃(e)") && what.contains("b²") => {
                out.1 = Some(verdict.status)
            }
            _ => {}
        }
    }
    out
}

pub fn dual_form_agreement(inst: &Instance) -> Result<(), TestCaseError> {
    let Some(spec) = inst.spec() else { return Ok(()) };
    let Some(v) = decided(&spec)? else { return Ok(()) };
    let Some(ends) = &v.endpoints else { return Ok(()) };
    for e in ends {
        if let (Some(p), Some(d)) = form_statuses(e) {
            if p != IntegrabilityStatus::Inconclusive && d != IntegrabilityStatus::Inconclusive {
                prop_assert_eq!(p, d, "endpoint {}", e.endpoint.location);
            }
        }
    }
    Ok(())
}

pub fn b_implies_bad(inst: &Instance) -> Result<(), TestCaseError> {
    let Some(spec) = inst.spec() else { return Ok(()) };
    let Some(v) = decided(&spec)? else { return Ok(()) };
    if let Some(ends) = &v.endpoints {
        for e in ends {
            if e.in_b == Some(true) {
                prop_assert!(!e.good, "endpoint {} in B but good", e.endpoint.location);
            }
        }
    }
    Ok(())
}

pub fn empty_a_reduction(inst: &Instance) -> Result<(), TestCaseError> {
    let Some(spec) = inst.spec() else { return Ok(()) };
    let Some(v) = decided(&spec)? else { return Ok(()) };
    let direct = match classify_without_singularities(&spec, &ClassifyOptions::default()) {
        Ok(d) => d,
        Err(ClassifyError::Undecidable { .. }) => return Ok(()),
        Err(e) => return Err(TestCaseError::fail(format!("direct path failed: {e}"))),
    };
    match direct {
        None => prop_assert!(!v.singular_set.points.is_empty()),
        Some(d) => {
            prop_assert!(v.singular_set.points.is_empty());
            prop_assert_eq!(v.level, d.level);
            for id in [
                "martingale",
                "uniformly_integrable",
                "alpha_good",
                "beta_good",
                "alpha_no_exit",
                "beta_no_exit",
            ] {
                prop_assert_eq!(
                    v.condition(id).map(|c| c.holds),
                    d.condition(id).map(|c| c.holds),
                    "{}",
                    id
                );
            }
        }
    }
    Ok(())
}

pub fn reflection_symmetry(inst: &Instance) -> Result<(), TestCaseError> {
    let Some(spec) = inst.spec() else { return Ok(()) };
    let Some(v) = decided(&spec)? else { return Ok(()) };
    let Some(w) = decided(&spec.reflected())? else {
        return Ok(());
    };
    prop_assert_eq!(v.level, w.level);
    let swap = |id: &str| match id {
        "ui_b" => "ui_c".to_string(),
        "ui_c" => "ui_b".to_string(),
        _ => id.replace("alpha", "#").replace("beta", "alpha").replace('#', "beta"),
    };
    for c in &v.certificate {
        prop_assert_eq!(Some(c.holds), w.condition(&swap(&c.id)).map(|d| d.holds), "{}", c.id);
    }
    Ok(())
}

pub fn mc_determinism(inst: &Instance) -> Result<(), TestCaseError> {
    let Some(spec) = inst.spec() else { return Ok(()) };
    let Ok(a) = singular_set(&spec, &ClassifyOptions::default()) else {
        return Ok(());
    };
    for seed in [1, 42, 7] {
        let cfg = SimConfig::new(0.2, 1e-3, 64, seed);
        let one = simulate_z(&spec, &a, &cfg.with_threads(1), &[0.1, 0.2]);
        let many = simulate_z(&spec, &a, &cfg.with_threads(3), &[0.1, 0.2]);
        match (one, many) {
            (Ok(x), Ok(y)) => {
                for (p, q) in x.z.iter().flatten().zip(y.z.iter().flatten()) {
                    prop_assert_eq!(p.to_bits(), q.to_bits());
                }
                prop_assert_eq!(&x.status, &y.status);
            }
            (Err(x), Err(y)) => prop_assert_eq!(x, y),
            (x, y) => return Err(TestCaseError::fail(format!("{x:?} vs {y:?}"))),
        }
    }
    Ok(())
}

pub const CASES: u32 = 100;

/// Runs `check` on `CASES` random instances; `Err` carries the minimal failure.
pub fn run_suite(seed: u64, check: fn(&Instance) -> Result<(), TestCaseError>) -> Result<u32, String> {
    let config = Config {
        cases: CASES,
        failure_persistence: None,
        rng_algorithm: proptest::test_runner::RngAlgorithm::ChaCha,
        ..Config::default()
    };
    let mut seed_bytes = [0u8; 32];
    seed_bytes[..8].copy_from_slice(&seed.to_le_bytes());
    let rng = proptest::test_runner::TestRng::from_seed(proptest::test_runner::RngAlgorithm::ChaCha, &seed_bytes);
    let mut runner = TestRunner::new_with_rng(config, rng);
    let mut n = 0u32;
    let counter = std::cell::Cell::new(0u32);
    let r = runner.run(&instance(), |i| {
        counter.set(counter.get() + 1);
        check(&i)
    });
    n += counter.get();
    r.map(|_| n).map_err(|e| e.to_string())
}

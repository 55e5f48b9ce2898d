//! Built-in corpus: classifier verdicts plus the Monte Carlo test, per case.
//!
//! A case file is `{"name", "expected", "problem", "mc"?}` where `expected` is
//! a level name or `"undecidable"` and `mc` holds `dt`, `horizon`, `seed`.
//! Strict and non-local cases must show a mean deficit, martingale cases must
//! not.

use std::path::Path;

use gsexp::classify::{classify, singular_set, ClassifyError, ClassifyOptions, Level};
use gsexp::mc::{martingale_test, SimConfig};
use serde_json::{json, Value};

use crate::problem_file::parse_problem_file;
use crate::{test_json, Io, EXIT_ERROR, EXIT_OK, EXIT_SELFTEST_FAILED};

const BUILTIN: [(&str, &str); 7] = [
    ("example_i", include_str!("../corpus/example_i.json")),
    ("example_ii", include_str!("../corpus/example_ii.json")),
    ("bessel3", include_str!("../corpus/bessel3.json")),
    ("not_local", include_str!("../corpus/not_local.json")),
    ("zero_b", include_str!("../corpus/zero_b.json")),
    ("bm_drift", include_str!("../corpus/bm_drift.json")),
    ("undecidable", include_str!("../corpus/undecidable.json")),
];

#[derive(Clone, Debug, PartialEq)]
pub struct McPlan {
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Case {
    pub name: String,
    /// A level name or `"undecidable"`.
    pub expected: String,
    pub problem: Value,
    pub mc: Option<McPlan>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaseResult {
    pub name: String,
    pub expected: String,
    pub got: String,
    pub mc: Option<Value>,
    pub mc_ok: bool,
    pub passed: bool,
}

pub fn parse_case(text: &str) -> Result<Case, String> {
    let v: Value = serde_json::from_str(text).map_err(|e| format!("not valid JSON: {e}"))?;
    let name = v["name"].as_str().ok_or("missing \"name\"")?.to_string();
    let expected = v["expected"]
        .as_str()
        .ok_or_else(|| format!("{name}: missing \"expected\""))?
        .to_string();
    if expected != "undecidable" && Level::parse(&expected).is_none() {
        return Err(format!("{name}: unknown expectation {expected:?}"));
    }
    let problem = v
        .get("problem")
        .cloned()
        .ok_or_else(|| format!("{name}: missing \"problem\""))?;
    let mc = match v.get("mc") {
        None | Some(Value::Null) => None,
        Some(m) => Some(McPlan {
            dt: m["dt"].as_f64().ok_or_else(|| format!("{name}: mc.dt"))?,
            horizon: m["horizon"].as_f64().ok_or_else(|| format!("{name}: mc.horizon"))?,
            seed: m["seed"].as_u64().ok_or_else(|| format!("{name}: mc.seed"))?,
        }),
    };
    Ok(Case {
        name,
        expected,
        problem,
        mc,
    })
}

pub fn builtin_corpus() -> Vec<Case> {
    BUILTIN
        .iter()
        .map(|(n, text)| parse_case(text).unwrap_or_else(|e| panic!("built-in case {n}: {e}")))
        .collect()
}

/// Every `*.json` in `dir`, sorted by file name.
pub fn load_corpus(dir: &Path) -> Result<Vec<Case>, String> {
    let rd = std::fs::read_dir(dir).map_err(|e| format!("cannot read corpus {}: {e}", dir.display()))?;
    let mut files: Vec<_> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(format!("corpus {} has no *.json cases", dir.display()));
    }
    files
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            parse_case(&text).map_err(|e| format!("{}: {e}", p.display()))
        })
        .collect()
}

pub fn run_case(case: &Case, paths: usize, opts: &ClassifyOptions) -> Result<CaseResult, String> {
    let pf = parse_problem_file(&case.problem.to_string()).map_err(|e| format!("{}: {e}", case.name))?;
    let built = pf.build(opts);
    let verdict = match &built {
        Ok(spec) => classify(spec, opts),
        Err(e) if e.undecidable => Err(ClassifyError::Undecidable {
            condition: e.issues[0].message.clone(),
            point: gsexp::Extended::Finite(pf.raw.x0),
        }),
        Err(e) => return Err(format!("{}: {e}", case.name)),
    };
    let got = match &verdict {
        Ok(v) => v.level.as_str().to_string(),
        Err(ClassifyError::Undecidable { .. }) => "undecidable".to_string(),
        Err(e) => format!("error: {e}"),
    };
    let (mut mc, mut mc_ok) = (None, true);
    if let (Some(plan), Ok(spec), Some(level)) = (&case.mc, &built, Level::parse(&case.expected)) {
        let a = singular_set(spec, opts).map_err(|e| format!("{}: {e}", case.name))?;
        let cfg = SimConfig::new(plan.horizon, plan.dt, paths, plan.seed);
        let t = martingale_test(spec, &a, &cfg, plan.horizon).map_err(|e| format!("{}: {e}", case.name))?;
        mc_ok = t.outcome.is_deficit() != level.is_martingale();
        mc = Some(test_json(&t));
    }
    Ok(CaseResult {
        name: case.name.clone(),
        passed: got == case.expected && mc_ok,
        expected: case.expected.clone(),
        got,
        mc,
        mc_ok,
    })
}

fn mc_cell(r: &CaseResult) -> String {
    match &r.mc {
        None => "-".into(),
        Some(m) => {
            let z = m["z_score"]
                .as_f64()
                .map_or_else(|| m["z_score"].to_string(), |z| format!("{z:.2}"));
            format!("{} (z = {z})", m["outcome"].as_str().unwrap_or("?"))
        }
    }
}

pub fn render_table(results: &[CaseResult]) -> String {
    let mut s = format!(
        "{:<14} {:<32} {:<32} {:<40} {}\n",
        "case", "expected", "got", "mc", "result"
    );
    for r in results {
        s.push_str(&format!(
            "{:<14} {:<32} {:<32} {:<40} {}\n",
            r.name,
            r.expected,
            r.got,
            mc_cell(r),
            if r.passed { "pass" } else { "FAIL" }
        ));
    }
    s
}

pub fn cmd_selftest(
    corpus: Option<&Path>,
    paths: usize,
    opts: &ClassifyOptions,
    quiet: bool,
    io: &mut Io,
) -> (i32, Value) {
    let mut report = json!({"command": "selftest", "paths": paths});
    let cases = match corpus {
        None => builtin_corpus(),
        Some(dir) => match load_corpus(dir) {
            Ok(c) => c,
            Err(e) => {
                let _ = writeln!(io.err, "error: {e}");
                return (EXIT_ERROR, report);
            }
        },
    };
    if paths < 2 {
        let _ = writeln!(io.err, "error: --paths must be at least 2");
        return (EXIT_ERROR, report);
    }
    let mut results = Vec::new();
    for c in &cases {
        match run_case(c, paths, opts) {
            Ok(r) => results.push(r),
            Err(e) => {
                let _ = writeln!(io.err, "error: {e}");
                return (EXIT_ERROR, report);
            }
        }
    }
    let all = results.iter().all(|r| r.passed);
    if !quiet || !all {
        let _ = write!(io.out, "{}", render_table(&results));
    }
    report["cases"] = Value::Array(
        results
            .iter()
            .map(|r| json!({"name": r.name, "expected": r.expected, "got": r.got, "mc": r.mc, "passed": r.passed}))
            .collect(),
    );
    report["passed"] = json!(all);
    (if all { EXIT_OK } else { EXIT_SELFTEST_FAILED }, report)
}

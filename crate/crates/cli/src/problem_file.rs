//! JSON problem files.
//!
//! ```json
//! {"interval": {"left": "-inf", "right": 2}, "x0": 1, "mu": "0", "sigma": "1",
//!  "b": "1/x", "hints": {"singular_points": [0]}, "base_point": 1,
//!  "simulation": {"paths": 10000, "dt": 1e-3, "horizon": 1, "seed": 42, "times": [1]}}
//! ```
//!
//! `hints`, `base_point` and `simulation` are optional.

use std::fmt;
use std::path::Path;

use gsexp::classify::{build_problem, ClassifyOptions, ProblemError, ProblemSpec, RawProblem};
use gsexp::Extended;
use serde_json::{json, Map, Value};

#[derive(Clone, Debug, PartialEq)]
pub struct Issue {
    pub field: String,
    pub message: String,
}

/// Every problem found in a file, reported together.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationError {
    pub issues: Vec<Issue>,
    /// Some issue is an undecidable integrability test rather than bad input.
    pub undecidable: bool,
}

impl ValidationError {
    fn single(field: &str, message: impl Into<String>) -> Self {
        ValidationError {
            issues: vec![Issue {
                field: field.into(),
                message: message.into(),
            }],
            undecidable: false,
        }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "invalid problem file ({} issue{}):",
            self.issues.len(),
            if self.issues.len() == 1 { "" } else { "s" }
        )?;
        for i in &self.issues {
            write!(f, "\n  {}: {}", i.field, i.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationError {}

/// Simulation settings a file may carry; command-line flags take precedence.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimulationSection {
    pub paths: Option<usize>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
    pub times: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemFile {
    pub raw: RawProblem,
    pub simulation: SimulationSection,
}

const KEYS: [&str; 9] = [
    "interval",
    "x0",
    "mu",
    "sigma",
    "b",
    "hints",
    "base_point",
    "simulation",
    "name",
];

struct Collector(Vec<Issue>);

impl Collector {
    fn push(&mut self, field: &str, message: impl Into<String>) {
        self.0.push(Issue {
            field: field.into(),
            message: message.into(),
        });
    }

    fn number(&mut self, v: Option<&Value>, field: &str) -> Option<f64> {
        match v {
            None => {
                self.push(field, "missing");
                None
            }
            Some(Value::Number(n)) => n.as_f64(),
            Some(other) => {
                self.push(field, format!("expected a number, got {other}"));
                None
            }
        }
    }

    fn string(&mut self, v: Option<&Value>, field: &str) -> Option<String> {
        match v {
            None => {
                self.push(field, "missing");
                None
            }
            Some(Value::String(s)) => Some(s.clone()),
            Some(other) => {
                self.push(field, format!("expected an expression string, got {other}"));
                None
            }
        }
    }

    fn endpoint(&mut self, v: Option<&Value>, field: &str) -> Option<Extended> {
        match v {
            None => {
                self.push(field, "missing");
                None
            }
            Some(Value::Number(n)) => n.as_f64().map(Extended::Finite),
            Some(Value::String(s)) => match s.as_str() {
                "-inf" => Some(Extended::NegInf),
                "+inf" | "inf" => Some(Extended::PosInf),
                _ => {
                    self.push(field, format!("expected a number, \"-inf\" or \"+inf\", got {s:?}"));
                    None
                }
            },
            Some(other) => {
                self.push(field, format!("expected a number, \"-inf\" or \"+inf\", got {other}"));
                None
            }
        }
    }

    fn optional<T>(
        &mut self,
        obj: &Map<String, Value>,
        key: &str,
        field: &str,
        f: impl Fn(&Value) -> Option<T>,
        what: &str,
    ) -> Option<T> {
        let v = obj.get(key)?;
        let r = f(v);
        if r.is_none() {
            self.push(field, format!("expected {what}, got {v}"));
        }
        r
    }
}

fn positive_int(v: &Value) -> Option<u64> {
    v.as_u64()
}

fn number_list(v: &Value) -> Option<Vec<f64>> {
    v.as_array()?.iter().map(Value::as_f64).collect()
}

/// Parses the JSON text, collecting every structural issue.
pub fn parse_problem_file(text: &str) -> Result<ProblemFile, ValidationError> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| ValidationError::single("<document>", format!("not valid JSON: {e}")))?;
    let Value::Object(obj) = doc else {
        return Err(ValidationError::single("<document>", "expected a JSON object"));
    };
    let mut c = Collector(Vec::new());
    for k in obj.keys() {
        if !KEYS.contains(&k.as_str()) {
            c.push(k, "unknown field");
        }
    }
    let (left, right) = match obj.get("interval") {
        Some(Value::Object(i)) => (
            c.endpoint(i.get("left"), "interval.left"),
            c.endpoint(i.get("right"), "interval.right"),
        ),
        Some(other) => {
            c.push(
                "interval",
                format!("expected {{\"left\": .., \"right\": ..}}, got {other}"),
            );
            (None, None)
        }
        None => {
            c.push("interval", "missing");
            (None, None)
        }
    };
    let x0 = c.number(obj.get("x0"), "x0");
    let mu = c.string(obj.get("mu"), "mu");
    let sigma = c.string(obj.get("sigma"), "sigma");
    let b = c.string(obj.get("b"), "b");
    let hints = match obj.get("hints") {
        None => Vec::new(),
        Some(Value::Object(h)) => c
            .optional(
                h,
                "singular_points",
                "hints.singular_points",
                number_list,
                "a list of numbers",
            )
            .unwrap_or_default(),
        Some(other) => {
            c.push("hints", format!("expected {{\"singular_points\": [..]}}, got {other}"));
            Vec::new()
        }
    };
    let base_point = c.optional(&obj, "base_point", "base_point", Value::as_f64, "a number");
    let simulation = match obj.get("simulation") {
        None => SimulationSection::default(),
        Some(Value::Object(s)) => {
            for k in s.keys() {
                if !["paths", "dt", "horizon", "seed", "times"].contains(&k.as_str()) {
                    c.push(&format!("simulation.{k}"), "unknown field");
                }
            }
            SimulationSection {
                paths: c
                    .optional(s, "paths", "simulation.paths", positive_int, "a non-negative integer")
                    .map(|n| n as usize),
                dt: c.optional(s, "dt", "simulation.dt", Value::as_f64, "a number"),
                horizon: c.optional(s, "horizon", "simulation.horizon", Value::as_f64, "a number"),
                seed: c.optional(s, "seed", "simulation.seed", positive_int, "a non-negative integer"),
                times: c.optional(s, "times", "simulation.times", number_list, "a list of numbers"),
            }
        }
        Some(other) => {
            c.push("simulation", format!("expected an object, got {other}"));
            SimulationSection::default()
        }
    };
    match (left, right, x0, mu, sigma, b) {
        (Some(left), Some(right), Some(x0), Some(mu), Some(sigma), Some(b)) if c.0.is_empty() => Ok(ProblemFile {
            raw: RawProblem {
                left,
                right,
                x0,
                mu,
                sigma,
                b,
                singularity_hints: hints,
                base_point,
            },
            simulation,
        }),
        _ => Err(ValidationError {
            issues: c.0,
            undecidable: false,
        }),
    }
}

pub fn load_problem_file(path: &Path) -> Result<ProblemFile, ValidationError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ValidationError::single("<file>", format!("cannot read {}: {e}", path.display())))?;
    parse_problem_file(&text)
}

fn field_of(e: &ProblemError) -> &'static str {
    match e {
        ProblemError::Parse { field, .. } => field,
        ProblemError::EmptyInterval { .. } => "interval",
        ProblemError::X0OutsideInterval { .. } | ProblemError::X0InSingularSet { .. } => "x0",
        ProblemError::SigmaZeroAtX0 { .. } | ProblemError::EngelbertSchmidt { .. } => "sigma",
        ProblemError::BasePoint { .. } => "base_point",
        ProblemError::Undecidable { .. } | ProblemError::Fault(_) | ProblemError::Quad(_) => "<problem>",
    }
}

impl ProblemFile {
    /// Validated problem, or every violation at once.
    pub fn build(&self, opts: &ClassifyOptions) -> Result<ProblemSpec, ValidationError> {
        build_problem(&self.raw, opts).map_err(|errs| ValidationError {
            undecidable: errs.0.iter().any(|e| matches!(e, ProblemError::Undecidable { .. })),
            issues: errs
                .0
                .iter()
                .map(|e| Issue {
                    field: field_of(e).into(),
                    message: e.to_string(),
                })
                .collect(),
        })
    }

    /// The problem as it would be written back to a file.
    pub fn problem_json(&self) -> Value {
        let r = &self.raw;
        let mut v = json!({
            "interval": {"left": endpoint_json(r.left), "right": endpoint_json(r.right)},
            "x0": r.x0,
            "mu": r.mu,
            "sigma": r.sigma,
            "b": r.b,
        });
        if !r.singularity_hints.is_empty() {
            v["hints"] = json!({"singular_points": r.singularity_hints});
        }
        if let Some(c) = r.base_point {
            v["base_point"] = json!(c);
        }
        v
    }
}

pub fn endpoint_json(e: Extended) -> Value {
    match e {
        Extended::Finite(x) => json!(x),
        Extended::NegInf => json!("-inf"),
        Extended::PosInf => json!("+inf"),
    }
}

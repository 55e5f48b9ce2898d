//! Canonical JSON: keys sorted, shortest round-trip floats, two-space indent.

use serde_json::Value;

/// Non-finite numbers have no JSON form; they are written as strings.
pub fn finite_or_string(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else if x.is_nan() {
        Value::from("nan")
    } else if x > 0.0 {
        Value::from("+inf")
    } else {
        Value::from("-inf")
    }
}

pub fn canonical(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(&sorted(v)).expect("serializing a JSON value cannot fail");
    s.push('\n');
    s
}

fn sorted(v: &Value) -> Value {
    match v {
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            Value::Object(keys.into_iter().map(|k| (k.clone(), sorted(&m[k]))).collect())
        }
        Value::Array(a) => Value::Array(a.iter().map(sorted).collect()),
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn reserializes_identically() {
        let v = json!({"b": [1.0, 1e-8, 0.1, -2.5e300], "a": {"z": null, "y": "+inf", "x": true}});
        let s = canonical(&v);
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(canonical(&back), s);
    }

    #[test]
    fn non_finite_values() {
        assert_eq!(finite_or_string(f64::INFINITY), json!("+inf"));
        assert_eq!(finite_or_string(2.0), json!(2.0));
    }
}

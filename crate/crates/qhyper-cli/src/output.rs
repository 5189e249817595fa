//! JSON helpers. `serde_json` keeps object keys in a `BTreeMap`, so every
//! object is emitted with sorted keys.

use qhyper::{TruncatedValue, C64};
use serde_json::{json, Value};

pub fn complex(z: C64) -> Value {
    json!([z.re, z.im])
}

pub fn truncated(v: &TruncatedValue) -> Value {
    json!({
        "value": complex(v.value),
        "tail_bound": v.tail_bound,
        "terms_used": v.terms_used,
    })
}

pub fn render(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values always serialize")
}

/// Compact scientific form for tables.
pub fn sci(x: f64) -> String {
    format!("{x:.3e}")
}

pub fn complex_text(z: C64) -> String {
    format!("{:.16e} {:+.16e}i", z.re, z.im)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_come_out_sorted() {
        let v = json!({"zeta": 1, "alpha": 2, "mid": {"b": 1, "a": 2}});
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"{"alpha":2,"mid":{"a":2,"b":1},"zeta":1}"#);
    }

    #[test]
    fn complex_is_a_pair() {
        assert_eq!(complex(C64::new(0.5, -2.0)), json!([0.5, -2.0]));
    }
}

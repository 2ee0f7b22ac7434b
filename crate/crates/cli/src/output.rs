//! Byte-stable output: every number is rounded to the printed precision and
//! object keys are emitted in sorted order.

use robustbar::numfmt::round12;
use serde::Serialize;
use serde_json::Value;

/// Pretty JSON of `value` with all floats rounded to 12 significant digits.
pub fn stable_json<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("output serializes");
    round_numbers(&mut v);
    let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
    s.push('\n');
    s
}

fn round_numbers(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n
                .as_f64()
                .map(round12)
                .and_then(serde_json::Number::from_f64)
            {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_numbers),
        Value::Object(map) => map.values_mut().for_each(round_numbers),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_nested_floats_and_sorts_keys() {
        let v = serde_json::json!({"z": [0.1 + 0.2, 1], "a": {"x": 2.0 / 3.0}});
        let s = stable_json(&v);
        assert!(s.find("\"a\"").unwrap() < s.find("\"z\"").unwrap());
        assert!(s.contains("0.3"));
        assert!(!s.contains("0.30000000000000004"));
        assert!(s.contains("0.666666666667"));
    }
}

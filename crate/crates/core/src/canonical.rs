//! Canonical document rendering.
//!
//! Every document the system exchanges or persists (catalogs, business
//! models, events, models, reports) is JSON rendered with object keys sorted
//! and no insignificant whitespace. Floats use the shortest round-trip
//! representation, so equal values always render to equal bytes and the
//! SHA-256 digest of a rendering is a stable content id.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub const CONTENT_TYPE: &str = "application/json";

pub fn to_value<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<Value> {
    serde_json::to_value(value).map(sort_keys)
}

/// Renders `value` as a single-line canonical document.
pub fn to_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    serde_json::to_string(&to_value(value)?)
}

/// Pretty-printed canonical rendering (sorted keys, two-space indent), used
/// for files meant to be read by people.
pub fn to_string_pretty<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    serde_json::to_string_pretty(&to_value(value)?)
}

pub fn from_str<T: DeserializeOwned>(text: &str) -> serde_json::Result<T> {
    serde_json::from_str(text)
}

/// Hex SHA-256 of the canonical rendering.
pub fn digest<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let text = to_string(value)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

fn sort_keys(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut sorted = Map::new();
            for (k, v) in entries {
                sorted.insert(k, sort_keys(v));
            }
            Value::Object(sorted)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Serialize;

    #[derive(Serialize)]
    struct Sample {
        zeta: f64,
        alpha: Vec<u32>,
        mid: Option<String>,
    }

    #[test]
    fn keys_are_sorted_and_compact() {
        let s = Sample { zeta: 0.1, alpha: vec![3, 1], mid: None };
        assert_eq!(to_string(&s).unwrap(), r#"{"alpha":[3,1],"mid":null,"zeta":0.1}"#);
    }

    #[test]
    fn digest_is_stable() {
        let a = Sample { zeta: 2.5, alpha: vec![], mid: Some("x".into()) };
        let b = Sample { zeta: 2.5, alpha: vec![], mid: Some("x".into()) };
        assert_eq!(digest(&a).unwrap(), digest(&b).unwrap());
        assert_eq!(digest(&a).unwrap().len(), 64);
    }
}

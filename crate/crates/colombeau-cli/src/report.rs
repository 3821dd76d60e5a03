//! Deterministic report emission.
//!
//! Reports must be byte-identical across reruns: JSON objects use the
//! default (sorted) map representation, floats print in shortest
//! round-trip form, non-finite values become null, and nothing records
//! wall-clock state.

use std::fs;
use std::path::Path;

use anyhow::Context;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

/// A float as a JSON value; NaN and ±∞ become null.
pub fn num(v: f64) -> Value {
    Value::from(v)
}

/// An (ε, value) series as a JSON array of pairs.
pub fn pairs(series: &[(f64, f64)]) -> Value {
    Value::Array(
        series
            .iter()
            .map(|&(e, v)| Value::Array(vec![num(e), num(v)]))
            .collect(),
    )
}

/// A float for CSV cells: 17 significant digits, lowercase specials.
pub fn cell(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// The top-level report wrapper written to `report.json`.
pub fn envelope(
    command: &str,
    scenario_sha256: &str,
    title: Option<&str>,
    pass: bool,
    body: Value,
) -> Value {
    let mut map = Map::new();
    map.insert("tool".into(), Value::String("colombeau".into()));
    map.insert(
        "version".into(),
        Value::String(env!("CARGO_PKG_VERSION").into()),
    );
    map.insert("command".into(), Value::String(command.into()));
    map.insert(
        "scenario_sha256".into(),
        Value::String(scenario_sha256.into()),
    );
    map.insert(
        "title".into(),
        match title {
            Some(t) => Value::String(t.into()),
            None => Value::Null,
        },
    );
    map.insert("pass".into(), Value::Bool(pass));
    map.insert("report".into(), body);
    Value::Object(map)
}

pub fn write_json(path: &Path, value: &Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<()> {
    let mut text = String::new();
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_floats_become_null() {
        assert_eq!(num(f64::NAN), Value::Null);
        assert_eq!(num(f64::INFINITY), Value::Null);
        assert_eq!(num(1.5), Value::from(1.5));
    }

    #[test]
    fn csv_cells_are_fixed_width_scientific() {
        assert_eq!(cell(1.0), "1.0000000000000000e0");
        assert_eq!(cell(f64::NAN), "nan");
        assert_eq!(cell(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn sha_matches_known_vector() {
        // SHA-256 of the empty string
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn envelope_serializes_with_sorted_keys() {
        let v = envelope("classify", "ab", None, true, Value::Null);
        let text = serde_json::to_string(&v).unwrap();
        let order: Vec<usize> = ["command", "pass", "report", "scenario_sha256", "title", "tool"]
            .iter()
            .map(|k| text.find(&format!("\"{k}\"")).unwrap())
            .collect();
        assert!(order.windows(2).all(|w| w[0] < w[1]), "{text}");
    }
}

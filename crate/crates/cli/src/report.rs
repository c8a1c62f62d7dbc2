//! Verification reports: one named check per theorem identity, collected
//! (never fail-fast), serialized as JSON with a timestamp kept in its own
//! field so reports compare byte-identically modulo that field.

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    /// Operation identifier the assertion encodes (matches the library
    /// operation names).
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub seed: u64,
    pub timestamp: String,
    pub checks: Vec<Check>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<serde_json::Map<String, Value>>,
}

impl Report {
    pub fn new(scenario: &str, seed: u64) -> Self {
        Report {
            scenario: scenario.to_string(),
            seed,
            timestamp: now(),
            checks: Vec::new(),
            pass: true,
            witness: None,
            values: None,
        }
    }

    pub fn check(&mut self, name: &str, residual: f64, tolerance: f64) {
        self.assert_with(name, residual, tolerance, None);
    }

    pub fn check_detail(&mut self, name: &str, residual: f64, tolerance: f64, detail: &str) {
        self.assert_with(name, residual, tolerance, Some(detail.to_string()));
    }

    fn assert_with(&mut self, name: &str, residual: f64, tolerance: f64, detail: Option<String>) {
        let pass = residual.is_finite() && residual <= tolerance;
        if !pass {
            self.pass = false;
        }
        self.checks.push(Check { name: name.to_string(), residual, tolerance, pass, detail });
    }

    pub fn value(&mut self, key: &str, v: Value) {
        self.values.get_or_insert_with(serde_json::Map::new).insert(key.to_string(), v);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn now() -> String {
    let d = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .unwrap_or_default();
    format!("{}.{:09}", d.as_secs(), d.subsec_nanos())
}

/// Compare two serialized reports with the timestamp field removed.
pub fn equal_modulo_timestamp(a: &str, b: &str) -> bool {
    let strip = |s: &str| -> Option<Value> {
        let mut v: Value = serde_json::from_str(s).ok()?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timestamp");
        }
        Some(v)
    };
    match (strip(a), strip(b)) {
        (Some(x), Some(y)) => x == y,
        _ => false,
    }
}

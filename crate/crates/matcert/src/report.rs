use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// One certified identity: what was computed, how far apart the two sides are,
/// and whether that distance is within tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    /// Stable identifier of the identity being certified.
    pub anchor: String,
    pub computed: BTreeMap<String, Value>,
    pub discrepancy: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub seed: Option<u64>,
    pub config: Value,
}

impl VerificationReport {
    pub fn new(check: &str, anchor: &str, discrepancy: f64, tolerance: f64) -> Self {
        VerificationReport {
            check: check.to_string(),
            anchor: anchor.to_string(),
            computed: BTreeMap::new(),
            discrepancy,
            tolerance,
            pass: discrepancy <= tolerance,
            seed: None,
            config: Value::Null,
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.computed.insert(key.to_string(), value.into());
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn config(mut self, config: Value) -> Self {
        self.config = config;
        self
    }

    /// Folds an extra boolean requirement into the pass flag.
    pub fn require(mut self, key: &str, ok: bool) -> Self {
        self.computed.insert(key.to_string(), Value::Bool(ok));
        self.pass = self.pass && ok;
        self
    }
}

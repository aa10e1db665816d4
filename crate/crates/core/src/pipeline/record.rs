use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Where a record came from. `sequence` is extended by one index every time
/// the record is split, so descendants sort in source order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub sequence: Vec<u64>,
}

/// A unit of data moving through a pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub payload: Value,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
    pub provenance: Provenance,
}

impl FlowRecord {
    pub fn new(source: &str, sequence: u64, payload: Value) -> Self {
        Self {
            payload,
            attributes: BTreeMap::new(),
            provenance: Provenance {
                source: source.to_string(),
                sequence: vec![sequence],
            },
        }
    }

    /// Attribute value, with the literal string `"null"` read as absent.
    pub fn attribute(&self, name: &str) -> Option<&str> {
        self.attributes.get(name).map(String::as_str).filter(|v| *v != "null")
    }

    pub(crate) fn child(&self, index: u64, payload: Value) -> Self {
        let mut provenance = self.provenance.clone();
        provenance.sequence.push(index);
        Self {
            payload,
            attributes: self.attributes.clone(),
            provenance,
        }
    }
}

/// Renders a JSON value the way extracted attributes store it: strings bare,
/// everything else as compact JSON (`null` for null).
pub fn render_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

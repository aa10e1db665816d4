//! The reusable record processors. Each is a pure function of the record
//! and its configuration.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::jsonpath::JsonPath;
use super::predicate::Predicate;
use super::record::{render_value, FlowRecord};
use super::transform::{render_template, template_references, CompiledTransform};
use crate::time::{format_wire, from_epoch_seconds};

/// What a processor did with one record.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Emit(Vec<FlowRecord>),
    Drop,
    Fail(String),
}

impl Outcome {
    fn one(r: FlowRecord) -> Self {
        Outcome::Emit(vec![r])
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// One record per array element.
    #[default]
    Array,
    /// One record per member value of an object.
    Object,
}

pub const SPLIT_INDEX: &str = "split.index";
pub const SPLIT_KEY: &str = "split.key";

pub fn split_records(record: &FlowRecord, path: &JsonPath, mode: SplitMode) -> Outcome {
    let Some(target) = path.resolve(&record.payload) else {
        return Outcome::Fail(format!("path {path} not found"));
    };
    match (mode, target) {
        (SplitMode::Array, Value::Array(items)) => Outcome::Emit(
            items
                .iter()
                .enumerate()
                .map(|(i, item)| {
                    let mut child = record.child(i as u64, item.clone());
                    child.attributes.insert(SPLIT_INDEX.into(), i.to_string());
                    child
                })
                .collect(),
        ),
        (SplitMode::Object, Value::Object(members)) => Outcome::Emit(
            members
                .iter()
                .enumerate()
                .map(|(i, (key, item))| {
                    let mut child = record.child(i as u64, item.clone());
                    child.attributes.insert(SPLIT_INDEX.into(), i.to_string());
                    child.attributes.insert(SPLIT_KEY.into(), key.clone());
                    child
                })
                .collect(),
        ),
        (SplitMode::Array, _) => Outcome::Fail(format!("path {path} is not an array")),
        (SplitMode::Object, _) => Outcome::Fail(format!("path {path} is not an object")),
    }
}

/// Copies the string rendition of each resolved path into the record's
/// attributes; unresolved paths yield `"null"`.
pub fn evaluate_paths(record: &FlowRecord, extractions: &IndexMap<String, JsonPath>) -> FlowRecord {
    let mut out = record.clone();
    for (name, path) in extractions {
        let value = path
            .resolve(&record.payload)
            .map(render_value)
            .unwrap_or_else(|| "null".to_string());
        out.attributes.insert(name.clone(), value);
    }
    out
}

pub fn route_on_attribute(record: &FlowRecord, predicate: &Predicate) -> bool {
    predicate.evaluate(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum UpdateRule {
    /// `target = value` (templated), optionally only when `when` holds.
    Set {
        target: String,
        value: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        when: Option<String>,
    },
    /// Removes every occurrence of the given characters.
    Strip {
        attribute: String,
        chars: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<String>,
    },
    /// Removes a literal prefix, or the first `length` characters.
    RemovePrefix {
        attribute: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        prefix: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        length: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<String>,
    },
    /// Epoch seconds to the ISO 8601 wire format.
    EpochToIso { attribute: String, target: String },
}

impl UpdateRule {
    pub fn reads(&self) -> Vec<String> {
        match self {
            UpdateRule::Set { value, when, .. } => {
                let mut out = template_references(value);
                if let Some(p) = when.as_deref().and_then(|w| w.parse::<Predicate>().ok()) {
                    out.extend(p.referenced_attributes());
                }
                out
            }
            UpdateRule::Strip { attribute, .. }
            | UpdateRule::RemovePrefix { attribute, .. }
            | UpdateRule::EpochToIso { attribute, .. } => vec![attribute.clone()],
        }
    }

    pub fn writes(&self) -> String {
        match self {
            UpdateRule::Set { target, .. } | UpdateRule::EpochToIso { target, .. } => target.clone(),
            UpdateRule::Strip { attribute, target, .. } | UpdateRule::RemovePrefix { attribute, target, .. } => {
                target.clone().unwrap_or_else(|| attribute.clone())
            }
        }
    }
}

/// An [`UpdateRule`] with its condition parsed.
#[derive(Debug, Clone)]
pub struct CompiledRule {
    rule: UpdateRule,
    when: Option<Predicate>,
}

pub fn compile_rule(rule: &UpdateRule) -> Result<CompiledRule, String> {
    let when = match rule {
        UpdateRule::Set { when: Some(w), .. } => Some(w.parse::<Predicate>()?),
        UpdateRule::RemovePrefix {
            prefix: None,
            length: None,
            ..
        } => return Err("remove-prefix needs a prefix or a length".into()),
        _ => None,
    };
    Ok(CompiledRule {
        rule: rule.clone(),
        when,
    })
}

/// Applies the rules in order; later rules see earlier rules' output.
pub fn update_attributes(record: &FlowRecord, rules: &[CompiledRule]) -> Result<FlowRecord, String> {
    let mut out = record.clone();
    for compiled in rules {
        let target = compiled.rule.writes();
        match &compiled.rule {
            UpdateRule::Set { value, .. } => {
                if compiled.when.as_ref().is_none_or(|p| p.evaluate(&out)) {
                    let v = render_template(value, &out).unwrap_or_else(|| "null".into());
                    out.attributes.insert(target, v);
                }
            }
            UpdateRule::Strip { attribute, chars, .. } => {
                if let Some(v) = out.attribute(attribute) {
                    let stripped: String = v.chars().filter(|c| !chars.contains(*c)).collect();
                    out.attributes.insert(target, stripped);
                }
            }
            UpdateRule::RemovePrefix {
                attribute,
                prefix,
                length,
                ..
            } => {
                if let Some(v) = out.attribute(attribute) {
                    let rest = match (prefix, length) {
                        (Some(p), _) => v.strip_prefix(p.as_str()).unwrap_or(v).to_string(),
                        (None, Some(n)) => v.chars().skip(*n).collect(),
                        (None, None) => v.to_string(),
                    };
                    out.attributes.insert(target, rest);
                }
            }
            UpdateRule::EpochToIso { attribute, .. } => {
                let Some(v) = out.attribute(attribute) else {
                    continue;
                };
                let secs: i64 = v
                    .trim()
                    .parse::<i64>()
                    .ok()
                    .or_else(|| v.trim().parse::<f64>().ok().map(|f| f as i64))
                    .ok_or_else(|| format!("{attribute}={v:?} is not an epoch time"))?;
                let ts = from_epoch_seconds(secs).ok_or_else(|| format!("{attribute}={v:?} is out of range"))?;
                out.attributes.insert(target, format_wire(&ts));
            }
        }
    }
    Ok(out)
}

pub fn transform_to_ngsi(record: &FlowRecord, transform: &CompiledTransform) -> Outcome {
    match transform.apply(record) {
        Ok(payload) => {
            let mut out = record.clone();
            out.payload = payload;
            Outcome::one(out)
        }
        Err(reason) => Outcome::Fail(reason),
    }
}

/// Characters NGSI-LD forbids in attribute values and names.
pub const FORBIDDEN_CHARS: [char; 9] = ['<', '>', '"', '\'', '=', ';', '(', ')', '\\'];

fn is_forbidden(c: char) -> bool {
    FORBIDDEN_CHARS.contains(&c)
}

fn sanitize_value(v: &Value, path: &str) -> Result<Value, String> {
    Ok(match v {
        Value::String(s) => Value::String(s.chars().filter(|c| !is_forbidden(*c)).collect()),
        Value::Array(items) => Value::Array(
            items
                .iter()
                .map(|i| sanitize_value(i, path))
                .collect::<Result<_, _>>()?,
        ),
        Value::Object(members) => {
            let mut out = serde_json::Map::new();
            for (k, item) in members {
                if k.chars().any(is_forbidden) {
                    return Err(format!("attribute name {k:?} at {path} has forbidden characters"));
                }
                out.insert(k.clone(), sanitize_value(item, &format!("{path}.{k}"))?);
            }
            Value::Object(out)
        }
        other => other.clone(),
    })
}

/// Strips forbidden characters from every string value. A forbidden
/// character in a member name cannot be repaired and fails the record.
pub fn sanitize(record: &FlowRecord) -> Outcome {
    match sanitize_value(&record.payload, "$") {
        Ok(payload) => {
            let mut out = record.clone();
            out.payload = payload;
            Outcome::one(out)
        }
        Err(reason) => Outcome::Fail(reason),
    }
}

/// A configured processor ready to run.
#[derive(Debug, Clone)]
pub enum Processor {
    Split { path: JsonPath, mode: SplitMode },
    Evaluate { extractions: IndexMap<String, JsonPath> },
    Route { predicate: Predicate },
    Update { rules: Vec<CompiledRule> },
    Transform { transform: Box<CompiledTransform> },
    Sanitize,
}

impl Processor {
    pub fn kind(&self) -> &'static str {
        match self {
            Processor::Split { .. } => "split-json",
            Processor::Evaluate { .. } => "evaluate-json-path",
            Processor::Route { .. } => "route-on-attribute",
            Processor::Update { .. } => "update-attribute",
            Processor::Transform { .. } => "transform",
            Processor::Sanitize => "sanitize",
        }
    }

    pub fn process(&self, record: FlowRecord) -> Outcome {
        match self {
            Processor::Split { path, mode } => split_records(&record, path, *mode),
            Processor::Evaluate { extractions } => Outcome::one(evaluate_paths(&record, extractions)),
            Processor::Route { predicate } => {
                if route_on_attribute(&record, predicate) {
                    Outcome::one(record)
                } else {
                    Outcome::Drop
                }
            }
            Processor::Update { rules } => match update_attributes(&record, rules) {
                Ok(r) => Outcome::one(r),
                Err(e) => Outcome::Fail(e),
            },
            Processor::Transform { transform } => transform_to_ngsi(&record, transform),
            Processor::Sanitize => sanitize(&record),
        }
    }
}

//! Declarative mapping from a source document (plus routing attributes) to
//! an NGSI-LD entity document.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::jsonpath::JsonPath;
use super::predicate::Predicate;
use super::record::{render_value, FlowRecord};
use crate::model::records::number;
use crate::model::{make_entity_id, validate_entity, Attribute, ContextEntity};
use crate::time::parse_timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "ft")]
    Feet,
    #[serde(rename = "m")]
    Metres,
    #[serde(rename = "kn")]
    Knots,
    #[serde(rename = "km/h")]
    KilometresPerHour,
    #[serde(rename = "ft/min")]
    FeetPerMinute,
    #[serde(rename = "m/s")]
    MetresPerSecond,
}

/// Feet per metre, knots per km/h and ft/min per m/s, as used by the
/// position feed's published conversions.
const FEET_PER_METRE: f64 = 3.28084;
const KNOTS_PER_KMH: f64 = 0.539957;
const FPM_PER_MPS: f64 = 196.85;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitConversion {
    pub from: Unit,
    pub to: Unit,
}

impl UnitConversion {
    fn divisor(&self) -> Option<f64> {
        match (self.from, self.to) {
            (Unit::Feet, Unit::Metres) => Some(FEET_PER_METRE),
            (Unit::Knots, Unit::KilometresPerHour) => Some(KNOTS_PER_KMH),
            (Unit::FeetPerMinute, Unit::MetresPerSecond) => Some(FPM_PER_MPS),
            _ => None,
        }
    }

    pub fn is_known(&self) -> bool {
        self.divisor().is_some()
    }

    /// Converts and rounds to six decimal places.
    pub fn apply(&self, v: f64) -> f64 {
        let d = self.divisor().expect("validated unit pair");
        ((v / d) * 1e6).round() / 1e6
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValueSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<JsonPath>,
    /// Text with `${attribute}` placeholders filled from routing attributes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convert: Option<UnitConversion>,
}

impl ValueSource {
    fn check(&self, what: &str) -> Result<(), String> {
        let count = [self.from.is_some(), self.template.is_some(), self.constant.is_some()]
            .iter()
            .filter(|b| **b)
            .count();
        if count != 1 {
            return Err(format!("{what}: exactly one of from/template/constant is required"));
        }
        if let Some(c) = &self.convert {
            if !c.is_known() {
                return Err(format!("{what}: unknown unit conversion {:?} -> {:?}", c.from, c.to));
            }
        }
        Ok(())
    }

    /// Resolves the value; `Ok(None)` when absent or null.
    fn resolve(&self, record: &FlowRecord) -> Result<Option<Value>, String> {
        let raw = if let Some(path) = &self.from {
            path.resolve(&record.payload).cloned()
        } else if let Some(t) = &self.template {
            render_template(t, record).map(Value::String)
        } else {
            self.constant.clone()
        };
        let raw = raw.filter(|v| !v.is_null());
        match (raw, &self.convert) {
            (Some(v), Some(conv)) => {
                let n = v
                    .as_f64()
                    .or_else(|| v.as_str().and_then(|s| s.trim().parse().ok()))
                    .ok_or_else(|| format!("cannot convert non-numeric value {v}"))?;
                Ok(Some(number(conv.apply(n))))
            }
            (raw, _) => Ok(raw),
        }
    }
}

/// Substitutes `${name}` placeholders; `None` when any is absent.
pub fn render_template(template: &str, record: &FlowRecord) -> Option<String> {
    let mut out = String::new();
    let mut rest = template;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let end = rest[start..].find('}')? + start;
        let name = &rest[start + 2..end];
        out.push_str(record.attribute(name)?);
        rest = &rest[end + 1..];
    }
    out.push_str(rest);
    Some(out)
}

pub fn template_references(template: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find("${") {
        match rest[start..].find('}') {
            Some(end) => {
                out.push(rest[start + 2..start + end].to_string());
                rest = &rest[start + end + 1..];
            }
            None => break,
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputKind {
    #[default]
    Property,
    Datetime,
    Relationship,
    GeoPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingRule {
    pub target: String,
    #[serde(default)]
    pub kind: OutputKind,
    #[serde(flatten)]
    pub source: ValueSource,
    /// Target entity type for relationships.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coordinates: Vec<ValueSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub when: Option<String>,
    #[serde(default)]
    pub required: bool,
}

/// A declarative mapping. Without an `entity_type` the payload passes
/// through unchanged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_type: Option<String>,
    /// Candidate sources for the local id key; the first non-null wins.
    #[serde(default)]
    pub id: Vec<ValueSource>,
    #[serde(default)]
    pub attributes: Vec<MappingRule>,
}

/// A validated [`TransformSpec`] with its predicates parsed.
#[derive(Debug, Clone)]
pub struct CompiledTransform {
    spec: TransformSpec,
    conditions: Vec<Option<Predicate>>,
}

impl TransformSpec {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn compile(&self) -> Result<CompiledTransform, Vec<String>> {
        let mut errors = Vec::new();
        let mut conditions = Vec::new();
        if self.entity_type.is_some() && self.id.is_empty() {
            errors.push("transform: an id source is required".to_string());
        }
        for (i, src) in self.id.iter().enumerate() {
            if let Err(e) = src.check(&format!("id[{i}]")) {
                errors.push(e);
            }
        }
        let mut seen = HashSet::new();
        for rule in &self.attributes {
            let what = format!("attribute {:?}", rule.target);
            if !seen.insert(rule.target.as_str()) {
                errors.push(format!("{what}: duplicate output"));
            }
            let checked = match rule.kind {
                OutputKind::GeoPoint => {
                    if !(2..=3).contains(&rule.coordinates.len()) {
                        Err(format!("{what}: geo-point needs 2 or 3 coordinates"))
                    } else {
                        rule.coordinates.iter().try_for_each(|c| c.check(&what))
                    }
                }
                OutputKind::Relationship if rule.entity.is_none() => {
                    Err(format!("{what}: relationship needs an entity type"))
                }
                _ => rule.source.check(&what),
            };
            if let Err(e) = checked {
                errors.push(e);
            }
            match rule.when.as_deref().map(str::parse::<Predicate>).transpose() {
                Ok(p) => conditions.push(p),
                Err(e) => {
                    errors.push(format!("{what}: {e}"));
                    conditions.push(None);
                }
            }
        }
        if errors.is_empty() {
            Ok(CompiledTransform {
                spec: self.clone(),
                conditions,
            })
        } else {
            Err(errors)
        }
    }
}

impl CompiledTransform {
    pub fn spec(&self) -> &TransformSpec {
        &self.spec
    }

    /// Attributes read by templates and conditions.
    pub fn referenced_attributes(&self) -> Vec<String> {
        let mut out = Vec::new();
        let sources = self
            .spec
            .id
            .iter()
            .chain(self.spec.attributes.iter().map(|r| &r.source))
            .chain(self.spec.attributes.iter().flat_map(|r| r.coordinates.iter()));
        for src in sources {
            if let Some(t) = &src.template {
                out.extend(template_references(t));
            }
        }
        for p in self.conditions.iter().flatten() {
            out.extend(p.referenced_attributes());
        }
        out
    }

    /// Builds the entity document for `record`, or explains why it cannot.
    pub fn apply(&self, record: &FlowRecord) -> Result<Value, String> {
        let Some(entity_type) = &self.spec.entity_type else {
            return Ok(record.payload.clone());
        };
        let mut key = None;
        for src in &self.spec.id {
            if let Some(v) = src.resolve(record)? {
                key = Some(render_value(&v));
                break;
            }
        }
        let key = key.ok_or("no id source resolved")?;
        let id = make_entity_id(entity_type, &key).map_err(|e| e.to_string())?;
        let mut entity = ContextEntity::new(id);

        for (rule, cond) in self.spec.attributes.iter().zip(&self.conditions) {
            if let Some(p) = cond {
                if !p.evaluate(record) {
                    continue;
                }
            }
            match self.build_attribute(rule, record)? {
                Some(attr) => entity.set(&rule.target, attr),
                None if rule.required => return Err(format!("missing mandatory field for {:?}", rule.target)),
                None => {}
            }
        }

        let report = validate_entity(&entity);
        if !report.is_empty() {
            let text: Vec<String> = report.iter().map(ToString::to_string).collect();
            return Err(format!("invalid entity: {}", text.join("; ")));
        }
        Ok(entity.to_json())
    }

    fn build_attribute(&self, rule: &MappingRule, record: &FlowRecord) -> Result<Option<Attribute>, String> {
        if rule.kind == OutputKind::GeoPoint {
            let mut coords = Vec::new();
            for c in &rule.coordinates {
                match c.resolve(record)?.and_then(|v| v.as_f64()) {
                    Some(n) => coords.push(n),
                    None => return Ok(None),
                }
            }
            return Ok(Some(Attribute::geo_point(&coords)));
        }
        let Some(value) = rule.source.resolve(record)? else {
            return Ok(None);
        };
        Ok(Some(match rule.kind {
            OutputKind::Property => Attribute::property(value),
            OutputKind::Datetime => {
                let text = render_value(&value);
                let ts = parse_timestamp(&text).map_err(|e| format!("{}: {e}", rule.target))?;
                Attribute::datetime(&ts)
            }
            OutputKind::Relationship => {
                let ty = rule.entity.as_deref().expect("validated");
                let target = make_entity_id(ty, &render_value(&value)).map_err(|e| format!("{}: {e}", rule.target))?;
                Attribute::relationship(&target)
            }
            OutputKind::GeoPoint => unreachable!(),
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn conversions_match_published_values() {
        let ft = UnitConversion {
            from: Unit::Feet,
            to: Unit::Metres,
        };
        let kn = UnitConversion {
            from: Unit::Knots,
            to: Unit::KilometresPerHour,
        };
        let fpm = UnitConversion {
            from: Unit::FeetPerMinute,
            to: Unit::MetresPerSecond,
        };
        assert_eq!(ft.apply(7675.0), 2339.339925);
        assert_eq!(kn.apply(281.0), 520.411811);
        assert_eq!(fpm.apply(-1856.0), -9.428499);
        assert!(!UnitConversion {
            from: Unit::Feet,
            to: Unit::KilometresPerHour
        }
        .is_known());
    }

    #[test]
    fn templates_need_every_placeholder() {
        let mut r = FlowRecord::new("t", 1, json!({}));
        r.attributes.insert("a".into(), "SK".into());
        r.attributes.insert("b".into(), "1234".into());
        assert_eq!(render_template("${a}${b}", &r).as_deref(), Some("SK1234"));
        assert_eq!(render_template("x-${missing}", &r), None);
        assert_eq!(template_references("${a}-${b}"), ["a", "b"]);
    }

    #[test]
    fn identity_passes_payload_through() {
        let t = TransformSpec::identity().compile().unwrap();
        let doc: Value = serde_json::from_str(crate::fixtures::AIRCRAFT_DOCUMENT).unwrap();
        let r = FlowRecord::new("t", 1, doc.clone());
        assert_eq!(t.apply(&r).unwrap(), doc);
    }

    #[test]
    fn validation_catches_spec_errors() {
        let spec: TransformSpec = serde_json::from_value(json!({
            "entity_type": "Flight",
            "id": [{"from": "$.id"}],
            "attributes": [
                {"target": "a", "from": "$.x"},
                {"target": "a", "from": "$.y"},
                {"target": "b"},
                {"target": "c", "kind": "relationship", "from": "$.z"},
                {"target": "d", "from": "$.q", "convert": {"from": "ft", "to": "km/h"}},
                {"target": "e", "from": "$.q", "when": "a =="}
            ]
        }))
        .unwrap();
        let errors = spec.compile().unwrap_err();
        assert_eq!(errors.len(), 5, "{errors:?}");
    }

    #[test]
    fn required_field_missing_fails() {
        let spec: TransformSpec = serde_json::from_value(json!({
            "entity_type": "Aircraft",
            "id": [{"from": "$.reg"}],
            "attributes": [{"target": "flightNumber", "from": "$.fn", "required": true}]
        }))
        .unwrap();
        let t = spec.compile().unwrap();
        let r = FlowRecord::new("t", 1, json!({"reg": "GABCD"}));
        assert!(t.apply(&r).unwrap_err().contains("flightNumber"));
        let r = FlowRecord::new("t", 1, json!({"fn": "1"}));
        assert!(t.apply(&r).is_err());
    }
}

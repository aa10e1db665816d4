use std::fmt;

use serde_json::{json, Map, Value};

use super::{EntityId, ModelError};
use crate::time::{format_wire, parse_timestamp, Timestamp};

pub const DATETIME: &str = "DateTime";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttrKind {
    Property,
    Relationship,
    GeoProperty,
}

impl AttrKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AttrKind::Property => "Property",
            AttrKind::Relationship => "Relationship",
            AttrKind::GeoProperty => "GeoProperty",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Property" => Some(AttrKind::Property),
            "Relationship" => Some(AttrKind::Relationship),
            "GeoProperty" => Some(AttrKind::GeoProperty),
            _ => None,
        }
    }
}

impl fmt::Display for AttrKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One named attribute of a context entity.
///
/// Typed values (`valueType`, e.g. `DateTime`) keep their raw `@value` in
/// `value`; on the wire they are nested as `{"@type": .., "@value": ..}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribute {
    pub kind: AttrKind,
    pub value: Value,
    pub value_type: Option<String>,
    pub observed_at: Option<Timestamp>,
}

impl Attribute {
    pub fn property(value: impl Into<Value>) -> Self {
        Self {
            kind: AttrKind::Property,
            value: value.into(),
            value_type: None,
            observed_at: None,
        }
    }

    pub fn relationship(target: &EntityId) -> Self {
        Self {
            kind: AttrKind::Relationship,
            value: Value::String(target.to_string()),
            value_type: None,
            observed_at: None,
        }
    }

    pub fn datetime(ts: &Timestamp) -> Self {
        Self {
            kind: AttrKind::Property,
            value: Value::String(format_wire(ts)),
            value_type: Some(DATETIME.to_string()),
            observed_at: None,
        }
    }

    /// A GeoJSON-style point. Coordinates are stored in the given order.
    pub fn geo_point(coordinates: &[f64]) -> Self {
        Self {
            kind: AttrKind::GeoProperty,
            value: json!({ "type": "Point", "coordinates": coordinates }),
            value_type: None,
            observed_at: None,
        }
    }

    pub fn is_datetime(&self) -> bool {
        self.value_type.as_deref() == Some(DATETIME)
    }

    pub fn as_str(&self) -> Option<&str> {
        self.value.as_str()
    }

    pub fn as_f64(&self) -> Option<f64> {
        self.value.as_f64()
    }

    pub fn as_datetime(&self) -> Option<Timestamp> {
        self.value.as_str().and_then(|s| parse_timestamp(s).ok())
    }

    pub fn as_entity_id(&self) -> Option<EntityId> {
        if self.kind != AttrKind::Relationship {
            return None;
        }
        self.value.as_str().and_then(|s| s.parse().ok())
    }

    pub fn point_coordinates(&self) -> Option<Vec<f64>> {
        self.value
            .get("coordinates")?
            .as_array()?
            .iter()
            .map(Value::as_f64)
            .collect()
    }

    pub fn to_wire(&self) -> Value {
        let mut obj = Map::new();
        let value = match &self.value_type {
            Some(vt) => json!({ "@type": vt, "@value": self.value }),
            None => self.value.clone(),
        };
        obj.insert("value".into(), value);
        obj.insert("type".into(), Value::String(self.kind.as_str().into()));
        if let Some(ts) = &self.observed_at {
            obj.insert("observedAt".into(), Value::String(format_wire(ts)));
        }
        Value::Object(obj)
    }

    /// Parses the wire form of the attribute called `name`.
    pub fn from_wire(name: &str, wire: &Value) -> Result<Self, ModelError> {
        let err = |reason: &str| ModelError::Parse {
            field: name.to_string(),
            reason: reason.to_string(),
        };
        let obj = wire.as_object().ok_or_else(|| err("attribute must be an object"))?;
        let kind_str = obj
            .get("type")
            .and_then(Value::as_str)
            .ok_or_else(|| err("missing attribute \"type\""))?;
        let kind = AttrKind::parse(kind_str).ok_or_else(|| err(&format!("unknown attribute kind {kind_str:?}")))?;
        // NGSI-LD relationships may carry their target under "object".
        let raw = obj
            .get("value")
            .or_else(|| obj.get("object"))
            .ok_or_else(|| err("missing attribute \"value\""))?;
        let (value, value_type) = match raw {
            Value::Object(inner) if inner.contains_key("@type") && inner.contains_key("@value") => {
                let vt = inner["@type"]
                    .as_str()
                    .ok_or_else(|| err("\"@type\" must be a string"))?;
                (inner["@value"].clone(), Some(vt.to_string()))
            }
            other => (other.clone(), None),
        };
        let observed_at = match obj.get("observedAt") {
            Some(v) => Some(
                v.as_str()
                    .and_then(|s| parse_timestamp(s).ok())
                    .ok_or_else(|| err("invalid \"observedAt\""))?,
            ),
            None => None,
        };
        let mut attr = Self {
            kind,
            value,
            value_type,
            observed_at,
        };
        if kind == AttrKind::Relationship {
            let target = attr
                .value
                .as_str()
                .ok_or_else(|| err("relationship value must be a URN string"))?;
            target.parse::<EntityId>().map_err(|e| err(&e.to_string()))?;
        }
        if attr.is_datetime() {
            let ts = attr
                .as_datetime()
                .ok_or_else(|| err("DateTime value is not an ISO 8601 timestamp"))?;
            attr.value = Value::String(format_wire(&ts));
        }
        Ok(attr)
    }
}

use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use super::{Attribute, EntityId, ModelError};

pub const SMART_DATA_MODELS_CONTEXT: &str = "https://smartdatamodels.org/context.jsonld";
pub const NGSI_LD_CORE_CONTEXT: &str = "https://uri.etsi.org/ngsi-ld/v1/ngsi-ld-core-context.jsonld";

pub fn default_context() -> Vec<String> {
    vec![SMART_DATA_MODELS_CONTEXT.to_string(), NGSI_LD_CORE_CONTEXT.to_string()]
}

/// A typed, URN-identified unit of twin state.
///
/// Attribute order is kept for serialization; equality ignores it.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextEntity {
    pub id: EntityId,
    pub entity_type: String,
    pub attributes: IndexMap<String, Attribute>,
    pub context: Vec<String>,
}

impl ContextEntity {
    pub fn new(id: EntityId) -> Self {
        Self {
            entity_type: id.entity_type().to_string(),
            id,
            attributes: IndexMap::new(),
            context: default_context(),
        }
    }

    pub fn with(mut self, name: &str, attr: Attribute) -> Self {
        self.set(name, attr);
        self
    }

    pub fn set(&mut self, name: &str, attr: Attribute) {
        self.attributes.insert(name.to_string(), attr);
    }

    pub fn get(&self, name: &str) -> Option<&Attribute> {
        self.attributes.get(name)
    }

    /// Overlays `patch` onto `self`: attributes present in the patch replace
    /// stored ones, absent attributes are kept. Returns the names whose wire
    /// value changed.
    pub fn merge_from(&mut self, patch: &ContextEntity) -> Vec<String> {
        let mut changed = Vec::new();
        for (name, attr) in &patch.attributes {
            let differs = self.attributes.get(name) != Some(attr);
            if differs {
                self.attributes.insert(name.clone(), attr.clone());
                changed.push(name.clone());
            }
        }
        if !patch.context.is_empty() {
            self.context = patch.context.clone();
        }
        changed
    }

    /// Serializes to the NGSI-LD wire document.
    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("id".into(), Value::String(self.id.to_string()));
        obj.insert("type".into(), Value::String(self.entity_type.clone()));
        for (name, attr) in &self.attributes {
            obj.insert(name.clone(), attr.to_wire());
        }
        let context = if self.context.is_empty() {
            default_context()
        } else {
            self.context.clone()
        };
        obj.insert(
            "@context".into(),
            Value::Array(context.into_iter().map(Value::String).collect()),
        );
        Value::Object(obj)
    }

    pub fn to_pretty_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("entity serializes")
    }

    pub fn from_json(doc: &Value) -> Result<Self, ModelError> {
        let err = |field: &str, reason: &str| ModelError::Parse {
            field: field.to_string(),
            reason: reason.to_string(),
        };
        let obj = doc
            .as_object()
            .ok_or_else(|| err("<document>", "entity must be a JSON object"))?;
        let id_str = obj
            .get("id")
            .ok_or_else(|| err("id", "missing mandatory field"))?
            .as_str()
            .ok_or_else(|| err("id", "must be a string"))?;
        let id: EntityId = id_str.parse().map_err(|e: ModelError| err("id", &e.to_string()))?;
        let entity_type = obj
            .get("type")
            .ok_or_else(|| err("type", "missing mandatory field"))?
            .as_str()
            .ok_or_else(|| err("type", "must be a string"))?;
        if entity_type != id.entity_type() {
            return Err(err(
                "type",
                &format!("{entity_type:?} does not match id type {:?}", id.entity_type()),
            ));
        }
        let mut entity = ContextEntity::new(id);
        entity.context.clear();
        for (name, value) in obj {
            match name.as_str() {
                "id" | "type" => {}
                "@context" => entity.context = parse_context(value)?,
                _ => {
                    let attr = Attribute::from_wire(name, value)?;
                    entity.attributes.insert(name.clone(), attr);
                }
            }
        }
        if entity.context.is_empty() {
            entity.context = default_context();
        }
        Ok(entity)
    }
}

fn parse_context(value: &Value) -> Result<Vec<String>, ModelError> {
    let err = || ModelError::Parse {
        field: "@context".into(),
        reason: "must be a URL or a list of URLs".into(),
    };
    match value {
        Value::String(s) => Ok(vec![s.clone()]),
        Value::Array(items) => items
            .iter()
            .map(|v| v.as_str().map(str::to_string).ok_or_else(err))
            .collect(),
        _ => Err(err()),
    }
}

impl Serialize for ContextEntity {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ContextEntity {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let doc = Value::deserialize(deserializer)?;
        ContextEntity::from_json(&doc).map_err(serde::de::Error::custom)
    }
}

pub fn serialize_entity(entity: &ContextEntity) -> Value {
    entity.to_json()
}

pub fn parse_entity(doc: &Value) -> Result<ContextEntity, ModelError> {
    ContextEntity::from_json(doc)
}

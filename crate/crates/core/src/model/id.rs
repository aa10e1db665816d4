use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ModelError;

const URN_PREFIX: &str = "urn:ngsi-ld:";

/// URN identity of a context entity: `urn:ngsi-ld:<Type>:<type>-<key>`.
///
/// The local segment starts with the type name with its first letter
/// lowered (`Flight` → `flight-`, `AircraftModel` → `aircraftModel-`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(String);

impl EntityId {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The type segment, e.g. `Flight`.
    pub fn entity_type(&self) -> &str {
        self.segments().0
    }

    /// The part after `<type>-`, e.g. `1234` for `flight-1234`.
    pub fn local_key(&self) -> &str {
        let (ty, local) = self.segments();
        &local[ty.len() + 1..]
    }

    fn segments(&self) -> (&str, &str) {
        let rest = &self.0[URN_PREFIX.len()..];
        rest.split_once(':').expect("validated on construction")
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for EntityId {
    type Err = ModelError;

    fn from_str(urn: &str) -> Result<Self, Self::Err> {
        let invalid = |reason: &str| ModelError::InvalidId {
            input: urn.to_string(),
            reason: reason.to_string(),
        };
        let rest = urn
            .strip_prefix(URN_PREFIX)
            .ok_or_else(|| invalid("must start with \"urn:ngsi-ld:\""))?;
        let mut parts = rest.split(':');
        let (ty, local) = match (parts.next(), parts.next(), parts.next()) {
            (Some(ty), Some(local), None) => (ty, local),
            _ => return Err(invalid("expected exactly four colon-delimited segments")),
        };
        check_type_name(ty).map_err(|r| invalid(&r))?;
        let key = strip_type_prefix(ty, local)
            .ok_or_else(|| invalid("local segment must begin with the type name and '-'"))?;
        check_local_key(key).map_err(|r| invalid(&r))?;
        Ok(Self(urn.to_string()))
    }
}

impl Serialize for EntityId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for EntityId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// Builds `urn:ngsi-ld:<entity_type>:<entityType>-<local_key>`.
pub fn make_entity_id(entity_type: &str, local_key: &str) -> Result<EntityId, ModelError> {
    let invalid = |reason: String| ModelError::InvalidId {
        input: format!("{entity_type}/{local_key}"),
        reason,
    };
    check_type_name(entity_type).map_err(invalid)?;
    check_local_key(local_key).map_err(invalid)?;
    Ok(EntityId(format!(
        "{URN_PREFIX}{entity_type}:{}-{local_key}",
        lower_first(entity_type)
    )))
}

fn lower_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_ascii_lowercase().to_string() + chars.as_str(),
        None => String::new(),
    }
}

// Accepts the camel-case prefix we emit and the all-lowercase spelling.
fn strip_type_prefix<'a>(ty: &str, local: &'a str) -> Option<&'a str> {
    let head = local.get(..ty.len())?;
    let rest = local[ty.len()..].strip_prefix('-')?;
    (head == lower_first(ty) || head == ty.to_ascii_lowercase()).then_some(rest)
}

fn check_type_name(ty: &str) -> Result<(), String> {
    if ty.is_empty() {
        return Err("entity type is empty".into());
    }
    if !ty.chars().all(|c| c.is_ascii_alphanumeric()) {
        return Err(format!("entity type {ty:?} must be alphanumeric"));
    }
    if !ty.starts_with(|c: char| c.is_ascii_alphabetic()) {
        return Err(format!("entity type {ty:?} must start with a letter"));
    }
    Ok(())
}

fn check_local_key(key: &str) -> Result<(), String> {
    if key.is_empty() {
        return Err("local key is empty".into());
    }
    match key
        .chars()
        .find(|c| !(c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.')))
    {
        Some(bad) => Err(format!("local key {key:?} contains reserved character {bad:?}")),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn builds_reference_ids() {
        assert_eq!(
            make_entity_id("Flight", "1234").unwrap().as_str(),
            "urn:ngsi-ld:Flight:flight-1234"
        );
        assert_eq!(
            make_entity_id("Airline", "SK").unwrap().as_str(),
            "urn:ngsi-ld:Airline:airline-SK"
        );
        assert_eq!(
            make_entity_id("Aircraft", "AAAAA").unwrap().as_str(),
            "urn:ngsi-ld:Aircraft:aircraft-AAAAA"
        );
        assert_eq!(
            make_entity_id("AircraftModel", "AirbusA310-200").unwrap().as_str(),
            "urn:ngsi-ld:AircraftModel:aircraftModel-AirbusA310-200"
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(make_entity_id("", "1").is_err());
        assert!(make_entity_id("Flight", "").is_err());
        assert!(make_entity_id("Fli ght", "1").is_err());
        assert!(make_entity_id("Flight", "12:34").is_err());
        assert!(make_entity_id("Flight", "a/b").is_err());
        assert!(make_entity_id("Flight", "a(b)").is_err());
    }

    #[test]
    fn parses_and_splits() {
        let id: EntityId = "urn:ngsi-ld:Airport:airport-SVG".parse().unwrap();
        assert_eq!(id.entity_type(), "Airport");
        assert_eq!(id.local_key(), "SVG");
        let lower: EntityId = "urn:ngsi-ld:FlightNotification:flightnotification-1-x".parse().unwrap();
        assert_eq!(lower.local_key(), "1-x");
    }

    #[test]
    fn rejects_malformed_urns() {
        for bad in [
            "urn:ngsi-ld:Flight",
            "urn:ngsi-ld:Flight:flight-1:extra",
            "urn:ngsi:Flight:flight-1",
            "urn:ngsi-ld:Flight:aircraft-1",
            "urn:ngsi-ld:Flight:flight1",
            "urn:ngsi-ld:Flight:flight-",
        ] {
            assert!(bad.parse::<EntityId>().is_err(), "{bad}");
        }
    }

    proptest! {
        #[test]
        fn make_entity_id_satisfies_grammar(ty in "[A-Z][A-Za-z0-9]{0,15}", key in "[A-Za-z0-9]{1,20}") {
            let id = make_entity_id(&ty, &key).unwrap();
            let s = id.as_str();
            prop_assert!(s.starts_with("urn:ngsi-ld:"));
            let segs: Vec<&str> = s.split(':').collect();
            prop_assert_eq!(segs.len(), 4);
            prop_assert_eq!(segs[2], ty.as_str());
            let mut prefix = lower_first(&ty);
            prefix.push('-');
            prop_assert!(segs[3].starts_with(&prefix));
            let reparsed: EntityId = s.parse().unwrap();
            prop_assert_eq!(reparsed.local_key(), key.as_str());
        }
    }
}

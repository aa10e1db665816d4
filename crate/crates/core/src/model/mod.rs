//! The aeronautics context model: entity identity, NGSI-LD style
//! attributes, typed records and validation.

mod attribute;
mod entity;
mod id;
pub mod records;
mod validate;

use thiserror::Error;

pub use attribute::{AttrKind, Attribute, DATETIME};
pub use entity::{
    default_context, parse_entity, serialize_entity, ContextEntity, NGSI_LD_CORE_CONTEXT, SMART_DATA_MODELS_CONTEXT,
};
pub use id::{make_entity_id, EntityId};
pub use records::{
    AircraftModelRecord, AircraftRecord, AirlineRecord, AirportRecord, DurationField, FlightNotificationRecord,
    FlightRecord, FlightState, GeoPoint, Milestone, TaskStatus,
};
pub use validate::{check_flight, validate_entity, Violation, DURATION_MISMATCH, NEGATIVE_DURATION, TIME_ORDERING};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid entity id {input:?}: {reason}")]
    InvalidId { input: String, reason: String },
    #[error("field {field:?}: {reason}")]
    Parse { field: String, reason: String },
    #[error("{0}")]
    Invalid(String),
}

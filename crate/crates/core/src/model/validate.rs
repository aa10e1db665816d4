use std::fmt;

use serde::Serialize;

use super::records::*;
use super::{AttrKind, ContextEntity, EntityId};
use crate::time::seconds_between;

pub const TIME_ORDERING: &str = "time ordering";
pub const DURATION_MISMATCH: &str = "derived duration mismatch";
pub const NEGATIVE_DURATION: &str = "negative duration";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub rule: String,
    pub detail: String,
}

impl Violation {
    fn new(rule: &str, detail: impl Into<String>) -> Self {
        Self {
            rule: rule.to_string(),
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule, self.detail)
    }
}

/// Lists every invariant the entity violates; an empty report means valid.
pub fn validate_entity(entity: &ContextEntity) -> Vec<Violation> {
    let mut out = Vec::new();
    if entity.entity_type != entity.id.entity_type() {
        out.push(Violation::new(
            "identity",
            format!("type {} does not match id {}", entity.entity_type, entity.id),
        ));
    }
    for (name, attr) in &entity.attributes {
        if name.is_empty() || name.starts_with('@') {
            out.push(Violation::new("attribute name", format!("{name:?} is reserved")));
        }
        if attr.kind == AttrKind::Relationship && attr.as_entity_id().is_none() {
            out.push(Violation::new(
                "invalid relationship",
                format!("{name} does not reference a valid entity URN"),
            ));
        }
        if attr.is_datetime() && attr.as_datetime().is_none() {
            out.push(Violation::new(
                "invalid datetime",
                format!("{name} is not an ISO 8601 UTC timestamp"),
            ));
        }
    }
    if !out.is_empty() {
        return out;
    }
    let typed = match entity.entity_type.as_str() {
        FLIGHT => FlightRecord::from_entity(entity).map(|r| check_flight(&r, &mut out)),
        AIRCRAFT => AircraftRecord::from_entity(entity).map(|r| check_aircraft(&r, &mut out)),
        AIRCRAFT_MODEL => AircraftModelRecord::from_entity(entity).map(|r| check_aircraft_model(&r, &mut out)),
        AIRLINE => AirlineRecord::from_entity(entity).map(|r| {
            check_designator(&r.id, &r.iata_code, &r.icao_code, &mut out);
        }),
        AIRPORT => AirportRecord::from_entity(entity).map(|r| {
            check_designator(&r.id, &r.iata_code, &r.icao_code, &mut out);
            if let Some(loc) = r.location {
                check_coordinates(loc, &mut out);
            }
        }),
        FLIGHT_NOTIFICATION => FlightNotificationRecord::from_entity(entity).map(|r| check_notification(&r, &mut out)),
        _ => Ok(()),
    };
    if let Err(e) = typed {
        out.push(Violation::new("invalid value", e.to_string()));
    }
    out
}

pub fn check_flight(f: &FlightRecord, out: &mut Vec<Violation>) {
    if let Some(num) = &f.flight_number {
        if num.is_empty() || !num.chars().all(|c| c.is_ascii_digit()) {
            out.push(Violation::new(
                "invalid value",
                format!("flightNumber {num:?} must be numeric without airline prefix"),
            ));
        }
    }

    let present: Vec<_> = Milestone::ACTUAL_CHAIN
        .iter()
        .filter_map(|m| f.milestone(*m).map(|ts| (*m, ts)))
        .collect();
    let broken: Vec<String> = present
        .windows(2)
        .filter(|w| w[0].1 > w[1].1)
        .map(|w| format!("{} after {}", w[0].0, w[1].0))
        .collect();
    if !broken.is_empty() {
        out.push(Violation::new(TIME_ORDERING, broken.join(", ")));
    }

    for d in DurationField::ALL {
        if let Some(secs) = f.duration(d) {
            if secs < 0 {
                out.push(Violation::new(
                    NEGATIVE_DURATION,
                    format!("{} = {secs}", d.attribute_name()),
                ));
            }
        }
    }

    let derived = [
        (DurationField::Axot, Milestone::Aobt, Milestone::Atot),
        (DurationField::Axit, Milestone::Aldt, Milestone::Aibt),
    ];
    for (field, from, to) in derived {
        if let (Some(stored), Some(a), Some(b)) = (f.duration(field), f.milestone(from), f.milestone(to)) {
            let expected = seconds_between(&a, &b);
            if stored != expected {
                out.push(Violation::new(
                    DURATION_MISMATCH,
                    format!("{} = {stored} but {to} - {from} = {expected}", field.attribute_name()),
                ));
            }
        }
    }
}

fn check_coordinates(p: GeoPoint, out: &mut Vec<Violation>) {
    if !(-90.0..=90.0).contains(&p.latitude) || !(-180.0..=180.0).contains(&p.longitude) {
        out.push(Violation::new(
            "coordinate range",
            format!("({}, {}) outside latitude/longitude bounds", p.latitude, p.longitude),
        ));
    }
}

fn check_aircraft(a: &AircraftRecord, out: &mut Vec<Violation>) {
    if let Some(loc) = a.location {
        check_coordinates(loc, out);
    }
    if let Some(h) = a.heading {
        if !(0.0..360.0).contains(&h) {
            out.push(Violation::new("invalid value", format!("heading {h} outside [0, 360)")));
        }
    }
    if let Some(s) = a.speed {
        if s < 0.0 {
            out.push(Violation::new("invalid value", format!("speed {s} is negative")));
        }
    }
    if a.registration().contains('-') {
        out.push(Violation::new(
            "invalid value",
            "aircraft registration must not contain hyphens",
        ));
    }
}

fn check_aircraft_model(m: &AircraftModelRecord, out: &mut Vec<Violation>) {
    for (name, v) in [
        ("length", m.length),
        ("wingspan", m.wingspan),
        ("height", m.height),
        ("maximumSpeed", m.maximum_speed),
    ] {
        if let Some(v) = v {
            if v <= 0.0 {
                out.push(Violation::new("invalid value", format!("{name} must be positive")));
            }
        }
    }
}

fn check_designator(id: &EntityId, iata: &Option<String>, icao: &Option<String>, out: &mut Vec<Violation>) {
    if iata.is_none() && icao.is_none() {
        out.push(Violation::new(
            "missing designator",
            format!("{id} needs an IATA or ICAO code"),
        ));
    }
}

fn check_notification(n: &FlightNotificationRecord, out: &mut Vec<Violation>) {
    if let (Some(issued), Some(modified)) = (n.date_issued, n.date_modified) {
        if modified < issued {
            out.push(Violation::new(TIME_ORDERING, "dateModified precedes dateIssued"));
        }
    }
}

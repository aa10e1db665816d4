//! Typed views over the aeronautics entity types.
//!
//! Each record converts to and from a [`ContextEntity`]. Absent optional
//! fields are omitted from the entity rather than written as null.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde_json::Value;

use super::{make_entity_id, Attribute, ContextEntity, EntityId, ModelError};
use crate::time::Timestamp;

pub const FLIGHT: &str = "Flight";
pub const AIRCRAFT: &str = "Aircraft";
pub const AIRCRAFT_MODEL: &str = "AircraftModel";
pub const AIRLINE: &str = "Airline";
pub const AIRPORT: &str = "Airport";
pub const FLIGHT_NOTIFICATION: &str = "FlightNotification";

/// A-CDM timestamp milestones carried by a flight (`date<CODE>`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Milestone {
    Sobt,
    Eobt,
    Aobt,
    Tobt,
    Etot,
    Atot,
    Ctot,
    Ttot,
    Eldt,
    Aldt,
    Tldt,
    Sibt,
    Eibt,
    Aibt,
}

impl Milestone {
    pub const ALL: [Milestone; 14] = [
        Milestone::Sobt,
        Milestone::Eobt,
        Milestone::Aobt,
        Milestone::Tobt,
        Milestone::Etot,
        Milestone::Atot,
        Milestone::Ctot,
        Milestone::Ttot,
        Milestone::Eldt,
        Milestone::Aldt,
        Milestone::Tldt,
        Milestone::Sibt,
        Milestone::Eibt,
        Milestone::Aibt,
    ];

    /// The four actual milestones, in the order they must occur.
    pub const ACTUAL_CHAIN: [Milestone; 4] = [Milestone::Aobt, Milestone::Atot, Milestone::Aldt, Milestone::Aibt];

    pub fn code(self) -> &'static str {
        match self {
            Milestone::Sobt => "SOBT",
            Milestone::Eobt => "EOBT",
            Milestone::Aobt => "AOBT",
            Milestone::Tobt => "TOBT",
            Milestone::Etot => "ETOT",
            Milestone::Atot => "ATOT",
            Milestone::Ctot => "CTOT",
            Milestone::Ttot => "TTOT",
            Milestone::Eldt => "ELDT",
            Milestone::Aldt => "ALDT",
            Milestone::Tldt => "TLDT",
            Milestone::Sibt => "SIBT",
            Milestone::Eibt => "EIBT",
            Milestone::Aibt => "AIBT",
        }
    }

    pub fn attribute_name(self) -> String {
        format!("date{}", self.code())
    }

    pub fn is_actual(self) -> bool {
        Self::ACTUAL_CHAIN.contains(&self)
    }
}

impl fmt::Display for Milestone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl serde::Serialize for Milestone {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl FromStr for Milestone {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let code = s.strip_prefix("date").unwrap_or(s).to_ascii_uppercase();
        Milestone::ALL
            .into_iter()
            .find(|m| m.code() == code)
            .ok_or_else(|| ModelError::Invalid(format!("unknown milestone {s:?}")))
    }
}

/// Duration attributes of a flight, in whole seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DurationField {
    Exot,
    Axot,
    Exit,
    Axit,
    Sttt,
    Ettt,
    Attt,
}

impl DurationField {
    pub const ALL: [DurationField; 7] = [
        DurationField::Exot,
        DurationField::Axot,
        DurationField::Exit,
        DurationField::Axit,
        DurationField::Sttt,
        DurationField::Ettt,
        DurationField::Attt,
    ];

    pub fn code(self) -> &'static str {
        match self {
            DurationField::Exot => "EXOT",
            DurationField::Axot => "AXOT",
            DurationField::Exit => "EXIT",
            DurationField::Axit => "AXIT",
            DurationField::Sttt => "STTT",
            DurationField::Ettt => "ETTT",
            DurationField::Attt => "ATTT",
        }
    }

    pub fn attribute_name(self) -> String {
        format!("date{}", self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlightState {
    Scheduled,
    Active,
    Unknown,
    Redirected,
    Landed,
    Diverted,
    Cancelled,
}

impl FlightState {
    pub fn as_str(self) -> &'static str {
        match self {
            FlightState::Scheduled => "scheduled",
            FlightState::Active => "active",
            FlightState::Unknown => "unknown",
            FlightState::Redirected => "redirected",
            FlightState::Landed => "landed",
            FlightState::Diverted => "diverted",
            FlightState::Cancelled => "cancelled",
        }
    }
}

impl FromStr for FlightState {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "scheduled" => FlightState::Scheduled,
            "active" => FlightState::Active,
            "unknown" => FlightState::Unknown,
            "redirected" => FlightState::Redirected,
            "landed" => FlightState::Landed,
            "diverted" => FlightState::Diverted,
            "cancelled" => FlightState::Cancelled,
            other => return Err(ModelError::Invalid(format!("unknown flight state {other:?}"))),
        })
    }
}

fn wrong(entity: &ContextEntity, field: &str, expected: &str) -> ModelError {
    ModelError::Parse {
        field: field.to_string(),
        reason: format!("{} attribute must be {expected}", entity.id),
    }
}

fn get_string(e: &ContextEntity, name: &str) -> Result<Option<String>, ModelError> {
    match e.get(name) {
        None => Ok(None),
        Some(a) => a
            .as_str()
            .map(|s| Some(s.to_string()))
            .ok_or_else(|| wrong(e, name, "a string")),
    }
}

fn get_f64(e: &ContextEntity, name: &str) -> Result<Option<f64>, ModelError> {
    match e.get(name) {
        None => Ok(None),
        Some(a) => a.as_f64().map(Some).ok_or_else(|| wrong(e, name, "a number")),
    }
}

fn get_i64(e: &ContextEntity, name: &str) -> Result<Option<i64>, ModelError> {
    match e.get(name) {
        None => Ok(None),
        Some(a) => a
            .value
            .as_i64()
            .or_else(|| a.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as i64))
            .map(Some)
            .ok_or_else(|| wrong(e, name, "an integer")),
    }
}

fn get_bool(e: &ContextEntity, name: &str) -> Result<Option<bool>, ModelError> {
    match e.get(name) {
        None => Ok(None),
        Some(a) => a.value.as_bool().map(Some).ok_or_else(|| wrong(e, name, "a boolean")),
    }
}

fn get_time(e: &ContextEntity, name: &str) -> Result<Option<Timestamp>, ModelError> {
    match e.get(name) {
        None => Ok(None),
        Some(a) => a.as_datetime().map(Some).ok_or_else(|| wrong(e, name, "a DateTime")),
    }
}

fn get_rel(e: &ContextEntity, name: &str) -> Result<Option<EntityId>, ModelError> {
    match e.get(name) {
        None => Ok(None),
        Some(a) => a
            .as_entity_id()
            .map(Some)
            .ok_or_else(|| wrong(e, name, "a Relationship to an entity URN")),
    }
}

fn get_point(e: &ContextEntity, name: &str) -> Result<Option<Vec<f64>>, ModelError> {
    match e.get(name) {
        None => Ok(None),
        Some(a) => a
            .point_coordinates()
            .map(Some)
            .ok_or_else(|| wrong(e, name, "a GeoJSON point")),
    }
}

fn put_string(e: &mut ContextEntity, name: &str, v: &Option<String>) {
    if let Some(v) = v {
        e.set(name, Attribute::property(v.clone()));
    }
}

fn put_number(e: &mut ContextEntity, name: &str, v: Option<f64>) {
    if let Some(v) = v {
        e.set(name, Attribute::property(number(v)));
    }
}

fn put_time(e: &mut ContextEntity, name: &str, v: &Option<Timestamp>) {
    if let Some(v) = v {
        e.set(name, Attribute::datetime(v));
    }
}

fn put_rel(e: &mut ContextEntity, name: &str, v: &Option<EntityId>) {
    if let Some(v) = v {
        e.set(name, Attribute::relationship(v));
    }
}

/// Integral values print without a fraction (`222`, not `222.0`).
pub(crate) fn number(v: f64) -> Value {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        Value::from(v as i64)
    } else {
        Value::from(v)
    }
}

fn expect_type(e: &ContextEntity, ty: &str) -> Result<(), ModelError> {
    if e.entity_type == ty {
        Ok(())
    } else {
        Err(ModelError::Parse {
            field: "type".into(),
            reason: format!("expected {ty}, found {}", e.entity_type),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlightRecord {
    pub id: EntityId,
    pub flight_number: Option<String>,
    pub flight_number_iata: Option<String>,
    pub flight_number_icao: Option<String>,
    pub state: Option<FlightState>,
    pub passenger_count: Option<u32>,
    pub date_departure: Option<Timestamp>,
    pub date_arrival: Option<Timestamp>,
    pub date_scheduled: Option<Timestamp>,
    pub milestones: BTreeMap<Milestone, Timestamp>,
    pub durations: BTreeMap<DurationField, i64>,
    pub stand_code: Option<String>,
    pub gate_code: Option<String>,
    pub has_aircraft: Option<EntityId>,
    pub has_aircraft_model: Option<EntityId>,
    pub departs_from_airport: Option<EntityId>,
    pub arrives_to_airport: Option<EntityId>,
    pub belongs_to_airline: Option<EntityId>,
}

impl FlightRecord {
    pub fn new(id: EntityId) -> Self {
        Self {
            id,
            flight_number: None,
            flight_number_iata: None,
            flight_number_icao: None,
            state: None,
            passenger_count: None,
            date_departure: None,
            date_arrival: None,
            date_scheduled: None,
            milestones: BTreeMap::new(),
            durations: BTreeMap::new(),
            stand_code: None,
            gate_code: None,
            has_aircraft: None,
            has_aircraft_model: None,
            departs_from_airport: None,
            arrives_to_airport: None,
            belongs_to_airline: None,
        }
    }

    pub fn milestone(&self, m: Milestone) -> Option<Timestamp> {
        self.milestones.get(&m).copied()
    }

    pub fn duration(&self, d: DurationField) -> Option<i64> {
        self.durations.get(&d).copied()
    }

    pub fn from_entity(e: &ContextEntity) -> Result<Self, ModelError> {
        expect_type(e, FLIGHT)?;
        let mut rec = FlightRecord::new(e.id.clone());
        rec.flight_number = get_string(e, "flightNumber")?;
        rec.flight_number_iata = get_string(e, "flightNumberIATA")?;
        rec.flight_number_icao = get_string(e, "flightNumberICAO")?;
        rec.state = get_string(e, "state")?.map(|s| s.parse()).transpose()?;
        rec.passenger_count = get_i64(e, "passengerCount")?
            .map(|n| u32::try_from(n).map_err(|_| wrong(e, "passengerCount", "non-negative")))
            .transpose()?;
        rec.date_departure = get_time(e, "dateDeparture")?;
        rec.date_arrival = get_time(e, "dateArrival")?;
        rec.date_scheduled = get_time(e, "dateScheduled")?;
        for m in Milestone::ALL {
            if let Some(ts) = get_time(e, &m.attribute_name())? {
                rec.milestones.insert(m, ts);
            }
        }
        for d in DurationField::ALL {
            if let Some(secs) = get_i64(e, &d.attribute_name())? {
                rec.durations.insert(d, secs);
            }
        }
        rec.stand_code = get_string(e, "standCode")?;
        rec.gate_code = get_string(e, "gateCode")?;
        rec.has_aircraft = get_rel(e, "hasAircraft")?;
        rec.has_aircraft_model = get_rel(e, "hasAircraftModel")?;
        rec.departs_from_airport = get_rel(e, "departsFromAirport")?;
        rec.arrives_to_airport = get_rel(e, "arrivesToAirport")?;
        rec.belongs_to_airline = get_rel(e, "belongsToAirline")?;
        Ok(rec)
    }

    pub fn to_entity(&self) -> ContextEntity {
        let mut e = ContextEntity::new(self.id.clone());
        put_string(&mut e, "flightNumber", &self.flight_number);
        put_string(&mut e, "flightNumberIATA", &self.flight_number_iata);
        put_string(&mut e, "flightNumberICAO", &self.flight_number_icao);
        if let Some(state) = self.state {
            e.set("state", Attribute::property(state.as_str()));
        }
        if let Some(n) = self.passenger_count {
            e.set("passengerCount", Attribute::property(n));
        }
        put_rel(&mut e, "belongsToAirline", &self.belongs_to_airline);
        put_rel(&mut e, "departsFromAirport", &self.departs_from_airport);
        put_rel(&mut e, "arrivesToAirport", &self.arrives_to_airport);
        put_rel(&mut e, "hasAircraft", &self.has_aircraft);
        put_rel(&mut e, "hasAircraftModel", &self.has_aircraft_model);
        put_string(&mut e, "standCode", &self.stand_code);
        put_string(&mut e, "gateCode", &self.gate_code);
        put_time(&mut e, "dateDeparture", &self.date_departure);
        put_time(&mut e, "dateArrival", &self.date_arrival);
        for (m, ts) in &self.milestones {
            e.set(&m.attribute_name(), Attribute::datetime(ts));
        }
        for (d, secs) in &self.durations {
            e.set(&d.attribute_name(), Attribute::property(*secs));
        }
        put_time(&mut e, "dateScheduled", &self.date_scheduled);
        e
    }
}

/// Geographic point as emitted by the position feed: latitude, longitude and
/// altitude in metres, in that order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub latitude: f64,
    pub longitude: f64,
    pub altitude: Option<f64>,
}

impl GeoPoint {
    fn from_coordinates(c: &[f64]) -> Option<Self> {
        match c {
            [lat, lon] => Some(Self {
                latitude: *lat,
                longitude: *lon,
                altitude: None,
            }),
            [lat, lon, alt] => Some(Self {
                latitude: *lat,
                longitude: *lon,
                altitude: Some(*alt),
            }),
            _ => None,
        }
    }

    fn to_attribute(self) -> Attribute {
        match self.altitude {
            Some(alt) => Attribute::geo_point(&[self.latitude, self.longitude, alt]),
            None => Attribute::geo_point(&[self.latitude, self.longitude]),
        }
    }
}

fn get_geo(e: &ContextEntity, name: &str) -> Result<Option<GeoPoint>, ModelError> {
    get_point(e, name)?
        .map(|c| GeoPoint::from_coordinates(&c).ok_or_else(|| wrong(e, name, "2 or 3 coordinates")))
        .transpose()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AircraftRecord {
    pub id: EntityId,
    pub flight_number: Option<String>,
    pub flight_number_iata: Option<String>,
    pub adshex: Option<String>,
    pub location: Option<GeoPoint>,
    pub heading: Option<f64>,
    pub speed: Option<f64>,
    pub vertical_speed: Option<f64>,
    pub is_on_ground: Option<bool>,
    pub date_issued: Option<Timestamp>,
}

impl AircraftRecord {
    pub fn new(registration: &str) -> Result<Self, ModelError> {
        Ok(Self {
            id: make_entity_id(AIRCRAFT, registration)?,
            flight_number: None,
            flight_number_iata: None,
            adshex: None,
            location: None,
            heading: None,
            speed: None,
            vertical_speed: None,
            is_on_ground: None,
            date_issued: None,
        })
    }

    /// Registration mark without hyphens, taken from the entity id.
    pub fn registration(&self) -> &str {
        self.id.local_key()
    }

    pub fn from_entity(e: &ContextEntity) -> Result<Self, ModelError> {
        expect_type(e, AIRCRAFT)?;
        Ok(Self {
            id: e.id.clone(),
            flight_number: get_string(e, "flightNumber")?,
            flight_number_iata: get_string(e, "flightNumberIATA")?,
            adshex: get_string(e, "adshex")?,
            location: get_geo(e, "location")?,
            heading: get_f64(e, "heading")?,
            speed: get_f64(e, "speed")?,
            vertical_speed: get_f64(e, "verticalSpeed")?,
            is_on_ground: get_bool(e, "isOnGround")?,
            date_issued: get_time(e, "dateIssued")?,
        })
    }

    pub fn to_entity(&self) -> ContextEntity {
        let mut e = ContextEntity::new(self.id.clone());
        put_string(&mut e, "flightNumber", &self.flight_number);
        put_string(&mut e, "flightNumberIATA", &self.flight_number_iata);
        put_string(&mut e, "adshex", &self.adshex);
        if let Some(loc) = self.location {
            e.set("location", loc.to_attribute());
        }
        put_number(&mut e, "heading", self.heading);
        put_number(&mut e, "speed", self.speed);
        put_number(&mut e, "verticalSpeed", self.vertical_speed);
        if let Some(b) = self.is_on_ground {
            e.set("isOnGround", Attribute::property(b));
        }
        put_time(&mut e, "dateIssued", &self.date_issued);
        e
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AircraftModelRecord {
    pub id: EntityId,
    pub iata_code: Option<String>,
    pub icao_code: Option<String>,
    pub length: Option<f64>,
    pub wingspan: Option<f64>,
    pub height: Option<f64>,
    pub maximum_speed: Option<f64>,
}

impl AircraftModelRecord {
    pub fn from_entity(e: &ContextEntity) -> Result<Self, ModelError> {
        expect_type(e, AIRCRAFT_MODEL)?;
        Ok(Self {
            id: e.id.clone(),
            iata_code: get_string(e, "iataCode")?,
            icao_code: get_string(e, "icaoCode")?,
            length: get_f64(e, "length")?,
            wingspan: get_f64(e, "wingspan")?,
            height: get_f64(e, "height")?,
            maximum_speed: get_f64(e, "maximumSpeed")?,
        })
    }

    pub fn to_entity(&self) -> ContextEntity {
        let mut e = ContextEntity::new(self.id.clone());
        put_string(&mut e, "iataCode", &self.iata_code);
        put_string(&mut e, "icaoCode", &self.icao_code);
        put_number(&mut e, "length", self.length);
        put_number(&mut e, "wingspan", self.wingspan);
        put_number(&mut e, "height", self.height);
        put_number(&mut e, "maximumSpeed", self.maximum_speed);
        e
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AirlineRecord {
    pub id: EntityId,
    pub iata_code: Option<String>,
    pub icao_code: Option<String>,
    pub callsign: Option<String>,
    pub name: Option<String>,
    pub short_name: Option<String>,
    pub country_address: Option<String>,
}

impl AirlineRecord {
    pub fn from_entity(e: &ContextEntity) -> Result<Self, ModelError> {
        expect_type(e, AIRLINE)?;
        Ok(Self {
            id: e.id.clone(),
            iata_code: get_string(e, "iataCode")?,
            icao_code: get_string(e, "icaoCode")?,
            callsign: get_string(e, "callsign")?,
            name: get_string(e, "name")?,
            short_name: get_string(e, "shortName")?,
            country_address: get_string(e, "countryAddress")?,
        })
    }

    pub fn to_entity(&self) -> ContextEntity {
        let mut e = ContextEntity::new(self.id.clone());
        put_string(&mut e, "iataCode", &self.iata_code);
        put_string(&mut e, "icaoCode", &self.icao_code);
        put_string(&mut e, "callsign", &self.callsign);
        put_string(&mut e, "name", &self.name);
        put_string(&mut e, "shortName", &self.short_name);
        put_string(&mut e, "countryAddress", &self.country_address);
        e
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AirportRecord {
    pub id: EntityId,
    pub iata_code: Option<String>,
    pub icao_code: Option<String>,
    pub name: Option<String>,
    pub address: Option<String>,
    pub location: Option<GeoPoint>,
}

impl AirportRecord {
    pub fn from_entity(e: &ContextEntity) -> Result<Self, ModelError> {
        expect_type(e, AIRPORT)?;
        Ok(Self {
            id: e.id.clone(),
            iata_code: get_string(e, "iataCode")?,
            icao_code: get_string(e, "icaoCode")?,
            name: get_string(e, "name")?,
            address: get_string(e, "address")?,
            location: get_geo(e, "location")?,
        })
    }

    pub fn to_entity(&self) -> ContextEntity {
        let mut e = ContextEntity::new(self.id.clone());
        put_string(&mut e, "iataCode", &self.iata_code);
        put_string(&mut e, "icaoCode", &self.icao_code);
        put_string(&mut e, "name", &self.name);
        put_string(&mut e, "address", &self.address);
        if let Some(loc) = self.location {
            e.set("location", loc.to_attribute());
        }
        e
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskStatus {
    Active,
    Inactive,
    Completed,
    Unknown,
}

impl TaskStatus {
    pub const ALL: [TaskStatus; 4] = [
        TaskStatus::Active,
        TaskStatus::Inactive,
        TaskStatus::Completed,
        TaskStatus::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskStatus::Active => "active",
            TaskStatus::Inactive => "inactive",
            TaskStatus::Completed => "completed",
            TaskStatus::Unknown => "unknown",
        }
    }

    /// unknown↔active, active→inactive, inactive→active, active→completed.
    /// `completed` is terminal. Self-transitions are not transitions.
    pub fn can_transition_to(self, next: TaskStatus) -> bool {
        use TaskStatus::*;
        matches!(
            (self, next),
            (Unknown, Active) | (Active, Unknown) | (Active, Inactive) | (Inactive, Active) | (Active, Completed)
        )
    }
}

impl fmt::Display for TaskStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskStatus {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskStatus::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| ModelError::Invalid(format!("unknown task status {s:?}")))
    }
}

/// A turnaround event or task registered against a flight.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightNotificationRecord {
    pub id: EntityId,
    pub description: Option<String>,
    pub date_issued: Option<Timestamp>,
    pub date_modified: Option<Timestamp>,
    pub issuer: Option<String>,
    pub status: Option<TaskStatus>,
    pub ref_flight: Option<EntityId>,
    /// Tasks that must be completed before this one may complete.
    pub depends_on: Vec<EntityId>,
}

impl FlightNotificationRecord {
    pub fn from_entity(e: &ContextEntity) -> Result<Self, ModelError> {
        expect_type(e, FLIGHT_NOTIFICATION)?;
        let depends_on = match e.get("dependsOn") {
            None => Vec::new(),
            Some(a) => a
                .value
                .as_array()
                .ok_or_else(|| wrong(e, "dependsOn", "a list of URNs"))?
                .iter()
                .map(|v| {
                    v.as_str()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| wrong(e, "dependsOn", "a list of URNs"))
                })
                .collect::<Result<_, _>>()?,
        };
        Ok(Self {
            id: e.id.clone(),
            description: get_string(e, "description")?,
            date_issued: get_time(e, "dateIssued")?,
            date_modified: get_time(e, "dateModified")?,
            issuer: get_string(e, "issuer")?,
            status: get_string(e, "status")?.map(|s| s.parse()).transpose()?,
            ref_flight: get_rel(e, "refFlight")?,
            depends_on,
        })
    }

    pub fn to_entity(&self) -> ContextEntity {
        let mut e = ContextEntity::new(self.id.clone());
        put_string(&mut e, "description", &self.description);
        put_time(&mut e, "dateIssued", &self.date_issued);
        put_time(&mut e, "dateModified", &self.date_modified);
        put_string(&mut e, "issuer", &self.issuer);
        if let Some(s) = self.status {
            e.set("status", Attribute::property(s.as_str()));
        }
        put_rel(&mut e, "refFlight", &self.ref_flight);
        if !self.depends_on.is_empty() {
            let ids: Vec<Value> = self.depends_on.iter().map(|id| Value::String(id.to_string())).collect();
            e.set("dependsOn", Attribute::property(ids));
        }
        e
    }
}

//! Schedule feed responses in the shape the flight-information service uses.

use serde_json::{json, Map, Value};

use super::script::{Direction, ScenarioScript};
use crate::model::Milestone;
use crate::time::{format_feed, Timestamp};

/// The schedule as seen at `at`, with the all-null record first.
pub fn serve_schedule(script: &ScenarioScript, at: Timestamp) -> Value {
    serve_schedule_with(script, at, true)
}

/// Milestones that have happened by `at` are filled, the rest are null. The
/// all-null record (id 0) is only added when the schedule has flights.
pub fn serve_schedule_with(script: &ScenarioScript, at: Timestamp, inject_null: bool) -> Value {
    let mut out = Vec::with_capacity(script.flights.len() + 1);
    if inject_null && !script.flights.is_empty() {
        out.push(json!({"id": 0, "ScheduledDateTime": null}));
    }
    for (i, f) in script.flights.iter().enumerate() {
        let shown = |m: Milestone| -> Value {
            if !f.local_milestones().contains(&m) {
                return Value::Null;
            }
            match f.milestone_time(m) {
                Some(t) if t <= at => Value::String(format_feed(&t)),
                _ => Value::Null,
            }
        };
        let icao = f
            .other_airport_icao
            .clone()
            .or_else(|| script.airport(&f.other_airport_iata).map(|a| a.icao.clone()));
        let mut rec = Map::new();
        rec.insert("id".into(), json!(script.flight_id(i)));
        rec.insert("FlightNumber".into(), json!(f.flight_number));
        rec.insert("AirlineIATA".into(), json!(f.airline_iata));
        rec.insert("DepartureArrivalType".into(), json!(f.direction.code()));
        rec.insert("OriginDestAirportIATA".into(), json!(f.other_airport_iata));
        rec.insert("OriginDestAirportICAO".into(), json!(icao));
        rec.insert("Registration".into(), json!(f.registration));
        rec.insert("StandCode".into(), json!(f.stand_code));
        rec.insert("GateCode".into(), json!(f.gate_code));
        rec.insert("ALDT".into(), shown(Milestone::Aldt));
        rec.insert("AIBT".into(), shown(Milestone::Aibt));
        rec.insert("AOBT".into(), shown(Milestone::Aobt));
        if f.direction == Direction::Departure {
            rec.insert("ATOT".into(), shown(Milestone::Atot));
        }
        rec.insert("TOBT".into(), shown(Milestone::Tobt));
        rec.insert("ScheduledDateTime".into(), json!(format_feed(&f.scheduled)));
        out.push(Value::Object(rec));
    }
    Value::Array(out)
}

pub fn serve_airports(script: &ScenarioScript) -> Value {
    serde_json::to_value(&script.airports).expect("airports serialize")
}

pub fn serve_airlines(script: &ScenarioScript) -> Value {
    serde_json::to_value(&script.airlines).expect("airlines serialize")
}

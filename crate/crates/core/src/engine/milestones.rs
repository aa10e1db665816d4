//! Live milestone updates and the flight state machine.

use serde::Serialize;

use super::derive::compute_taxi_times;
use super::EngineError;
use crate::model::{DurationField, FlightRecord, FlightState, Milestone};
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Transition {
    pub from: Option<&'static str>,
    pub to: Option<&'static str>,
    /// False when the update repeated a value already recorded.
    pub changed: bool,
}

/// The actual milestone that freezes an estimate or target.
fn settled_by(m: Milestone) -> Option<Milestone> {
    match m {
        Milestone::Eobt | Milestone::Tobt => Some(Milestone::Aobt),
        Milestone::Etot | Milestone::Ttot | Milestone::Ctot => Some(Milestone::Atot),
        Milestone::Eldt | Milestone::Tldt => Some(Milestone::Aldt),
        Milestone::Eibt => Some(Milestone::Aibt),
        _ => None,
    }
}

/// Rewrites AXOT/AXIT from the milestones present.
pub fn refresh_derived(f: &mut FlightRecord) -> Result<(), EngineError> {
    let taxi = compute_taxi_times(f)?;
    for (field, value) in [(DurationField::Axot, taxi.axot), (DurationField::Axit, taxi.axit)] {
        match value {
            Some(v) => f.durations.insert(field, v),
            None => f.durations.remove(&field),
        };
    }
    Ok(())
}

fn next_state(current: Option<FlightState>, m: Milestone) -> Option<FlightState> {
    use FlightState::*;
    match (current, m) {
        (None | Some(Scheduled) | Some(Active), Milestone::Aldt) => Some(Landed),
        (None | Some(Scheduled), m) if m.is_actual() => Some(Active),
        (state, _) => state,
    }
}

/// Records `milestone` at `at`. Actuals are write-once and must respect
/// AOBT ≤ ATOT ≤ ALDT ≤ AIBT against those already known; estimates may
/// be revised until their actual arrives.
pub fn apply_milestone(
    flight: &FlightRecord,
    milestone: Milestone,
    at: Timestamp,
) -> Result<(FlightRecord, Transition), EngineError> {
    let unchanged = Transition {
        from: flight.state.map(FlightState::as_str),
        to: flight.state.map(FlightState::as_str),
        changed: false,
    };
    if milestone.is_actual() {
        if let Some(existing) = flight.milestone(milestone) {
            return if existing == at {
                Ok((flight.clone(), unchanged))
            } else {
                Err(EngineError::ImmutableActual { milestone, existing })
            };
        }
        let pos = Milestone::ACTUAL_CHAIN
            .iter()
            .position(|m| *m == milestone)
            .expect("actual milestone");
        for (i, other) in Milestone::ACTUAL_CHAIN.iter().enumerate() {
            let Some(t) = flight.milestone(*other) else { continue };
            if (i < pos && t > at) || (i > pos && t < at) {
                return Err(EngineError::Ordering {
                    milestone,
                    conflicting: *other,
                });
            }
        }
    } else if let Some(actual) = settled_by(milestone) {
        if flight.milestone(actual).is_some() {
            return Err(EngineError::Settled { milestone, actual });
        }
        if flight.milestone(milestone) == Some(at) {
            return Ok((flight.clone(), unchanged));
        }
    } else {
        return Err(EngineError::NotLive(milestone));
    }

    let mut next = flight.clone();
    next.milestones.insert(milestone, at);
    if milestone.is_actual() {
        next.state = next_state(flight.state, milestone);
    }
    refresh_derived(&mut next)?;
    let transition = Transition {
        from: flight.state.map(FlightState::as_str),
        to: next.state.map(FlightState::as_str),
        changed: true,
    };
    Ok((next, transition))
}

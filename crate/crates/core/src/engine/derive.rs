//! Derived A-CDM quantities: taxi, block and turnaround times, and the
//! delay status behind the dispatcher's colour coding.

use serde::Serialize;

use super::EngineError;
use crate::feeds::script::Direction;
use crate::model::{EntityId, FlightRecord, Milestone};
use crate::time::{seconds_between, Timestamp};

pub const DEFAULT_DELAY_THRESHOLD_SECS: i64 = 300;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TaxiTimes {
    pub axot: Option<i64>,
    pub axit: Option<i64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BlockTimes {
    pub in_air: Option<i64>,
    pub block_to_block: Option<i64>,
}

fn span(f: &FlightRecord, from: Milestone, to: Milestone, what: &str) -> Result<Option<i64>, EngineError> {
    match (f.milestone(from), f.milestone(to)) {
        (Some(a), Some(b)) => {
            let secs = seconds_between(&a, &b);
            if secs < 0 {
                return Err(EngineError::NegativeDuration {
                    what: what.to_string(),
                    seconds: secs,
                });
            }
            Ok(Some(secs))
        }
        _ => Ok(None),
    }
}

/// AXOT = ATOT − AOBT and AXIT = AIBT − ALDT, each only when both ends exist.
pub fn compute_taxi_times(f: &FlightRecord) -> Result<TaxiTimes, EngineError> {
    Ok(TaxiTimes {
        axot: span(f, Milestone::Aobt, Milestone::Atot, "AXOT")?,
        axit: span(f, Milestone::Aldt, Milestone::Aibt, "AXIT")?,
    })
}

/// In-air time ATOT → ALDT and block-to-block time AOBT → AIBT.
pub fn compute_block_times(f: &FlightRecord) -> Result<BlockTimes, EngineError> {
    Ok(BlockTimes {
        in_air: span(f, Milestone::Atot, Milestone::Aldt, "in-air time")?,
        block_to_block: span(f, Milestone::Aobt, Milestone::Aibt, "block-to-block time")?,
    })
}

/// Which leg `f` is at `home`, judged by its airport relationships.
pub fn leg_at(f: &FlightRecord, home: &EntityId) -> Option<Direction> {
    if f.arrives_to_airport.as_ref() == Some(home) {
        Some(Direction::Arrival)
    } else if f.departs_from_airport.as_ref() == Some(home) {
        Some(Direction::Departure)
    } else {
        None
    }
}

pub(crate) fn scheduled_in(f: &FlightRecord) -> Option<Timestamp> {
    f.milestone(Milestone::Sibt).or(f.date_scheduled)
}

pub(crate) fn scheduled_out(f: &FlightRecord) -> Option<Timestamp> {
    f.milestone(Milestone::Sobt).or(f.date_scheduled)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TurnaroundLink {
    pub inbound_flight: EntityId,
    pub outbound_flight: EntityId,
    pub stand_code: Option<String>,
    pub attt: Option<i64>,
    pub sttt: Option<i64>,
    pub ettt: Option<i64>,
}

/// Pairs an arrival at `home` with the same aircraft's next departure.
pub fn link_turnaround(
    inbound: &FlightRecord,
    outbound: &FlightRecord,
    home: &EntityId,
) -> Result<TurnaroundLink, EngineError> {
    let reject = |reason: String| EngineError::LinkRejected(reason);
    match (&inbound.has_aircraft, &outbound.has_aircraft) {
        (Some(a), Some(b)) if a == b => {}
        _ => {
            return Err(reject(format!(
                "{} and {} are not flown by the same aircraft",
                inbound.id, outbound.id
            )))
        }
    }
    if leg_at(inbound, home) != Some(Direction::Arrival) {
        return Err(reject(format!("{} does not arrive at {home}", inbound.id)));
    }
    if leg_at(outbound, home) != Some(Direction::Departure) {
        return Err(reject(format!("{} does not depart from {home}", outbound.id)));
    }
    let diff = |a: Option<Timestamp>, b: Option<Timestamp>| match (a, b) {
        (Some(a), Some(b)) => Some(seconds_between(&a, &b)),
        _ => None,
    };
    let attt = diff(inbound.milestone(Milestone::Aibt), outbound.milestone(Milestone::Aobt));
    if let Some(secs) = attt {
        if secs < 0 {
            return Err(reject(format!(
                "{} leaves {secs} s before {} is in block",
                outbound.id, inbound.id
            )));
        }
    }
    let in_block = inbound
        .milestone(Milestone::Aibt)
        .or(inbound.milestone(Milestone::Eibt));
    let off_block = outbound
        .milestone(Milestone::Tobt)
        .or(outbound.milestone(Milestone::Eobt));
    Ok(TurnaroundLink {
        inbound_flight: inbound.id.clone(),
        outbound_flight: outbound.id.clone(),
        stand_code: inbound.stand_code.clone().or(outbound.stand_code.clone()),
        attt,
        sttt: diff(scheduled_in(inbound), scheduled_out(outbound)),
        ettt: diff(in_block, off_block),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Classification {
    Future,
    OnTime,
    Late,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DelayStatus {
    pub classification: Classification,
    pub delay_seconds: Option<i64>,
    pub reference_milestone: Option<Milestone>,
}

impl DelayStatus {
    fn unknown() -> Self {
        Self {
            classification: Classification::Unknown,
            delay_seconds: None,
            reference_milestone: None,
        }
    }
}

/// Arrivals compare the best-known in-block time with SIBT, departures the
/// best-known off-block time with SOBT. A flight still waiting for its actual
/// after the best-known time has passed is treated as moving at `now`.
pub fn classify_delay(f: &FlightRecord, leg: Direction, now: Timestamp, threshold_secs: i64) -> DelayStatus {
    let (scheduled, actual, estimates, reference) = match leg {
        Direction::Arrival => (
            scheduled_in(f),
            Milestone::Aibt,
            &[Milestone::Eibt][..],
            Milestone::Sibt,
        ),
        Direction::Departure => (
            scheduled_out(f),
            Milestone::Aobt,
            &[Milestone::Tobt, Milestone::Eobt][..],
            Milestone::Sobt,
        ),
    };
    let Some(scheduled) = scheduled else {
        return DelayStatus::unknown();
    };
    let any_actual = Milestone::ACTUAL_CHAIN
        .iter()
        .filter_map(|m| f.milestone(*m))
        .any(|t| t <= now);
    if !any_actual && now < scheduled {
        return DelayStatus {
            classification: Classification::Future,
            delay_seconds: None,
            reference_milestone: None,
        };
    }
    let (best, used) = match f.milestone(actual) {
        Some(t) => (t, actual),
        None => {
            let (est, used) = estimates
                .iter()
                .find_map(|m| f.milestone(*m).map(|t| (t, *m)))
                .unwrap_or((scheduled, reference));
            (est.max(now), used)
        }
    };
    let delay = seconds_between(&scheduled, &best);
    DelayStatus {
        classification: if delay > threshold_secs {
            Classification::Late
        } else {
            Classification::OnTime
        },
        delay_seconds: Some(delay),
        reference_milestone: Some(used),
    }
}

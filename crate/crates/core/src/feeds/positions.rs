//! Position reports for airborne aircraft, in the stream's object shape.

use std::time::Duration;

use serde_json::{json, Map, Value};
use tokio::io::AsyncWriteExt;
use tokio_util::sync::CancellationToken;

use super::framing::encode_frame;
use super::script::{Direction, ScenarioScript};
use crate::time::{sleep_until, Clock, Timestamp};

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Report for flight `index` at `at`, if it is airborne then.
pub fn aircraft_position(script: &ScenarioScript, index: usize, at: Timestamp) -> Option<Value> {
    let a = script.airborne(index)?;
    if at < a.start || at > a.end {
        return None;
    }
    let f = &script.flights[index];
    let total = (a.end - a.start).num_seconds() as f64;
    let s = (at - a.start).num_seconds() as f64;
    let (here, course) = a.track.at(s / total);

    let (altitude, vert_rate) = if a.ramp_secs <= 0.0 {
        (a.cruise_ft, 0.0)
    } else {
        let rate = a.cruise_ft / a.ramp_secs * 60.0;
        let climb = s / a.ramp_secs;
        let descent = (total - s) / a.ramp_secs;
        if climb < 1.0 && climb <= descent {
            (a.cruise_ft * climb, rate)
        } else if descent < 1.0 {
            (a.cruise_ft * descent, -rate)
        } else {
            (a.cruise_ft, 0.0)
        }
    };
    let altitude = altitude.round() as i64;
    let mut speed = a.speed_kn.round();
    if let Some(max) = f.track.speed_kn {
        speed = speed.min(max.floor());
    }
    let other = &f.other_airport_iata;
    let home = &script.airport_iata;
    let route = match f.direction {
        Direction::Arrival => format!("{other}-{home}"),
        Direction::Departure => format!("{home}-{other}"),
    };
    Some(json!({
        "reg": f.registration,
        "flight_number": f.designator(),
        "adshex": f.hex(),
        "lat": round6(here.lat),
        "lon": round6(here.lon),
        "altitude": altitude,
        "heading": (course.round() as i64).rem_euclid(360),
        "speed": speed as i64,
        "vert_rate": vert_rate.round() as i64,
        "is_on_ground": altitude == 0,
        "pos_update_time": at.timestamp(),
        "route": route,
    }))
}

/// Every airborne aircraft at `at`, keyed by hex id in sorted order.
pub fn position_frame(script: &ScenarioScript, at: Timestamp) -> Value {
    let mut reports: Vec<(String, Value)> = (0..script.flights.len())
        .filter_map(|i| aircraft_position(script, i, at).map(|p| (script.flights[i].hex(), p)))
        .collect();
    reports.sort_by(|a, b| a.0.cmp(&b.0));
    Value::Object(reports.into_iter().collect::<Map<_, _>>())
}

/// Frames at `from`, `from + tick`, ... up to and including `to`.
pub fn frames_between(
    script: &ScenarioScript,
    from: Timestamp,
    to: Timestamp,
    tick: Duration,
) -> Vec<(Timestamp, Value)> {
    let step = chrono::Duration::from_std(tick.max(Duration::from_secs(1))).expect("tick in range");
    let mut out = Vec::new();
    let mut t = from;
    while t <= to {
        out.push((t, position_frame(script, t)));
        t += step;
    }
    out
}

/// Writes one frame per `tick` of simulated time, starting at the clock's
/// current time, until the writer fails or `cancel` fires.
pub async fn stream_positions<W>(
    script: &ScenarioScript,
    clock: &dyn Clock,
    tick: Duration,
    mut writer: W,
    cancel: &CancellationToken,
) -> std::io::Result<()>
where
    W: tokio::io::AsyncWrite + Unpin,
{
    let step = chrono::Duration::from_std(tick.max(Duration::from_secs(1))).expect("tick in range");
    let mut next = clock.now();
    loop {
        if !sleep_until(clock, next, cancel).await {
            return Ok(());
        }
        let frame = encode_frame(&position_frame(script, next));
        writer.write_all(&frame).await?;
        writer.flush().await?;
        next += step;
    }
}

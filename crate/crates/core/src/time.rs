//! Timestamps, the wire datetime format and the clocks shared by every
//! component.
//!
//! All twin timestamps carry whole-second precision. The wire format always
//! prints two zero fractional digits (`2021-02-04T17:20:00.00Z`).

use std::sync::Mutex;
use std::time::{Duration, Instant};

use chrono::{DateTime, NaiveDateTime, SubsecRound, TimeZone, Utc};
use thiserror::Error;

pub type Timestamp = DateTime<Utc>;

const WIRE_FORMAT: &str = "%Y-%m-%dT%H:%M:%S.00Z";
const FEED_FORMAT: &str = "%Y-%m-%dT%H:%M:%S+00:00";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid timestamp {input:?}")]
pub struct TimestampError {
    pub input: String,
}

/// Renders a timestamp in the entity wire format.
pub fn format_wire(ts: &Timestamp) -> String {
    ts.format(WIRE_FORMAT).to_string()
}

/// Renders a timestamp the way the schedule feed does (`+00:00` offset).
pub fn format_feed(ts: &Timestamp) -> String {
    ts.format(FEED_FORMAT).to_string()
}

/// Parses an ISO 8601 / RFC 3339 timestamp, normalised to UTC whole seconds.
///
/// Accepts any offset and fractional seconds; a missing offset is read as UTC.
pub fn parse_timestamp(input: &str) -> Result<Timestamp, TimestampError> {
    let trimmed = input.trim();
    if let Ok(ts) = DateTime::parse_from_rfc3339(trimmed) {
        return Ok(ts.with_timezone(&Utc).trunc_subsecs(0));
    }
    NaiveDateTime::parse_from_str(trimmed, "%Y-%m-%dT%H:%M:%S%.f")
        .map(|naive| Utc.from_utc_datetime(&naive).trunc_subsecs(0))
        .map_err(|_| TimestampError {
            input: input.to_string(),
        })
}

pub fn from_epoch_seconds(secs: i64) -> Option<Timestamp> {
    Utc.timestamp_opt(secs, 0).single()
}

/// Whole seconds from `from` to `to` (negative when `to` precedes `from`).
pub fn seconds_between(from: &Timestamp, to: &Timestamp) -> i64 {
    (*to - *from).num_seconds()
}

pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;

    /// Wall-clock time until this clock reads `target` (zero if past or if
    /// the clock does not advance on its own).
    fn wall_until(&self, target: &Timestamp) -> Duration {
        (*target - self.now()).to_std().unwrap_or(Duration::ZERO)
    }

    /// Whether time only moves when explicitly stepped.
    fn is_stepped(&self) -> bool {
        false
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        Utc::now().trunc_subsecs(0)
    }
}

#[derive(Debug)]
enum ClockMode {
    /// Time only moves when [`SimClock::set`] or [`SimClock::advance`] is called.
    Manual(Timestamp),
    /// Simulated time runs `scale` times faster than wall time.
    Scaled {
        origin_sim: Timestamp,
        origin_wall: Instant,
        scale: f64,
    },
}

/// Simulated clock with real-time, accelerated and manually stepped modes.
#[derive(Debug)]
pub struct SimClock {
    mode: Mutex<ClockMode>,
}

impl SimClock {
    pub fn manual(start: Timestamp) -> Self {
        Self {
            mode: Mutex::new(ClockMode::Manual(start.trunc_subsecs(0))),
        }
    }

    /// A clock running at `scale` × wall time; `1.0` is real time.
    pub fn scaled(start: Timestamp, scale: f64) -> Self {
        Self {
            mode: Mutex::new(ClockMode::Scaled {
                origin_sim: start,
                origin_wall: Instant::now(),
                scale: if scale > 0.0 { scale } else { 1.0 },
            }),
        }
    }

    pub fn set(&self, ts: Timestamp) {
        let mut mode = self.mode.lock().expect("clock lock");
        match &mut *mode {
            ClockMode::Manual(now) => *now = ts.trunc_subsecs(0),
            ClockMode::Scaled {
                origin_sim,
                origin_wall,
                ..
            } => {
                *origin_sim = ts;
                *origin_wall = Instant::now();
            }
        }
    }

    pub fn advance(&self, by: chrono::Duration) {
        let now = self.now();
        self.set(now + by);
    }

    /// Wall-clock time until simulated time reaches `target` (zero if past).
    pub fn wall_until(&self, target: &Timestamp) -> Duration {
        let mode = self.mode.lock().expect("clock lock");
        match &*mode {
            ClockMode::Manual(_) => Duration::ZERO,
            ClockMode::Scaled {
                origin_sim,
                origin_wall,
                scale,
            } => {
                let sim_secs = (*target - *origin_sim).num_milliseconds() as f64 / 1000.0;
                let wall_target = sim_secs / scale;
                let elapsed = origin_wall.elapsed().as_secs_f64();
                Duration::from_secs_f64((wall_target - elapsed).max(0.0))
            }
        }
    }

    pub fn is_manual(&self) -> bool {
        matches!(*self.mode.lock().expect("clock lock"), ClockMode::Manual(_))
    }
}

impl Clock for SimClock {
    fn wall_until(&self, target: &Timestamp) -> Duration {
        SimClock::wall_until(self, target)
    }

    fn is_stepped(&self) -> bool {
        self.is_manual()
    }

    fn now(&self) -> Timestamp {
        let mode = self.mode.lock().expect("clock lock");
        match &*mode {
            ClockMode::Manual(now) => *now,
            ClockMode::Scaled {
                origin_sim,
                origin_wall,
                scale,
            } => {
                let sim_ms = (origin_wall.elapsed().as_secs_f64() * scale * 1000.0) as i64;
                (*origin_sim + chrono::Duration::milliseconds(sim_ms)).trunc_subsecs(0)
            }
        }
    }
}

/// Sleeps until `clock` reads at least `target`. Stepped clocks are
/// re-checked every few milliseconds. Returns `false` if cancelled first.
pub async fn sleep_until(clock: &dyn Clock, target: Timestamp, cancel: &tokio_util::sync::CancellationToken) -> bool {
    loop {
        if clock.now() >= target {
            return true;
        }
        let wait = if clock.is_stepped() {
            Duration::from_millis(5)
        } else {
            clock
                .wall_until(&target)
                .clamp(Duration::from_millis(1), Duration::from_millis(250))
        };
        tokio::select! {
            _ = cancel.cancelled() => return false,
            _ = tokio::time::sleep(wait) => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_format_has_two_zero_fraction_digits() {
        let ts = parse_timestamp("2021-02-04T17:20:00+00:00").unwrap();
        assert_eq!(format_wire(&ts), "2021-02-04T17:20:00.00Z");
        assert_eq!(format_feed(&ts), "2021-02-04T17:20:00+00:00");
    }

    #[test]
    fn parse_normalises_offsets_and_fractions() {
        let a = parse_timestamp("2021-02-04T18:20:00.75+01:00").unwrap();
        let b = parse_timestamp("2021-02-04T17:20:00.00Z").unwrap();
        assert_eq!(a, b);
        assert_eq!(parse_timestamp("2021-02-04T17:20:00").unwrap(), b);
        assert!(parse_timestamp("04/02/2021").is_err());
    }

    #[test]
    fn epoch_conversion() {
        let ts = from_epoch_seconds(1612457454).unwrap();
        assert_eq!(format_wire(&ts), "2021-02-04T16:50:54.00Z");
    }

    #[test]
    fn manual_clock_only_moves_when_told() {
        let start = parse_timestamp("2021-02-04T00:00:00Z").unwrap();
        let clock = SimClock::manual(start);
        assert_eq!(clock.now(), start);
        clock.advance(chrono::Duration::seconds(90));
        assert_eq!(seconds_between(&start, &clock.now()), 90);
    }

    #[test]
    fn scaled_clock_runs_fast() {
        let start = parse_timestamp("2021-02-04T00:00:00Z").unwrap();
        let clock = SimClock::scaled(start, 3600.0);
        std::thread::sleep(Duration::from_millis(50));
        let elapsed = seconds_between(&start, &clock.now());
        assert!(elapsed >= 150, "elapsed {elapsed}");
        let target = start + chrono::Duration::hours(2);
        assert!(clock.wall_until(&target) <= Duration::from_secs(2));
    }
}

//! Scenario scripts drive the simulator: which flights exist, when their
//! milestones happen and how the aircraft fly between airports.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::geo::{LatLon, Track, METRES_PER_NM};
use crate::model::Milestone;
use crate::time::Timestamp;

pub const DEFAULT_SPEED_KN: f64 = 250.0;
pub const DEFAULT_CRUISE_FT: f64 = 20_000.0;
pub const DEFAULT_CLIMB_FPM: f64 = 2_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "A")]
    Arrival,
    #[serde(rename = "D")]
    Departure,
}

impl Direction {
    pub fn code(self) -> &'static str {
        match self {
            Direction::Arrival => "A",
            Direction::Departure => "D",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AirportInfo {
    #[serde(rename = "IATA")]
    pub iata: String,
    #[serde(rename = "ICAO")]
    pub icao: String,
    #[serde(rename = "Name")]
    pub name: String,
    #[serde(rename = "City", default)]
    pub city: String,
    #[serde(rename = "Latitude")]
    pub latitude: f64,
    #[serde(rename = "Longitude")]
    pub longitude: f64,
}

impl AirportInfo {
    pub fn position(&self) -> LatLon {
        LatLon::new(self.latitude, self.longitude)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AirlineInfo {
    #[serde(rename = "IATA")]
    pub iata: String,
    #[serde(rename = "ICAO")]
    pub icao: String,
    #[serde(rename = "Name")]
    pub name: String,
    #[serde(rename = "Callsign", default)]
    pub callsign: String,
    #[serde(rename = "Country", default)]
    pub country: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrackParams {
    /// Intermediate points between the two airports, as `[lat, lon]`.
    #[serde(default)]
    pub waypoints: Vec<[f64; 2]>,
    /// Ground speed ceiling in knots. Used as the cruise speed when only one
    /// end of the airborne window is scripted.
    #[serde(default)]
    pub speed_kn: Option<f64>,
    #[serde(default = "default_cruise")]
    pub cruise_altitude_ft: f64,
    #[serde(default = "default_climb")]
    pub climb_rate_fpm: f64,
}

fn default_cruise() -> f64 {
    DEFAULT_CRUISE_FT
}

fn default_climb() -> f64 {
    DEFAULT_CLIMB_FPM
}

impl Default for TrackParams {
    fn default() -> Self {
        Self {
            waypoints: Vec::new(),
            speed_kn: None,
            cruise_altitude_ft: DEFAULT_CRUISE_FT,
            climb_rate_fpm: DEFAULT_CLIMB_FPM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScriptFlight {
    /// Schedule record id. Defaults to the 1-based position in the script.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    pub flight_number: String,
    #[serde(rename = "airlineIATA")]
    pub airline_iata: String,
    pub direction: Direction,
    #[serde(rename = "otherAirportIATA")]
    pub other_airport_iata: String,
    #[serde(rename = "otherAirportICAO", default, skip_serializing_if = "Option::is_none")]
    pub other_airport_icao: Option<String>,
    pub registration: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adshex: Option<String>,
    #[serde(default)]
    pub stand_code: String,
    #[serde(default)]
    pub gate_code: String,
    /// SIBT for arrivals, SOBT for departures.
    pub scheduled: Timestamp,
    /// Seconds from `scheduled` at which each milestone happens. Arrivals may
    /// also script the origin AOBT/ATOT, departures the destination ALDT/AIBT.
    #[serde(default)]
    pub milestones: BTreeMap<String, i64>,
    #[serde(default)]
    pub track: TrackParams,
}

impl ScriptFlight {
    pub fn designator(&self) -> String {
        format!("{}{}", self.airline_iata, self.flight_number)
    }

    pub fn hex(&self) -> String {
        self.adshex
            .clone()
            .unwrap_or_else(|| self.registration.replace('-', ""))
    }

    pub fn milestone_time(&self, m: Milestone) -> Option<Timestamp> {
        self.milestones
            .get(m.code())
            .map(|secs| self.scheduled + chrono::Duration::seconds(*secs))
    }

    /// Milestones the schedule feed reports for this flight. The others
    /// happen at the far airport.
    pub fn local_milestones(&self) -> &'static [Milestone] {
        match self.direction {
            Direction::Arrival => &[Milestone::Aldt, Milestone::Aibt],
            Direction::Departure => &[Milestone::Aobt, Milestone::Atot, Milestone::Tobt],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioScript {
    #[serde(default)]
    pub seed: u64,
    #[serde(rename = "airportIATA", default = "default_airport")]
    pub airport_iata: String,
    /// Simulated time at which the scenario begins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Timestamp>,
    #[serde(default)]
    pub airports: Vec<AirportInfo>,
    #[serde(default)]
    pub airlines: Vec<AirlineInfo>,
    #[serde(default)]
    pub flights: Vec<ScriptFlight>,
}

fn default_airport() -> String {
    "ABZ".into()
}

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("cannot read scenario {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("scenario is not valid JSON: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("invalid scenario: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

/// The time span during which a flight is in the air, with its path.
#[derive(Debug, Clone)]
pub struct Airborne {
    pub start: Timestamp,
    pub end: Timestamp,
    pub track: Track,
    /// Constant ground speed over the window, knots.
    pub speed_kn: f64,
    pub cruise_ft: f64,
    pub ramp_secs: f64,
}

impl Default for ScenarioScript {
    fn default() -> Self {
        Self {
            seed: 0,
            airport_iata: default_airport(),
            start: None,
            airports: Vec::new(),
            airlines: Vec::new(),
            flights: Vec::new(),
        }
    }
}

impl ScenarioScript {
    pub fn from_json(text: &str) -> Result<Self, ScriptError> {
        let script: Self = serde_json::from_str(text)?;
        script.validate()?;
        Ok(script)
    }

    pub fn load(path: &Path) -> Result<Self, ScriptError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScriptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("script serializes")
    }

    pub fn airport(&self, iata: &str) -> Option<&AirportInfo> {
        self.airports.iter().find(|a| a.iata == iata)
    }

    pub fn flight_id(&self, index: usize) -> u64 {
        self.flights[index].id.unwrap_or(index as u64 + 1)
    }

    /// Earliest scripted instant: the explicit start or the first milestone.
    pub fn start_time(&self) -> Option<Timestamp> {
        self.start.or_else(|| {
            self.flights
                .iter()
                .flat_map(|f| {
                    std::iter::once(f.scheduled).chain(Milestone::ALL.iter().filter_map(|m| f.milestone_time(*m)))
                })
                .min()
        })
    }

    /// Latest scripted instant, including every airborne window.
    pub fn end_time(&self) -> Option<Timestamp> {
        (0..self.flights.len())
            .flat_map(|i| {
                let f = &self.flights[i];
                let airborne = self.airborne(i).map(|a| a.end);
                std::iter::once(f.scheduled)
                    .chain(Milestone::ALL.iter().filter_map(|m| f.milestone_time(*m)))
                    .chain(airborne)
                    .collect::<Vec<_>>()
            })
            .max()
    }

    pub fn validate(&self) -> Result<(), ScriptError> {
        let mut errors = Vec::new();
        let mut designators = BTreeSet::new();
        let mut ids = BTreeSet::new();
        if !self.flights.is_empty() && self.airport(&self.airport_iata).is_none() {
            errors.push(format!("home airport {} is not listed", self.airport_iata));
        }
        for (i, f) in self.flights.iter().enumerate() {
            let label = format!("flight {} ({})", i + 1, f.designator());
            let id = self.flight_id(i);
            if id == 0 || !ids.insert(id) {
                errors.push(format!("{label}: id {id} is zero or repeated"));
            }
            if f.flight_number.is_empty() || !f.flight_number.chars().all(|c| c.is_ascii_digit()) {
                errors.push(format!("{label}: flight number must be digits"));
            }
            if !designators.insert((f.designator(), f.scheduled.date_naive())) {
                errors.push(format!("{label}: flight number repeated on the same day"));
            }
            if self.airport(&f.other_airport_iata).is_none() {
                errors.push(format!("{label}: airport {} is not listed", f.other_airport_iata));
            }
            for code in f.milestones.keys() {
                if !matches!(code.as_str(), "AOBT" | "ATOT" | "ALDT" | "AIBT" | "TOBT") {
                    errors.push(format!("{label}: unsupported milestone {code}"));
                }
            }
            let chain: Vec<_> = Milestone::ACTUAL_CHAIN
                .iter()
                .filter_map(|m| f.milestone_time(*m).map(|t| (*m, t)))
                .collect();
            for w in chain.windows(2) {
                if w[0].1 > w[1].1 {
                    errors.push(format!("{label}: {} after {}", w[0].0, w[1].0));
                }
            }
            if errors.is_empty() {
                if let Some(a) = self.airborne(i) {
                    if let Some(max) = f.track.speed_kn {
                        if a.speed_kn > max + 1e-9 {
                            errors.push(format!(
                                "{label}: scripted times need {:.0} kn, above the {max} kn limit",
                                a.speed_kn
                            ));
                        }
                    }
                }
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ScriptError::Invalid(errors))
        }
    }

    /// The airborne window of flight `index`, or `None` when the script does
    /// not pin either end of it.
    pub fn airborne(&self, index: usize) -> Option<Airborne> {
        let f = &self.flights[index];
        let home = self.airport(&self.airport_iata)?.position();
        let other = self.airport(&f.other_airport_iata)?.position();
        let mut points = vec![];
        let via = f.track.waypoints.iter().map(|p| LatLon::new(p[0], p[1]));
        match f.direction {
            Direction::Arrival => {
                points.push(other);
                points.extend(via);
                points.push(home);
            }
            Direction::Departure => {
                points.push(home);
                points.extend(via);
                points.push(other);
            }
        }
        let track = Track::new(points);
        let length_nm = track.length_m() / METRES_PER_NM;
        let cruise_speed = f.track.speed_kn.unwrap_or(DEFAULT_SPEED_KN);
        let flight_secs = (length_nm / cruise_speed * 3600.0).ceil() as i64;
        let (start, end) = match (f.milestone_time(Milestone::Atot), f.milestone_time(Milestone::Aldt)) {
            (Some(s), Some(e)) => (s, e),
            (Some(s), None) => (s, s + chrono::Duration::seconds(flight_secs)),
            (None, Some(e)) => (e - chrono::Duration::seconds(flight_secs), e),
            (None, None) => return None,
        };
        let secs = (end - start).num_seconds();
        if secs <= 0 {
            return None;
        }
        let cruise_ft = f.track.cruise_altitude_ft.max(0.0);
        let climb = f.track.climb_rate_fpm.max(1.0);
        let ramp_secs = (cruise_ft / climb * 60.0).min(secs as f64 / 3.0);
        Some(Airborne {
            start,
            end,
            speed_kn: length_nm / (secs as f64 / 3600.0),
            track,
            cruise_ft,
            ramp_secs,
        })
    }
}

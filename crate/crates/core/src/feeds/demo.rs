//! Seeded generator for the bundled demo scenario: each aircraft flies in,
//! turns around on its own stand and flies out again.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::geo::{Track, METRES_PER_NM};
use super::script::{AirlineInfo, AirportInfo, Direction, ScenarioScript, ScriptFlight, TrackParams};
use crate::time::{parse_timestamp, Timestamp};

pub const DEMO_START: &str = "2021-02-04T06:00:00Z";
pub const DEMO_SPAN_SECS: i64 = 2 * 3600;

#[derive(Debug, Clone)]
pub struct DemoSettings {
    pub seed: u64,
    pub aircraft: usize,
    pub start: Timestamp,
}

impl Default for DemoSettings {
    fn default() -> Self {
        Self {
            seed: 42,
            aircraft: 10,
            start: parse_timestamp(DEMO_START).expect("demo start"),
        }
    }
}

fn airport(iata: &str, icao: &str, name: &str, lat: f64, lon: f64) -> AirportInfo {
    AirportInfo {
        iata: iata.into(),
        icao: icao.into(),
        name: format!("{name} Airport"),
        city: name.into(),
        latitude: lat,
        longitude: lon,
    }
}

pub fn demo_airports() -> Vec<AirportInfo> {
    vec![
        airport("ABZ", "EGPD", "Aberdeen", 57.2019, -2.1978),
        airport("SVG", "ENZV", "Stavanger", 58.8767, 5.6378),
        airport("BGO", "ENBR", "Bergen", 60.2934, 5.2181),
        airport("OSL", "ENGM", "Oslo", 60.1939, 11.1004),
        airport("LHR", "EGLL", "London", 51.4700, -0.4543),
        airport("AMS", "EHAM", "Amsterdam", 52.3105, 4.7683),
        airport("CPH", "EKCH", "Copenhagen", 55.6180, 12.6508),
        airport("KOI", "EGPA", "Kirkwall", 58.9578, -2.9050),
        airport("LSI", "EGPB", "Sumburgh", 59.8789, -1.2956),
        airport("MAN", "EGCC", "Manchester", 53.3537, -2.2750),
        airport("INV", "EGPE", "Inverness", 57.5425, -4.0475),
        airport("EDI", "EGPH", "Edinburgh", 55.9500, -3.3725),
        airport("GLA", "EGPF", "Glasgow", 55.8719, -4.4331),
        airport("WIC", "EGPC", "Wick", 58.4589, -3.0931),
    ]
}

fn airline(iata: &str, icao: &str, name: &str, callsign: &str, country: &str) -> AirlineInfo {
    AirlineInfo {
        iata: iata.into(),
        icao: icao.into(),
        name: name.into(),
        callsign: callsign.into(),
        country: country.into(),
    }
}

pub fn demo_airlines() -> Vec<AirlineInfo> {
    vec![
        airline("SK", "SAS", "Scandinavian Airlines", "SCANDINAVIAN", "Sweden"),
        airline("KL", "KLM", "KLM Royal Dutch Airlines", "KLM", "Netherlands"),
        airline("BA", "BAW", "British Airways", "SPEEDBIRD", "United Kingdom"),
        airline("LM", "LOG", "Loganair", "LOGAN", "United Kingdom"),
        airline("WF", "WIF", "Wideroe", "WIDEROE", "Norway"),
    ]
}

fn registration(rng: &mut ChaCha8Rng, prefix: &str) -> String {
    let tail: String = (0..4).map(|_| rng.gen_range(b'A'..=b'Z') as char).collect();
    format!("{prefix}-{tail}")
}

fn prefix_for(airline: &str) -> &'static str {
    match airline {
        "SK" | "WF" => "LN",
        "KL" => "PH",
        _ => "G",
    }
}

/// Builds a valid scenario: two flights per aircraft within about two hours.
pub fn generate_demo(settings: &DemoSettings) -> ScenarioScript {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let airports = demo_airports();
    let airlines = demo_airlines();
    let mut flights = Vec::new();
    let mut used_numbers = BTreeSet::new();
    let mut used_regs = BTreeSet::new();

    for k in 0..settings.aircraft {
        let carrier = airlines.choose(&mut rng).expect("airlines").iata.clone();
        let reg = loop {
            let r = registration(&mut rng, prefix_for(&carrier));
            if used_regs.insert(r.clone()) {
                break r;
            }
        };
        let hex = format!("{:06X}", rng.gen_range(0x400000u32..0x4FFFFF));
        let mut number = || loop {
            let n = rng.gen_range(100u32..9999).to_string();
            if used_numbers.insert((carrier.clone(), n.clone())) {
                break n;
            }
        };
        let (inbound_no, outbound_no) = (number(), number());
        let others: Vec<&AirportInfo> = airports.iter().filter(|a| a.iata != "ABZ").collect();
        let from = others.choose(&mut rng).expect("airports").iata.clone();
        let stand = format!("{:02}", k + 1);
        let gate = format!("{:02}", rng.gen_range(1..=12));
        let speed = f64::from(rng.gen_range(280u32..=340));
        let track = TrackParams {
            speed_kn: Some(speed),
            ..TrackParams::default()
        };

        let sibt = settings.start + chrono::Duration::minutes(rng.gen_range(5..=20));
        let aibt = rng.gen_range(-300i64..=600);
        let aldt = aibt - rng.gen_range(180i64..=480);
        let gap = 60 * rng.gen_range(35i64..=45);
        let sobt = sibt + chrono::Duration::seconds(gap);
        let tobt = rng.gen_range(-120i64..=300);
        let earliest = aibt - gap + 25 * 60;
        let aobt = tobt.max(earliest) + rng.gen_range(0i64..=60);
        let atot = aobt + rng.gen_range(240i64..=480);

        // Outbound legs must land inside the demo window.
        let left = (settings.start + chrono::Duration::seconds(DEMO_SPAN_SECS)
            - (sobt + chrono::Duration::seconds(atot)))
        .num_seconds() as f64;
        let home = airports.iter().find(|a| a.iata == "ABZ").expect("home").position();
        let airtime =
            |a: &AirportInfo| Track::new(vec![home, a.position()]).length_m() / METRES_PER_NM / speed * 3600.0;
        let reachable: Vec<&&AirportInfo> = others.iter().filter(|a| airtime(a).ceil() <= left).collect();
        let to = match reachable.choose(&mut rng) {
            Some(a) => a.iata.clone(),
            None => others
                .iter()
                .min_by(|a, b| airtime(a).total_cmp(&airtime(b)))
                .expect("airports")
                .iata
                .clone(),
        };

        flights.push(ScriptFlight {
            id: Some(2 * k as u64 + 1),
            flight_number: inbound_no,
            airline_iata: carrier.clone(),
            direction: Direction::Arrival,
            other_airport_iata: from,
            other_airport_icao: None,
            registration: reg.clone(),
            adshex: Some(hex.clone()),
            stand_code: stand.clone(),
            gate_code: gate.clone(),
            scheduled: sibt,
            milestones: [("ALDT".to_string(), aldt), ("AIBT".to_string(), aibt)].into(),
            track: track.clone(),
        });
        flights.push(ScriptFlight {
            id: Some(2 * k as u64 + 2),
            flight_number: outbound_no,
            airline_iata: carrier,
            direction: Direction::Departure,
            other_airport_iata: to,
            other_airport_icao: None,
            registration: reg,
            adshex: Some(hex),
            stand_code: stand,
            gate_code: gate,
            scheduled: sobt,
            milestones: [
                ("TOBT".to_string(), tobt),
                ("AOBT".to_string(), aobt),
                ("ATOT".to_string(), atot),
            ]
            .into(),
            track,
        });
    }

    ScenarioScript {
        seed: settings.seed,
        airport_iata: "ABZ".into(),
        start: Some(settings.start),
        airports,
        airlines,
        flights,
    }
}

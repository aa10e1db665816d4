//! Reference documents for the two feeds and their expected entity forms.
//!
//! `FLIGHT_DOCUMENT` and `AIRCRAFT_DOCUMENT` are kept verbatim. The `expected_*` helpers
//! apply the known corrections to them (see each function).

pub const SCHEDULE_SAMPLE: &str = include_str!("../fixtures/chroma-schedule.json");
pub const FLIGHT_DOCUMENT: &str = include_str!("../fixtures/flight-document.json");
pub const POSITION_FRAME: &str = include_str!("../fixtures/position-frame.json");
pub const AIRCRAFT_DOCUMENT: &str = include_str!("../fixtures/aircraft-document.json");

/// The flight document with its airport relationships typed as `Airport` instead of
/// `Airline` (`urn:ngsi-ld:Airline:airport-SVG` is not a valid URN).
pub fn expected_flight_document() -> String {
    FLIGHT_DOCUMENT.replace("urn:ngsi-ld:Airline:airport-", "urn:ngsi-ld:Airport:airport-")
}

/// The aircraft document made consistent with its position frame: the id uses the
/// de-hyphenated registration `AAAAAA` and `flightNumberIATA` is the feed's
/// `SK1234`.
pub fn expected_aircraft_document() -> String {
    AIRCRAFT_DOCUMENT
        .replace("aircraft-AAAAA\"", "aircraft-AAAAAA\"")
        .replace("\"SK4615\"", "\"SK1234\"")
}

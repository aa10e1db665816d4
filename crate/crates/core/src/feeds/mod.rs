//! Feed adapters and the deterministic feed simulator.

pub mod adapters;
pub mod demo;
pub mod framing;
pub mod geo;
pub mod positions;
pub mod schedule;
pub mod script;
pub mod simulator;

pub use demo::{generate_demo, DemoSettings};
pub use positions::{aircraft_position, frames_between, position_frame};
pub use schedule::{serve_schedule, serve_schedule_with};
pub use script::{Direction, ScenarioScript, ScriptError, ScriptFlight};
pub use simulator::Simulator;

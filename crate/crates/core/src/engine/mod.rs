//! Turnaround engine: derived A-CDM times, delay status, the flight state
//! machine and per-turnaround task plans.

pub mod derive;
pub mod milestones;
pub mod service;
pub mod tasks;

use crate::model::{Milestone, TaskStatus};
use crate::time::{format_wire, Timestamp};

pub use derive::{
    classify_delay, compute_block_times, compute_taxi_times, leg_at, link_turnaround, BlockTimes, Classification,
    DelayStatus, TaxiTimes, TurnaroundLink, DEFAULT_DELAY_THRESHOLD_SECS,
};
pub use milestones::{apply_milestone, refresh_derived, Transition};
pub use service::{Engine, EngineSettings};
pub use tasks::{default_template, manage_task, TaskPlan, TaskTemplate};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("{what} would be negative ({seconds} s)")]
    NegativeDuration { what: String, seconds: i64 },
    #[error("cannot link turnaround: {0}")]
    LinkRejected(String),
    #[error("ordering violation: {milestone} conflicts with {conflicting}")]
    Ordering {
        milestone: Milestone,
        conflicting: Milestone,
    },
    #[error("{milestone} is already recorded as {}", format_wire(.existing))]
    ImmutableActual { milestone: Milestone, existing: Timestamp },
    #[error("{milestone} can no longer change once {actual} is known")]
    Settled { milestone: Milestone, actual: Milestone },
    #[error("{0} is not a live milestone")]
    NotLive(Milestone),
    #[error("invalid task plan: {0}")]
    InvalidPlan(String),
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("task {task} cannot go from {from} to {to}")]
    IllegalTransition {
        task: String,
        from: TaskStatus,
        to: TaskStatus,
    },
    #[error("task {task} is blocked by {blocking}")]
    Blocked { task: String, blocking: String },
}

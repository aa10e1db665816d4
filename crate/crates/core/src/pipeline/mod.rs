//! Record-oriented dataflow: sources feed ordered processor stages joined by
//! bounded queues, ending in a sink.

pub mod capture;
pub mod config;
pub mod jsonpath;
pub mod predicate;
pub mod processors;
pub mod record;
pub mod runner;
pub mod transform;

pub use config::{ConfigError, PipelineConfig, SinkSpec, SourceSpec, StageSpec};
pub use jsonpath::JsonPath;
pub use predicate::Predicate;
pub use processors::{Outcome, Processor, UpdateRule};
pub use record::{FlowRecord, Provenance};
pub use runner::{
    start_pipeline, DeadLetter, PipelineHandle, PipelineInput, RunContext, SettleHook, SourceEvent, StageStats,
};
pub use transform::{TransformSpec, Unit, UnitConversion};

pub mod broker;
pub mod cli;
pub mod engine;
pub mod feeds;
pub mod fixtures;
pub mod history;
pub mod live;
pub mod model;
pub mod net;
pub mod pipeline;
pub mod runtime;
pub mod time;

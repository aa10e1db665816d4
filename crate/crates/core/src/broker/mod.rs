//! The context broker: current entity state, queries and push
//! notifications to subscribers.

pub mod client;
pub mod http;
mod notifier;
pub mod query;
mod store;
pub mod subscription;

pub use client::{BrokerClient, ClientError};
pub use notifier::RetryPolicy;
pub use query::{parse_q, AttrFilter, Comparator, TimeRel, TimeWindow};
pub use store::{Broker, BrokerError, BrokerMetrics, UpsertOutcome};
pub use subscription::{EntitySelector, NotificationPayload, SubscriptionRequest};

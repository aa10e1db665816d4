//! Append-only record of every context change, queryable by time range.

pub mod http;
pub mod store;

pub use http::router;
pub use store::{replay_events, Appended, HistoryError, HistoryEvent, HistoryStore};

use crate::broker::{BrokerClient, ClientError, SubscriptionRequest};
use crate::model::records::{AIRCRAFT, AIRCRAFT_MODEL, AIRLINE, AIRPORT, FLIGHT, FLIGHT_NOTIFICATION};

/// Every entity type the twin stores.
pub const RECORDED_TYPES: [&str; 6] = [FLIGHT, AIRCRAFT, AIRCRAFT_MODEL, AIRLINE, AIRPORT, FLIGHT_NOTIFICATION];

/// Subscribes `callback` to changes of every recorded type.
pub async fn subscribe(client: &BrokerClient, callback: &str) -> Result<String, ClientError> {
    client
        .subscribe(&SubscriptionRequest::new(&RECORDED_TYPES, &[], callback))
        .await
}

//! Live change feed for the dispatcher's browsers. Broker notifications for
//! flights and tasks are relayed as server-sent events; every event carries a
//! sequence number and each stream opens with a full snapshot.

use std::collections::BTreeMap;
use std::convert::Infallible;
use std::sync::{Arc, Mutex};

use axum::extract::{Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::{broadcast, mpsc};
use tokio_stream::wrappers::ReceiverStream;
use tokio_stream::StreamExt;

use crate::broker::{BrokerClient, ClientError, NotificationPayload, SubscriptionRequest};
use crate::model::records::{FLIGHT, FLIGHT_NOTIFICATION};
use crate::model::{parse_entity, ContextEntity, EntityId};

pub const LIVE_TYPES: [&str; 2] = [FLIGHT, FLIGHT_NOTIFICATION];
pub const DEFAULT_BUFFER: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveEvent {
    pub seq: u64,
    pub entity: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveSnapshot {
    pub seq: u64,
    pub entities: Vec<Value>,
}

struct Current {
    seq: u64,
    entities: BTreeMap<EntityId, ContextEntity>,
}

pub struct LiveHub {
    current: Mutex<Current>,
    tx: broadcast::Sender<LiveEvent>,
    token: Option<String>,
}

impl LiveHub {
    pub fn new(buffer: usize, token: Option<String>) -> Arc<Self> {
        let (tx, _) = broadcast::channel(buffer.max(1));
        Arc::new(Self {
            current: Mutex::new(Current {
                seq: 0,
                entities: BTreeMap::new(),
            }),
            tx,
            token,
        })
    }

    /// Records a new entity state. Returns its sequence number, or `None`
    /// when the type is not relayed or nothing changed.
    pub fn ingest(&self, entity: ContextEntity) -> Option<u64> {
        if !LIVE_TYPES.contains(&entity.entity_type.as_str()) {
            return None;
        }
        let mut cur = self.current.lock().expect("live state");
        if cur.entities.get(&entity.id) == Some(&entity) {
            return None;
        }
        cur.seq += 1;
        let event = LiveEvent {
            seq: cur.seq,
            entity: entity.to_json(),
        };
        cur.entities.insert(entity.id.clone(), entity);
        let _ = self.tx.send(event);
        Some(cur.seq)
    }

    pub fn snapshot(&self) -> LiveSnapshot {
        let cur = self.current.lock().expect("live state");
        snapshot_of(&cur)
    }

    /// A receiver that sees every event after the returned snapshot.
    pub fn listen(&self) -> (LiveSnapshot, broadcast::Receiver<LiveEvent>) {
        let cur = self.current.lock().expect("live state");
        (snapshot_of(&cur), self.tx.subscribe())
    }

    pub fn sessions(&self) -> usize {
        self.tx.receiver_count()
    }

    pub async fn sync(&self, client: &BrokerClient) -> Result<(), ClientError> {
        for t in LIVE_TYPES {
            for e in client.query(t, &[], None).await? {
                self.ingest(e);
            }
        }
        Ok(())
    }

    pub async fn subscribe(&self, client: &BrokerClient, callback: &str) -> Result<String, ClientError> {
        client
            .subscribe(&SubscriptionRequest::new(&LIVE_TYPES, &[], callback))
            .await
    }

    fn authorized(&self, headers: &HeaderMap, params: &BTreeMap<String, String>) -> bool {
        let Some(token) = &self.token else {
            return true;
        };
        let header = headers
            .get("authorization")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        header == Some(token.as_str()) || params.get("token") == Some(token)
    }
}

fn snapshot_of(cur: &Current) -> LiveSnapshot {
    LiveSnapshot {
        seq: cur.seq,
        entities: cur.entities.values().map(|e| e.to_json()).collect(),
    }
}

fn sync_event(s: &LiveSnapshot) -> Event {
    Event::default()
        .event("sync")
        .id(s.seq.to_string())
        .data(serde_json::to_string(s).expect("snapshot serializes"))
}

fn entity_event(e: &LiveEvent) -> Event {
    Event::default()
        .event("entity")
        .id(e.seq.to_string())
        .data(serde_json::to_string(e).expect("event serializes"))
}

fn unauthorized() -> Response {
    (
        StatusCode::UNAUTHORIZED,
        Json(json!({"title": "Unauthorized", "detail": "missing or wrong session token"})),
    )
        .into_response()
}

async fn notify(State(hub): State<Arc<LiveHub>>, Json(payload): Json<NotificationPayload>) -> StatusCode {
    for doc in &payload.data {
        match parse_entity(doc) {
            Ok(e) => {
                hub.ingest(e);
            }
            Err(e) => tracing::warn!(error = %e, "unreadable notification entity"),
        }
    }
    StatusCode::NO_CONTENT
}

async fn snapshot(
    State(hub): State<Arc<LiveHub>>,
    headers: HeaderMap,
    Query(params): Query<BTreeMap<String, String>>,
) -> Response {
    if !hub.authorized(&headers, &params) {
        return unauthorized();
    }
    Json(hub.snapshot()).into_response()
}

/// Opens with a `sync` snapshot unless `Last-Event-ID` shows the client is
/// current. A lagging session gets a fresh `sync` instead of the lost events.
async fn events(
    State(hub): State<Arc<LiveHub>>,
    headers: HeaderMap,
    Query(params): Query<BTreeMap<String, String>>,
) -> Response {
    if !hub.authorized(&headers, &params) {
        return unauthorized();
    }
    let last_seen: Option<u64> = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse().ok());
    let (snap, mut rx) = hub.listen();
    let (out, stream) = mpsc::channel::<Event>(64);
    tokio::spawn(async move {
        let mut floor = snap.seq;
        if last_seen != Some(snap.seq) && out.send(sync_event(&snap)).await.is_err() {
            return;
        }
        loop {
            let next = tokio::select! {
                _ = out.closed() => return,
                next = rx.recv() => next,
            };
            let event = match next {
                Ok(e) if e.seq <= floor => continue,
                Ok(e) => {
                    floor = e.seq;
                    entity_event(&e)
                }
                Err(broadcast::error::RecvError::Lagged(_)) => {
                    let s = hub.snapshot();
                    floor = s.seq;
                    sync_event(&s)
                }
                Err(broadcast::error::RecvError::Closed) => return,
            };
            if out.send(event).await.is_err() {
                return;
            }
        }
    });
    Sse::new(ReceiverStream::new(stream).map(Ok::<_, Infallible>))
        .keep_alive(KeepAlive::default())
        .into_response()
}

pub fn router(hub: Arc<LiveHub>) -> Router {
    Router::new()
        .route("/live/notify", post(notify))
        .route("/live/snapshot", get(snapshot))
        .route("/live/events", get(events))
        .with_state(hub)
}

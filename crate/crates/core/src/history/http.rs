use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;

use super::store::{HistoryError, HistoryStore};
use crate::broker::NotificationPayload;
use crate::model::{parse_entity, EntityId};
use crate::time::parse_timestamp;

fn problem(status: StatusCode, title: &str, detail: String) -> Response {
    (status, Json(json!({"title": title, "detail": detail}))).into_response()
}

/// Stores each delivered snapshot before acknowledging, so the broker
/// retries anything that failed to persist.
async fn notify(State(store): State<Arc<HistoryStore>>, Json(payload): Json<NotificationPayload>) -> Response {
    let recorded_at = match parse_timestamp(&payload.notified_at) {
        Ok(t) => t,
        Err(e) => return problem(StatusCode::BAD_REQUEST, "BadRequest", e.to_string()),
    };
    let many = payload.data.len() > 1;
    for (i, doc) in payload.data.iter().enumerate() {
        let entity = match parse_entity(doc) {
            Ok(e) => e,
            Err(e) => return problem(StatusCode::BAD_REQUEST, "BadRequest", e.to_string()),
        };
        let key = if many {
            format!("{}#{i}", payload.id)
        } else {
            payload.id.clone()
        };
        if let Err(e) = store.append(entity, recorded_at, Some(&key)) {
            let status = if e.is_retriable() {
                StatusCode::SERVICE_UNAVAILABLE
            } else {
                StatusCode::INTERNAL_SERVER_ERROR
            };
            return problem(status, "StorageFailure", e.to_string());
        }
    }
    StatusCode::NO_CONTENT.into_response()
}

async fn history(
    State(store): State<Arc<HistoryStore>>,
    Path(id): Path<String>,
    Query(params): Query<BTreeMap<String, String>>,
) -> Response {
    let id: EntityId = match id.parse() {
        Ok(id) => id,
        Err(e) => return problem(StatusCode::BAD_REQUEST, "BadRequest", format!("{e}")),
    };
    let bound = |name: &str| match params.get(name) {
        Some(raw) => parse_timestamp(raw).map(Some),
        None => Ok(None),
    };
    let (from, to) = match (bound("from"), bound("to")) {
        (Ok(f), Ok(t)) => (f, t),
        (Err(e), _) | (_, Err(e)) => return problem(StatusCode::BAD_REQUEST, "BadRequest", e.to_string()),
    };
    match store.query(&id, from, to) {
        Ok(events) => Json(events).into_response(),
        Err(e @ HistoryError::Range { .. }) => problem(StatusCode::BAD_REQUEST, "BadRequest", e.to_string()),
        Err(e) => problem(StatusCode::INTERNAL_SERVER_ERROR, "StorageFailure", e.to_string()),
    }
}

async fn status(State(store): State<Arc<HistoryStore>>) -> Response {
    match store.log_checksum() {
        Ok(sum) => Json(json!({
            "events": store.len(),
            "entities": store.entity_ids().len(),
            "checksum": sum,
        }))
        .into_response(),
        Err(e) => problem(StatusCode::INTERNAL_SERVER_ERROR, "StorageFailure", e.to_string()),
    }
}

pub fn router(store: Arc<HistoryStore>) -> Router {
    Router::new()
        .route("/notify", post(notify))
        .route("/history/{id}", get(history))
        .route("/status", get(status))
        .with_state(store)
}

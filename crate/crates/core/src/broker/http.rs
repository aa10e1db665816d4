use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde_json::{json, Value};

use super::query::{parse_q, TimeWindow};
use super::store::{Broker, BrokerError, UpsertOutcome};
use super::subscription::SubscriptionRequest;
use crate::model::{parse_entity, EntityId};

fn error(status: StatusCode, title: &str, detail: impl Into<Value>) -> Response {
    (status, Json(json!({"title": title, "detail": detail.into()}))).into_response()
}

impl IntoResponse for BrokerError {
    fn into_response(self) -> Response {
        match self {
            BrokerError::NotFound(what) => error(StatusCode::NOT_FOUND, "ResourceNotFound", what),
            BrokerError::Invalid(report) => error(
                StatusCode::BAD_REQUEST,
                "InvalidEntity",
                serde_json::to_value(report).unwrap_or_default(),
            ),
            BrokerError::BadRequest(msg) => error(StatusCode::BAD_REQUEST, "BadRequestData", msg),
        }
    }
}

fn parse_id(raw: &str) -> Result<EntityId, Response> {
    raw.parse::<EntityId>()
        .map_err(|e| error(StatusCode::BAD_REQUEST, "BadRequestData", e.to_string()))
}

async fn post_entity(State(b): State<Arc<Broker>>, body: Json<Value>) -> Response {
    let entity = match parse_entity(&body) {
        Ok(e) => e,
        Err(e) => return error(StatusCode::BAD_REQUEST, "BadRequestData", e.to_string()),
    };
    match b.upsert(&entity) {
        Ok(UpsertOutcome::Created) => (
            StatusCode::CREATED,
            [(header::LOCATION, format!("/entities/{}", entity.id))],
        )
            .into_response(),
        Ok(UpsertOutcome::Updated) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => e.into_response(),
    }
}

async fn get_entity(State(b): State<Arc<Broker>>, Path(id): Path<String>) -> Response {
    let id = match parse_id(&id) {
        Ok(id) => id,
        Err(r) => return r,
    };
    match b.get(&id) {
        Ok(e) => Json(e.to_json()).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn delete_entity(State(b): State<Arc<Broker>>, Path(id): Path<String>) -> Response {
    let id = match parse_id(&id) {
        Ok(id) => id,
        Err(r) => return r,
    };
    match b.delete(&id) {
        Ok(()) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => e.into_response(),
    }
}

async fn list_entities(State(b): State<Arc<Broker>>, Query(params): Query<HashMap<String, String>>) -> Response {
    let Some(entity_type) = params.get("type") else {
        return error(StatusCode::BAD_REQUEST, "BadRequestData", "type is required");
    };
    let filters = match params.get("q").map(|q| parse_q(q)).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => return error(StatusCode::BAD_REQUEST, "BadRequestData", e),
    };
    let window = match params.get("timerel") {
        Some(rel) => match TimeWindow::parse(
            rel,
            params.get("timeproperty").map(String::as_str),
            params.get("timeAt").map(String::as_str),
            params.get("endTimeAt").map(String::as_str),
        ) {
            Ok(w) => Some(w),
            Err(e) => return error(StatusCode::BAD_REQUEST, "BadRequestData", e),
        },
        None => None,
    };
    let docs: Vec<Value> = b
        .query(entity_type, &filters, window.as_ref())
        .iter()
        .map(|e| e.to_json())
        .collect();
    Json(docs).into_response()
}

async fn post_subscription(State(b): State<Arc<Broker>>, body: Json<Value>) -> Response {
    let request: SubscriptionRequest = match serde_json::from_value(body.0) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, "BadRequestData", e.to_string()),
    };
    match b.subscribe(request) {
        Ok(id) => (
            StatusCode::CREATED,
            [(header::LOCATION, format!("/subscriptions/{id}"))],
            Json(json!({ "id": id })),
        )
            .into_response(),
        Err(e) => e.into_response(),
    }
}

async fn list_subscriptions(State(b): State<Arc<Broker>>) -> Response {
    Json(b.subscriptions()).into_response()
}

async fn get_subscription(State(b): State<Arc<Broker>>, Path(id): Path<String>) -> Response {
    match b.subscription(&id) {
        Ok(doc) => Json(doc).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn delete_subscription(State(b): State<Arc<Broker>>, Path(id): Path<String>) -> Response {
    match b.unsubscribe(&id) {
        Ok(()) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => e.into_response(),
    }
}

async fn status(State(b): State<Arc<Broker>>) -> Response {
    Json(b.metrics()).into_response()
}

pub fn router(broker: Arc<Broker>) -> Router {
    Router::new()
        .route("/entities", get(list_entities).post(post_entity))
        .route("/entities/{id}", get(get_entity).delete(delete_entity))
        .route("/subscriptions", get(list_subscriptions).post(post_subscription))
        .route("/subscriptions/{id}", get(get_subscription).delete(delete_subscription))
        .route("/status", get(status))
        .with_state(broker)
}

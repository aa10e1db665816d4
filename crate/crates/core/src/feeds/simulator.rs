//! HTTP and TCP endpoints serving a scenario on a shared clock.

use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde_json::json;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;
use tokio_util::sync::CancellationToken;

use super::positions::stream_positions;
use super::schedule::{serve_airlines, serve_airports, serve_schedule_with};
use super::script::ScenarioScript;
use crate::time::Clock;

pub struct Simulator {
    pub script: ScenarioScript,
    pub clock: Arc<dyn Clock>,
    /// Required as a bearer token on every REST request when set.
    pub token: Option<String>,
    pub inject_null: bool,
    pub tick: Duration,
}

impl Simulator {
    pub fn new(script: ScenarioScript, clock: Arc<dyn Clock>) -> Self {
        Self {
            script,
            clock,
            token: None,
            inject_null: true,
            tick: Duration::from_secs(10),
        }
    }

    fn authorized(&self, headers: &HeaderMap) -> bool {
        let Some(expected) = &self.token else {
            return true;
        };
        headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|t| t == expected)
    }
}

fn unauthorized() -> Response {
    (
        StatusCode::UNAUTHORIZED,
        Json(json!({"title": "Unauthorized", "detail": "missing or wrong token"})),
    )
        .into_response()
}

async fn flights(State(sim): State<Arc<Simulator>>, headers: HeaderMap) -> Response {
    if !sim.authorized(&headers) {
        return unauthorized();
    }
    Json(serve_schedule_with(&sim.script, sim.clock.now(), sim.inject_null)).into_response()
}

async fn airports(State(sim): State<Arc<Simulator>>, headers: HeaderMap) -> Response {
    if !sim.authorized(&headers) {
        return unauthorized();
    }
    Json(serve_airports(&sim.script)).into_response()
}

async fn airlines(State(sim): State<Arc<Simulator>>, headers: HeaderMap) -> Response {
    if !sim.authorized(&headers) {
        return unauthorized();
    }
    Json(serve_airlines(&sim.script)).into_response()
}

pub fn router(sim: Arc<Simulator>) -> Router {
    Router::new()
        .route("/chroma/flights", get(flights))
        .route("/chroma/airports", get(airports))
        .route("/chroma/airlines", get(airlines))
        .with_state(sim)
}

/// Accepts position-stream clients until cancelled. Each connection gets
/// frames from the simulated time at which it connected.
pub fn serve_positions(listener: TcpListener, sim: Arc<Simulator>, cancel: CancellationToken) -> JoinHandle<()> {
    tokio::spawn(async move {
        loop {
            let (socket, peer) = tokio::select! {
                _ = cancel.cancelled() => return,
                accepted = listener.accept() => match accepted {
                    Ok(conn) => conn,
                    Err(e) => {
                        tracing::warn!("position listener: {e}");
                        continue;
                    }
                },
            };
            let sim = sim.clone();
            let cancel = cancel.child_token();
            tokio::spawn(async move {
                let _ = socket.set_nodelay(true);
                let result = stream_positions(&sim.script, sim.clock.as_ref(), sim.tick, socket, &cancel).await;
                if let Err(e) = result {
                    tracing::debug!("position client {peer} left: {e}");
                }
            });
        }
    })
}

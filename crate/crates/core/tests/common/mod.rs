#![allow(dead_code)]

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use aerotwin::broker::{http, Broker, NotificationPayload, RetryPolicy};
use aerotwin::net::spawn_http;
use aerotwin::time::Clock;
use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use tokio_util::sync::CancellationToken;

/// Records every notification it accepts. With `fail_first`, the first
/// attempt of each notification id is answered with 503.
#[derive(Default)]
pub struct StubReceiver {
    pub accepted: Mutex<Vec<NotificationPayload>>,
    pub attempts: AtomicU64,
    pub fail_first: bool,
    seen: Mutex<HashMap<String, u32>>,
}

impl StubReceiver {
    pub fn count(&self) -> usize {
        self.accepted.lock().unwrap().len()
    }

    pub fn payloads(&self) -> Vec<NotificationPayload> {
        self.accepted.lock().unwrap().clone()
    }
}

async fn receive(State(stub): State<Arc<StubReceiver>>, Json(p): Json<NotificationPayload>) -> StatusCode {
    stub.attempts.fetch_add(1, Ordering::SeqCst);
    if stub.fail_first {
        let mut seen = stub.seen.lock().unwrap();
        let n = seen.entry(p.id.clone()).or_default();
        *n += 1;
        if *n == 1 {
            return StatusCode::SERVICE_UNAVAILABLE;
        }
    }
    stub.accepted.lock().unwrap().push(p);
    StatusCode::NO_CONTENT
}

pub async fn start_receiver(fail_first: bool) -> (Arc<StubReceiver>, String) {
    let stub = Arc::new(StubReceiver {
        fail_first,
        ..Default::default()
    });
    let router = Router::new().route("/notify", post(receive)).with_state(stub.clone());
    let (addr, _) = spawn_http("127.0.0.1:0", router, CancellationToken::new())
        .await
        .unwrap();
    (stub, format!("http://{addr}/notify"))
}

pub async fn start_broker(clock: Arc<dyn Clock>, policy: RetryPolicy) -> (Arc<Broker>, SocketAddr) {
    let broker = Arc::new(Broker::new(clock, policy));
    let (addr, _) = spawn_http("127.0.0.1:0", http::router(broker.clone()), CancellationToken::new())
        .await
        .unwrap();
    (broker, addr)
}

pub fn fast_retry() -> RetryPolicy {
    RetryPolicy {
        attempts: 3,
        initial_backoff_ms: 20,
        timeout_ms: 2000,
    }
}

pub fn config_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("config")
}

/// The bundled deployment with every listener on a free port and data
/// under `data`.
pub fn demo_runtime_config(data: &std::path::Path, scale: f64) -> aerotwin::runtime::RuntimeConfig {
    let text = std::fs::read_to_string(config_dir().join("aerotwin.toml")).unwrap();
    let mut c = aerotwin::runtime::RuntimeConfig::from_toml_with_env(&text, Vec::new()).unwrap();
    c.resolve_paths(&config_dir());
    c.clock.scale = scale;
    for listen in [
        &mut c.broker.listen,
        &mut c.simulator.rest_listen,
        &mut c.simulator.tcp_listen,
        &mut c.pipelines.status_listen,
        &mut c.engine.listen,
        &mut c.history.listen,
    ] {
        *listen = "127.0.0.1:0".into();
    }
    c.history.dir = data.join("history");
    c.pipelines.dead_letter_dir = Some(data.join("deadletter"));
    c
}

//! Source adapters for the two feeds. Each runs until cancelled and reports
//! records and failures as [`SourceEvent`]s.

use std::sync::Arc;
use std::time::Duration;

use tokio::net::TcpStream;
use tokio::sync::mpsc;
use tokio_util::sync::CancellationToken;

use super::framing::{decode_body, read_frame, FrameError};
use crate::pipeline::{FlowRecord, SourceEvent};
use crate::time::{sleep_until, Clock};

#[derive(Debug, Clone)]
pub struct PollSettings {
    pub url: String,
    pub interval: Duration,
    /// Sent as a bearer token when set.
    pub token: Option<String>,
    pub source: String,
}

/// Polls `settings.url` once per interval of `clock` time, starting
/// immediately. Each 2xx JSON body becomes one record; anything else is a
/// failure and the next tick is tried as usual.
pub async fn poll_rest_source(
    settings: PollSettings,
    http: reqwest::Client,
    clock: Arc<dyn Clock>,
    tx: mpsc::Sender<SourceEvent>,
    cancel: CancellationToken,
) {
    let interval =
        chrono::Duration::from_std(settings.interval.max(Duration::from_secs(1))).expect("interval in range");
    let timeout = settings.interval.clamp(Duration::from_secs(1), Duration::from_secs(10));
    let mut next = clock.now();
    let mut seq = 0u64;
    loop {
        if !sleep_until(clock.as_ref(), next, &cancel).await {
            return;
        }
        next += interval;
        let mut req = http.get(&settings.url).timeout(timeout);
        if let Some(t) = &settings.token {
            req = req.bearer_auth(t);
        }
        let event = match req.send().await {
            Ok(resp) if resp.status().is_success() => match resp.json::<serde_json::Value>().await {
                Ok(body) => {
                    seq += 1;
                    SourceEvent::Record(FlowRecord::new(&settings.source, seq, body))
                }
                Err(e) => SourceEvent::Failure(format!("unreadable body: {e}")),
            },
            Ok(resp) => SourceEvent::Failure(format!("{} answered {}", settings.url, resp.status())),
            Err(e) => SourceEvent::Failure(format!("{}: {e}", settings.url)),
        };
        tokio::select! {
            _ = cancel.cancelled() => return,
            sent = tx.send(event) => if sent.is_err() { return },
        }
    }
}

#[derive(Debug, Clone)]
pub struct TcpSettings {
    pub address: String,
    pub source: String,
}

const MIN_BACKOFF: Duration = Duration::from_millis(100);
const MAX_BACKOFF: Duration = Duration::from_secs(2);

/// Reads framed position documents, reconnecting with exponential backoff
/// whenever the connection ends or cannot be opened. Corrupt frames are
/// reported as failures and skipped.
pub async fn consume_tcp_source(settings: TcpSettings, tx: mpsc::Sender<SourceEvent>, cancel: CancellationToken) {
    let mut seq = 0u64;
    let mut backoff = MIN_BACKOFF;
    loop {
        let conn = tokio::select! {
            _ = cancel.cancelled() => return,
            c = TcpStream::connect(&settings.address) => c,
        };
        match conn {
            Ok(mut stream) => {
                backoff = MIN_BACKOFF;
                loop {
                    let frame = tokio::select! {
                        _ = cancel.cancelled() => return,
                        f = read_frame(&mut stream) => f,
                    };
                    let event = match frame {
                        Ok(Some(body)) => match decode_body(&body) {
                            Ok(doc) => {
                                seq += 1;
                                SourceEvent::Record(FlowRecord::new(&settings.source, seq, doc))
                            }
                            Err(e) => SourceEvent::Failure(e.to_string()),
                        },
                        Ok(None) => break,
                        Err(FrameError::TooLarge(n)) => {
                            // The stream position is lost; start over.
                            let _ = tx.send(SourceEvent::Failure(format!("frame of {n} bytes"))).await;
                            break;
                        }
                        Err(e) => {
                            tracing::debug!(address = %settings.address, error = %e, "position stream ended");
                            break;
                        }
                    };
                    if tx.send(event).await.is_err() {
                        return;
                    }
                }
            }
            Err(e) => {
                tracing::debug!(address = %settings.address, error = %e, "connect failed");
            }
        }
        tokio::select! {
            _ = cancel.cancelled() => return,
            _ = tokio::time::sleep(backoff) => {}
        }
        backoff = (backoff * 2).min(MAX_BACKOFF);
    }
}

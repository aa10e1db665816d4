//! Asynchronous notification delivery with retries.

use std::future::Future;
use std::pin::Pin;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tokio::sync::{mpsc, Notify};

use super::subscription::NotificationPayload;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    /// Total delivery attempts per notification, including the first.
    pub attempts: u32,
    /// Delay before the second attempt; doubles for each later one.
    pub initial_backoff_ms: u64,
    pub timeout_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            initial_backoff_ms: 500,
            timeout_ms: 5000,
        }
    }
}

impl RetryPolicy {
    pub fn backoff(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(1 << (attempt - 1).min(16)))
    }
}

#[derive(Debug, Default)]
pub(crate) struct Metrics {
    pub change_events: AtomicU64,
    pub notifications: AtomicU64,
    pub delivered: AtomicU64,
    pub failed_attempts: AtomicU64,
    pub dropped: AtomicU64,
    pub cancelled: AtomicU64,
}

impl Metrics {
    pub fn in_flight(&self) -> u64 {
        let done = self.delivered.load(Ordering::SeqCst)
            + self.dropped.load(Ordering::SeqCst)
            + self.cancelled.load(Ordering::SeqCst);
        self.notifications.load(Ordering::SeqCst).saturating_sub(done)
    }
}

#[derive(Debug, Default)]
pub(crate) struct SubState {
    pub alive: AtomicBool,
    pub delivered: AtomicU64,
}

pub(crate) struct Delivery {
    pub payload: NotificationPayload,
    pub endpoint: String,
    pub sub: Arc<SubState>,
}

#[derive(Clone)]
pub(crate) struct Notifier {
    http: reqwest::Client,
    policy: RetryPolicy,
    pub metrics: Arc<Metrics>,
    pub idle: Arc<Notify>,
}

impl Notifier {
    pub fn new(policy: RetryPolicy) -> Self {
        Self {
            http: reqwest::Client::new(),
            policy,
            metrics: Arc::new(Metrics::default()),
            idle: Arc::new(Notify::new()),
        }
    }

    /// Starts the FIFO worker of one subscription.
    pub fn spawn_worker(&self) -> mpsc::UnboundedSender<Delivery> {
        let (tx, mut rx) = mpsc::unbounded_channel::<Delivery>();
        let this = self.clone();
        tokio::spawn(async move {
            while let Some(d) = rx.recv().await {
                attempt(this.clone(), d, 1).await;
            }
        });
        tx
    }

    fn finish(&self, counter: &AtomicU64) {
        counter.fetch_add(1, Ordering::SeqCst);
        if self.metrics.in_flight() == 0 {
            self.idle.notify_waiters();
        }
    }

    async fn post(&self, d: &Delivery) -> Result<(), String> {
        let resp = self
            .http
            .post(&d.endpoint)
            .timeout(Duration::from_millis(self.policy.timeout_ms))
            .json(&d.payload)
            .send()
            .await
            .map_err(|e| e.to_string())?;
        if resp.status().is_success() {
            Ok(())
        } else {
            Err(format!("endpoint answered {}", resp.status()))
        }
    }
}

/// Tries once. A failure schedules the next attempt on its own task so the
/// subscription's queue keeps moving.
fn attempt(this: Notifier, d: Delivery, n: u32) -> Pin<Box<dyn Future<Output = ()> + Send>> {
    Box::pin(async move {
        if !d.sub.alive.load(Ordering::SeqCst) {
            this.finish(&this.metrics.cancelled);
            return;
        }
        match this.post(&d).await {
            Ok(()) => {
                d.sub.delivered.fetch_add(1, Ordering::SeqCst);
                this.finish(&this.metrics.delivered);
            }
            Err(reason) => {
                this.metrics.failed_attempts.fetch_add(1, Ordering::SeqCst);
                if n >= this.policy.attempts {
                    tracing::warn!(
                        subscription = %d.payload.subscription_id,
                        endpoint = %d.endpoint,
                        %reason,
                        "notification dropped"
                    );
                    this.finish(&this.metrics.dropped);
                    return;
                }
                tracing::debug!(endpoint = %d.endpoint, %reason, attempt = n, "notification retry scheduled");
                let delay = this.policy.backoff(n);
                tokio::spawn(async move {
                    tokio::time::sleep(delay).await;
                    attempt(this, d, n + 1).await;
                });
            }
        }
    })
}

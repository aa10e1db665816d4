use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::Ordering;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::mpsc;

use super::notifier::{Delivery, Notifier, RetryPolicy, SubState};
use super::query::{AttrFilter, TimeWindow};
use super::subscription::{NotificationPayload, Subscription, SubscriptionRequest};
use crate::model::{validate_entity, ContextEntity, EntityId, Violation};
use crate::time::{format_wire, Clock, SystemClock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UpsertOutcome {
    Created,
    Updated,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BrokerError {
    #[error("{0} not found")]
    NotFound(String),
    #[error("invalid entity: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("bad request: {0}")]
    BadRequest(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrokerMetrics {
    pub entities: usize,
    pub subscriptions: usize,
    #[serde(rename = "changeEvents")]
    pub change_events: u64,
    pub notifications: u64,
    pub delivered: u64,
    #[serde(rename = "failedAttempts")]
    pub failed_attempts: u64,
    pub dropped: u64,
    #[serde(rename = "inFlight")]
    pub in_flight: u64,
}

struct SubEntry {
    sub: Subscription,
    state: Arc<SubState>,
    tx: mpsc::UnboundedSender<Delivery>,
}

#[derive(Default)]
struct State {
    entities: BTreeMap<EntityId, ContextEntity>,
    subs: BTreeMap<String, SubEntry>,
    next_sub: u64,
    next_notification: u64,
}

/// Current-state store with subscription matching. Every operation takes a
/// single lock, so updates to one entity are serialized and notifications
/// are queued in change order.
pub struct Broker {
    state: Mutex<State>,
    clock: Arc<dyn Clock>,
    notifier: Notifier,
}

impl Default for Broker {
    fn default() -> Self {
        Self::new(Arc::new(SystemClock), RetryPolicy::default())
    }
}

impl Broker {
    pub fn new(clock: Arc<dyn Clock>, policy: RetryPolicy) -> Self {
        Self {
            state: Mutex::new(State::default()),
            clock,
            notifier: Notifier::new(policy),
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().expect("broker state")
    }

    /// Merges `patch` into the stored entity (or creates it). Attributes
    /// whose value did not change produce no change event.
    pub fn upsert(&self, patch: &ContextEntity) -> Result<UpsertOutcome, BrokerError> {
        let mut state = self.lock();
        let (merged, changed, outcome) = match state.entities.get(&patch.id) {
            Some(existing) => {
                if existing.entity_type != patch.entity_type {
                    return Err(BrokerError::BadRequest(format!(
                        "{} is a {}, not a {}",
                        patch.id, existing.entity_type, patch.entity_type
                    )));
                }
                let mut merged = existing.clone();
                let changed = merged.merge_from(patch);
                (merged, changed, UpsertOutcome::Updated)
            }
            None => (
                patch.clone(),
                patch.attributes.keys().cloned().collect(),
                UpsertOutcome::Created,
            ),
        };
        let report = validate_entity(&merged);
        if !report.is_empty() {
            return Err(BrokerError::Invalid(report));
        }
        let is_change = outcome == UpsertOutcome::Created || !changed.is_empty();
        if !is_change {
            if let Some(stored) = state.entities.get_mut(&patch.id) {
                stored.context = merged.context;
            }
            return Ok(outcome);
        }

        let metrics = &self.notifier.metrics;
        metrics.change_events.fetch_add(1, Ordering::SeqCst);
        let notified_at = format_wire(&self.clock.now());
        let snapshot = merged.to_json();
        state.entities.insert(merged.id.clone(), merged);

        let State {
            entities,
            subs,
            next_notification,
            ..
        } = &mut *state;
        let merged = &entities[&patch.id];
        for entry in subs.values() {
            if !entry.sub.matches(merged, &changed) {
                continue;
            }
            *next_notification += 1;
            let payload = NotificationPayload {
                id: format!("urn:ngsi-ld:Notification:{next_notification}"),
                kind: "Notification".into(),
                subscription_id: entry.sub.id.clone(),
                notified_at: notified_at.clone(),
                data: vec![snapshot.clone()],
            };
            metrics.notifications.fetch_add(1, Ordering::SeqCst);
            let delivery = Delivery {
                payload,
                endpoint: entry.sub.request.notification.endpoint.uri.clone(),
                sub: entry.state.clone(),
            };
            if entry.tx.send(delivery).is_err() {
                metrics.cancelled.fetch_add(1, Ordering::SeqCst);
            }
        }
        Ok(outcome)
    }

    pub fn get(&self, id: &EntityId) -> Result<ContextEntity, BrokerError> {
        self.lock()
            .entities
            .get(id)
            .cloned()
            .ok_or_else(|| BrokerError::NotFound(id.to_string()))
    }

    /// Entities of `entity_type` matching every filter, ordered by id.
    pub fn query(&self, entity_type: &str, filters: &[AttrFilter], window: Option<&TimeWindow>) -> Vec<ContextEntity> {
        self.lock()
            .entities
            .values()
            .filter(|e| e.entity_type == entity_type)
            .filter(|e| filters.iter().all(|f| f.matches(e)))
            .filter(|e| window.is_none_or(|w| w.matches(e)))
            .cloned()
            .collect()
    }

    /// Every stored entity, ordered by id.
    pub fn snapshot(&self) -> Vec<ContextEntity> {
        self.lock().entities.values().cloned().collect()
    }

    /// Removes the entity. Deletions do not notify subscribers.
    pub fn delete(&self, id: &EntityId) -> Result<(), BrokerError> {
        self.lock()
            .entities
            .remove(id)
            .map(|_| ())
            .ok_or_else(|| BrokerError::NotFound(id.to_string()))
    }

    /// Must be called within a Tokio runtime: each subscription gets its own
    /// delivery task.
    pub fn subscribe(&self, request: SubscriptionRequest) -> Result<String, BrokerError> {
        let patterns = request.validate().map_err(BrokerError::BadRequest)?;
        let mut state = self.lock();
        let id = match &request.id {
            Some(id) if state.subs.contains_key(id) => {
                return Err(BrokerError::BadRequest(format!("subscription {id} exists")))
            }
            Some(id) => id.clone(),
            None => {
                state.next_sub += 1;
                format!("urn:ngsi-ld:Subscription:{}", state.next_sub)
            }
        };
        let sub = Subscription {
            id: id.clone(),
            watched: request.watched_attributes.iter().cloned().collect::<BTreeSet<_>>(),
            patterns,
            request,
            created_at: self.clock.now(),
        };
        let sub_state = Arc::new(SubState::default());
        sub_state.alive.store(true, Ordering::SeqCst);
        let tx = self.notifier.spawn_worker();
        state.subs.insert(
            id.clone(),
            SubEntry {
                sub,
                state: sub_state,
                tx,
            },
        );
        Ok(id)
    }

    /// Stops deliveries, including any still queued.
    pub fn unsubscribe(&self, id: &str) -> Result<(), BrokerError> {
        let entry = self
            .lock()
            .subs
            .remove(id)
            .ok_or_else(|| BrokerError::NotFound(id.to_string()))?;
        entry.state.alive.store(false, Ordering::SeqCst);
        Ok(())
    }

    pub fn subscriptions(&self) -> Vec<Value> {
        self.lock()
            .subs
            .values()
            .map(|e| e.sub.describe(e.state.delivered.load(Ordering::SeqCst)))
            .collect()
    }

    pub fn subscription(&self, id: &str) -> Result<Value, BrokerError> {
        self.lock()
            .subs
            .get(id)
            .map(|e| e.sub.describe(e.state.delivered.load(Ordering::SeqCst)))
            .ok_or_else(|| BrokerError::NotFound(id.to_string()))
    }

    pub fn metrics(&self) -> BrokerMetrics {
        let state = self.lock();
        let m = &self.notifier.metrics;
        BrokerMetrics {
            entities: state.entities.len(),
            subscriptions: state.subs.len(),
            change_events: m.change_events.load(Ordering::SeqCst),
            notifications: m.notifications.load(Ordering::SeqCst),
            delivered: m.delivered.load(Ordering::SeqCst),
            failed_attempts: m.failed_attempts.load(Ordering::SeqCst),
            dropped: m.dropped.load(Ordering::SeqCst),
            in_flight: m.in_flight(),
        }
    }

    /// Waits until every queued notification is delivered or dropped.
    pub async fn wait_idle(&self) {
        loop {
            let notified = self.notifier.idle.notified();
            tokio::pin!(notified);
            notified.as_mut().enable();
            if self.notifier.metrics.in_flight() == 0 {
                return;
            }
            tokio::select! {
                _ = notified => {}
                _ = tokio::time::sleep(Duration::from_millis(50)) => {}
            }
        }
    }
}

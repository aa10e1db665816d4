//! The engine as a broker client: consumes Flight notifications, writes
//! derived times and task plans back, and serves status to the dispatcher.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::{mpsc, Mutex};

use super::derive::{classify_delay, leg_at, link_turnaround, scheduled_in, scheduled_out};
use super::milestones::{apply_milestone, refresh_derived, Transition};
use super::tasks::{default_template, manage_task, TaskPlan, TaskTemplate};
use super::{DelayStatus, EngineError, TurnaroundLink, DEFAULT_DELAY_THRESHOLD_SECS};
use crate::broker::{BrokerClient, ClientError, NotificationPayload, SubscriptionRequest};
use crate::feeds::script::Direction;
use crate::model::records::{AIRPORT, FLIGHT, FLIGHT_NOTIFICATION};
use crate::model::{
    make_entity_id, parse_entity, Attribute, ContextEntity, DurationField, EntityId, FlightNotificationRecord,
    FlightRecord, Milestone, TaskStatus,
};
use crate::net::Backlog;
use crate::time::{parse_timestamp, Clock, Timestamp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineSettings {
    /// IATA code of the airport the twin models.
    pub home_airport: String,
    pub delay_threshold_secs: i64,
    pub template: Vec<TaskTemplate>,
    pub issuer: String,
}

impl Default for EngineSettings {
    fn default() -> Self {
        Self {
            home_airport: "ABZ".into(),
            delay_threshold_secs: DEFAULT_DELAY_THRESHOLD_SECS,
            template: default_template(),
            issuer: "turnaround-engine".into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Rejected(#[from] EngineError),
    #[error(transparent)]
    Broker(#[from] ClientError),
    #[error("{0} not found")]
    NotFound(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FlightStatusView {
    pub flight: EntityId,
    pub flight_number: Option<String>,
    pub stand_code: Option<String>,
    pub leg: &'static str,
    pub scheduled: Option<Timestamp>,
    pub status: DelayStatus,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineMetrics {
    pub processed: u64,
    pub writes: u64,
    pub errors: u64,
    pub pending: i64,
}

#[derive(Default)]
struct EngineState {
    flights: BTreeMap<EntityId, FlightRecord>,
    plans: BTreeMap<EntityId, TaskPlan>,
    links: BTreeMap<EntityId, TurnaroundLink>,
}

pub struct Engine {
    client: BrokerClient,
    clock: Arc<dyn Clock>,
    settings: EngineSettings,
    home: EntityId,
    state: Mutex<EngineState>,
    tx: mpsc::UnboundedSender<ContextEntity>,
    backlog: Backlog,
    processed: AtomicU64,
    writes: AtomicU64,
    errors: AtomicU64,
}

impl Engine {
    /// Starts the worker that handles queued Flight changes one at a time.
    pub fn start(
        client: BrokerClient,
        clock: Arc<dyn Clock>,
        settings: EngineSettings,
    ) -> Result<Arc<Self>, EngineError> {
        let home =
            make_entity_id(AIRPORT, &settings.home_airport).map_err(|e| EngineError::InvalidPlan(e.to_string()))?;
        super::tasks::check_template(&settings.template)?;
        let (tx, mut rx) = mpsc::unbounded_channel::<ContextEntity>();
        let engine = Arc::new(Self {
            client,
            clock,
            settings,
            home,
            state: Mutex::new(EngineState::default()),
            tx,
            backlog: Backlog::default(),
            processed: AtomicU64::new(0),
            writes: AtomicU64::new(0),
            errors: AtomicU64::new(0),
        });
        let weak = Arc::downgrade(&engine);
        tokio::spawn(async move {
            while let Some(entity) = rx.recv().await {
                let Some(engine) = weak.upgrade() else { return };
                if let Err(e) = engine.process(entity).await {
                    engine.errors.fetch_add(1, Ordering::SeqCst);
                    tracing::warn!(error = %e, "engine update failed");
                }
                engine.processed.fetch_add(1, Ordering::SeqCst);
                engine.backlog.done();
            }
        });
        Ok(engine)
    }

    pub fn settings(&self) -> &EngineSettings {
        &self.settings
    }

    /// Loads flights and task notifications already held by the broker.
    pub async fn sync(&self) -> Result<(), ClientError> {
        let flights = self.client.query(FLIGHT, &[], None).await?;
        let notes = self.client.query(FLIGHT_NOTIFICATION, &[], None).await?;
        let mut st = self.state.lock().await;
        for f in flights {
            if let Ok(rec) = FlightRecord::from_entity(&f) {
                st.flights.insert(rec.id.clone(), rec);
            }
        }
        let mut grouped: BTreeMap<EntityId, Vec<FlightNotificationRecord>> = BTreeMap::new();
        for n in notes {
            if let Ok(rec) = FlightNotificationRecord::from_entity(&n) {
                if let Some(flight) = rec.ref_flight.clone() {
                    grouped.entry(flight).or_default().push(rec);
                }
            }
        }
        let order = |r: &FlightNotificationRecord| {
            self.settings
                .template
                .iter()
                .position(|t| r.id.local_key().ends_with(&format!("-{}", t.key)))
                .unwrap_or(usize::MAX)
        };
        for (flight, mut tasks) in grouped {
            tasks.sort_by_key(|t| order(t));
            st.plans.insert(flight.clone(), TaskPlan::from_records(&flight, tasks));
        }
        Ok(())
    }

    /// Subscribes this engine to Flight changes delivered to `callback`.
    pub async fn subscribe(&self, callback: &str) -> Result<String, ClientError> {
        self.client
            .subscribe(&SubscriptionRequest::new(&[FLIGHT], &[], callback))
            .await
    }

    pub fn enqueue(&self, entity: ContextEntity) {
        if entity.entity_type != FLIGHT {
            return;
        }
        self.backlog.add();
        if self.tx.send(entity).is_err() {
            self.backlog.done();
        }
    }

    pub async fn wait_idle(&self) {
        self.backlog.wait_idle().await;
    }

    pub fn metrics(&self) -> EngineMetrics {
        EngineMetrics {
            processed: self.processed.load(Ordering::SeqCst),
            writes: self.writes.load(Ordering::SeqCst),
            errors: self.errors.load(Ordering::SeqCst),
            pending: self.backlog.pending(),
        }
    }

    async fn write(&self, entity: &ContextEntity) -> Result<(), ClientError> {
        self.client.upsert(entity).await?;
        self.writes.fetch_add(1, Ordering::SeqCst);
        Ok(())
    }

    async fn process(&self, entity: ContextEntity) -> Result<(), ServiceError> {
        let rec = FlightRecord::from_entity(&entity).map_err(|e| EngineError::InvalidPlan(e.to_string()))?;
        let id = rec.id.clone();
        let mut st = self.state.lock().await;
        st.flights.insert(id.clone(), rec.clone());

        let mut derived = rec.clone();
        refresh_derived(&mut derived)?;
        let patch = duration_patch(&rec, &derived, &[DurationField::Axot, DurationField::Axit]);
        if !patch.attributes.is_empty() {
            self.write(&patch).await?;
            st.flights.insert(id.clone(), derived.clone());
        }

        let pair = match leg_at(&derived, &self.home) {
            Some(Direction::Arrival) => {
                self.ensure_plan(&mut st, &id).await?;
                find_outbound(&st.flights, &derived).map(|o| (derived.clone(), o))
            }
            Some(Direction::Departure) => find_inbound(&st.flights, &derived)
                .filter(|i| find_outbound(&st.flights, i).map(|o| o.id) == Some(id.clone()))
                .map(|i| (i, derived.clone())),
            None => None,
        };
        let Some((inbound, outbound)) = pair else {
            return Ok(());
        };
        let link = link_turnaround(&inbound, &outbound, &self.home)?;
        let mut updated = outbound.clone();
        for (field, value) in [
            (DurationField::Attt, link.attt),
            (DurationField::Sttt, link.sttt),
            (DurationField::Ettt, link.ettt),
        ] {
            if let Some(v) = value {
                updated.durations.insert(field, v);
            }
        }
        let patch = duration_patch(
            &outbound,
            &updated,
            &[DurationField::Attt, DurationField::Sttt, DurationField::Ettt],
        );
        if !patch.attributes.is_empty() {
            self.write(&patch).await?;
            st.flights.insert(updated.id.clone(), updated);
        }
        st.links.insert(inbound.id.clone(), link);
        Ok(())
    }

    async fn ensure_plan(&self, st: &mut EngineState, flight: &EntityId) -> Result<(), ServiceError> {
        if st.plans.contains_key(flight) {
            return Ok(());
        }
        let plan = TaskPlan::from_template(flight, &self.settings.template, self.clock.now(), &self.settings.issuer)?;
        for task in &plan.tasks {
            self.write(&task.to_entity()).await?;
        }
        st.plans.insert(flight.clone(), plan);
        Ok(())
    }

    async fn flight(&self, st: &EngineState, id: &EntityId) -> Result<FlightRecord, ServiceError> {
        if let Some(f) = st.flights.get(id) {
            return Ok(f.clone());
        }
        let e = match self.client.get(id).await {
            Err(ClientError::NotFound(_)) => return Err(ServiceError::NotFound(id.to_string())),
            other => other?,
        };
        FlightRecord::from_entity(&e).map_err(|e| EngineError::InvalidPlan(e.to_string()).into())
    }

    /// Records a milestone reported by an operator and writes it back.
    pub async fn apply(&self, id: &EntityId, milestone: Milestone, at: Timestamp) -> Result<Transition, ServiceError> {
        let mut st = self.state.lock().await;
        let current = self.flight(&st, id).await?;
        let (next, transition) = apply_milestone(&current, milestone, at)?;
        if transition.changed {
            let mut patch = ContextEntity::new(id.clone());
            patch.set(&milestone.attribute_name(), Attribute::datetime(&at));
            if let Some(s) = next.state {
                patch.set("state", Attribute::property(s.as_str()));
            }
            for (d, secs) in &next.durations {
                patch.set(&d.attribute_name(), Attribute::property(*secs));
            }
            self.write(&patch).await?;
            st.flights.insert(id.clone(), next);
        }
        Ok(transition)
    }

    /// Changes a task's status; nothing is written when the change is refused.
    pub async fn set_task(
        &self,
        task: &EntityId,
        status: TaskStatus,
    ) -> Result<FlightNotificationRecord, ServiceError> {
        let mut st = self.state.lock().await;
        let flight = st
            .plans
            .iter()
            .find(|(_, p)| p.task(task).is_some())
            .map(|(f, _)| f.clone())
            .ok_or_else(|| ServiceError::NotFound(task.to_string()))?;
        let (plan, changed) = manage_task(&st.plans[&flight], task, status, self.clock.now())?;
        self.write(&changed.to_entity()).await?;
        st.plans.insert(flight, plan);
        Ok(changed)
    }

    pub async fn plan(&self, flight: &EntityId) -> Option<TaskPlan> {
        self.state.lock().await.plans.get(flight).cloned()
    }

    pub async fn links(&self) -> Vec<TurnaroundLink> {
        self.state.lock().await.links.values().cloned().collect()
    }

    fn view(&self, f: &FlightRecord, now: Timestamp) -> Option<FlightStatusView> {
        let leg = leg_at(f, &self.home)?;
        Some(FlightStatusView {
            flight: f.id.clone(),
            flight_number: f.flight_number.clone(),
            stand_code: f.stand_code.clone(),
            leg: leg.code(),
            scheduled: match leg {
                Direction::Arrival => scheduled_in(f),
                Direction::Departure => scheduled_out(f),
            },
            status: classify_delay(f, leg, now, self.settings.delay_threshold_secs),
        })
    }

    pub async fn status_of(&self, id: &EntityId, now: Timestamp) -> Result<FlightStatusView, ServiceError> {
        let st = self.state.lock().await;
        let f = self.flight(&st, id).await?;
        self.view(&f, now)
            .ok_or_else(|| ServiceError::NotFound(format!("{id} at {}", self.settings.home_airport)))
    }

    /// Every known flight touching the home airport, ordered by id.
    pub async fn board(&self, now: Timestamp) -> Vec<FlightStatusView> {
        let st = self.state.lock().await;
        st.flights.values().filter_map(|f| self.view(f, now)).collect()
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }
}

fn duration_patch(before: &FlightRecord, after: &FlightRecord, fields: &[DurationField]) -> ContextEntity {
    let mut patch = ContextEntity::new(after.id.clone());
    for f in fields {
        if let Some(v) = after.duration(*f) {
            if before.duration(*f) != Some(v) {
                patch.set(&f.attribute_name(), Attribute::property(v));
            }
        }
    }
    patch
}

fn same_aircraft<'a>(
    flights: &'a BTreeMap<EntityId, FlightRecord>,
    of: &'a FlightRecord,
) -> impl Iterator<Item = &'a FlightRecord> {
    flights
        .values()
        .filter(move |f| f.id != of.id && f.has_aircraft.is_some() && f.has_aircraft == of.has_aircraft)
}

/// The aircraft's first departure scheduled at or after this arrival.
fn find_outbound(flights: &BTreeMap<EntityId, FlightRecord>, inbound: &FlightRecord) -> Option<FlightRecord> {
    let home = inbound.arrives_to_airport.as_ref()?;
    let after = scheduled_in(inbound)?;
    same_aircraft(flights, inbound)
        .filter(|f| f.departs_from_airport.as_ref() == Some(home))
        .filter_map(|f| scheduled_out(f).filter(|t| *t >= after).map(|t| (t, f)))
        .min_by(|a, b| a.0.cmp(&b.0).then(a.1.id.cmp(&b.1.id)))
        .map(|(_, f)| f.clone())
}

/// The aircraft's last arrival scheduled at or before this departure.
fn find_inbound(flights: &BTreeMap<EntityId, FlightRecord>, outbound: &FlightRecord) -> Option<FlightRecord> {
    let home = outbound.departs_from_airport.as_ref()?;
    let before = scheduled_out(outbound)?;
    same_aircraft(flights, outbound)
        .filter(|f| f.arrives_to_airport.as_ref() == Some(home))
        .filter_map(|f| scheduled_in(f).filter(|t| *t <= before).map(|t| (t, f)))
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.id.cmp(&a.1.id)))
        .map(|(_, f)| f.clone())
}

fn problem(status: StatusCode, title: &str, detail: String) -> Response {
    (status, Json(json!({"title": title, "detail": detail}))).into_response()
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        match self {
            ServiceError::Rejected(e) => problem(StatusCode::CONFLICT, "Rejected", e.to_string()),
            ServiceError::NotFound(what) => problem(StatusCode::NOT_FOUND, "NotFound", what),
            ServiceError::Broker(e) => problem(StatusCode::BAD_GATEWAY, "BrokerUnavailable", e.to_string()),
        }
    }
}

fn parse_id(raw: &str) -> Result<EntityId, Response> {
    raw.parse()
        .map_err(|e: crate::model::ModelError| problem(StatusCode::BAD_REQUEST, "BadRequest", e.to_string()))
}

fn now_param(engine: &Engine, params: &BTreeMap<String, String>) -> Result<Timestamp, Response> {
    match params.get("now") {
        Some(raw) => parse_timestamp(raw).map_err(|e| problem(StatusCode::BAD_REQUEST, "BadRequest", e.to_string())),
        None => Ok(engine.now()),
    }
}

async fn notify(State(engine): State<Arc<Engine>>, Json(payload): Json<NotificationPayload>) -> StatusCode {
    for doc in &payload.data {
        match parse_entity(doc) {
            Ok(e) => engine.enqueue(e),
            Err(e) => tracing::warn!(error = %e, "unreadable notification entity"),
        }
    }
    StatusCode::NO_CONTENT
}

async fn board(State(engine): State<Arc<Engine>>, Query(params): Query<BTreeMap<String, String>>) -> Response {
    match now_param(&engine, &params) {
        Ok(now) => Json(engine.board(now).await).into_response(),
        Err(r) => r,
    }
}

async fn flight_status(
    State(engine): State<Arc<Engine>>,
    Path(id): Path<String>,
    Query(params): Query<BTreeMap<String, String>>,
) -> Response {
    let (id, now) = match (parse_id(&id), now_param(&engine, &params)) {
        (Ok(id), Ok(now)) => (id, now),
        (Err(r), _) | (_, Err(r)) => return r,
    };
    match engine.status_of(&id, now).await {
        Ok(v) => Json(v).into_response(),
        Err(e) => e.into_response(),
    }
}

#[derive(Debug, Deserialize)]
struct MilestoneBody {
    milestone: String,
    at: String,
}

async fn post_milestone(
    State(engine): State<Arc<Engine>>,
    Path(id): Path<String>,
    Json(body): Json<MilestoneBody>,
) -> Response {
    let id = match parse_id(&id) {
        Ok(id) => id,
        Err(r) => return r,
    };
    let (m, at) = match (body.milestone.parse::<Milestone>(), parse_timestamp(&body.at)) {
        (Ok(m), Ok(at)) => (m, at),
        (Err(e), _) => return problem(StatusCode::BAD_REQUEST, "BadRequest", e.to_string()),
        (_, Err(e)) => return problem(StatusCode::BAD_REQUEST, "BadRequest", e.to_string()),
    };
    match engine.apply(&id, m, at).await {
        Ok(t) => Json(t).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn flight_tasks(State(engine): State<Arc<Engine>>, Path(id): Path<String>) -> Response {
    let id = match parse_id(&id) {
        Ok(id) => id,
        Err(r) => return r,
    };
    match engine.plan(&id).await {
        Some(plan) => {
            let docs: Vec<Value> = plan.tasks.iter().map(|t| t.to_entity().to_json()).collect();
            Json(docs).into_response()
        }
        None => ServiceError::NotFound(format!("tasks for {id}")).into_response(),
    }
}

#[derive(Debug, Deserialize)]
struct TaskBody {
    status: String,
}

async fn post_task(State(engine): State<Arc<Engine>>, Path(id): Path<String>, Json(body): Json<TaskBody>) -> Response {
    let id = match parse_id(&id) {
        Ok(id) => id,
        Err(r) => return r,
    };
    let status = match body.status.parse::<TaskStatus>() {
        Ok(s) => s,
        Err(e) => return problem(StatusCode::BAD_REQUEST, "BadRequest", e.to_string()),
    };
    match engine.set_task(&id, status).await {
        Ok(rec) => Json(rec.to_entity().to_json()).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn turnarounds(State(engine): State<Arc<Engine>>) -> Response {
    Json(engine.links().await).into_response()
}

async fn status(State(engine): State<Arc<Engine>>) -> Response {
    Json(engine.metrics()).into_response()
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/notify", post(notify))
        .route("/flights", get(board))
        .route("/flights/{id}/status", get(flight_status))
        .route("/flights/{id}/milestones", post(post_milestone))
        .route("/flights/{id}/tasks", get(flight_tasks))
        .route("/tasks/{id}", post(post_task))
        .route("/turnarounds", get(turnarounds))
        .route("/status", get(status))
        .with_state(engine)
}

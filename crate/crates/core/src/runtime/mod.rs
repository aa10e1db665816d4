//! Starts and wires the components of a run: broker, history, engine,
//! simulator and pipelines.

pub mod config;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use serde_json::Value;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;
use tokio_util::sync::CancellationToken;

pub use config::{RuntimeConfig, RuntimeConfigError};

use crate::broker::{http as broker_http, Broker, BrokerClient};
use crate::engine::{service as engine_service, Engine, EngineSettings};
use crate::feeds::positions::position_frame;
use crate::feeds::schedule::{serve_airlines, serve_airports};
use crate::feeds::{serve_schedule_with, ScenarioScript, Simulator};
use crate::history::{self, HistoryStore};
use crate::live::{self, LiveHub};
use crate::model::ContextEntity;
use crate::net::spawn_http;
use crate::pipeline::{
    runner::status_router, start_pipeline, PipelineConfig, PipelineHandle, RunContext, SettleHook, SinkSpec, SourceSpec,
};
use crate::time::{parse_timestamp, Clock, SimClock, SystemClock, Timestamp};

/// Simulated time a live run keeps polling after the scenario ends, so the
/// last schedule state is picked up.
const LIVE_SLACK_SECS: i64 = 60;

#[derive(Debug, thiserror::Error)]
#[error("{component}: {reason}")]
pub struct StartupError {
    pub component: &'static str,
    pub reason: String,
}

fn fail(component: &'static str) -> impl Fn(String) -> StartupError {
    move |reason| StartupError { component, reason }
}

/// What a pipeline reads when the runtime feeds it directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Feed {
    Flights,
    Airports,
    Airlines,
    Positions,
}

impl Feed {
    fn of(source: &SourceSpec) -> Option<Feed> {
        match source {
            SourceSpec::Tcp { .. } => Some(Feed::Positions),
            SourceSpec::HttpPoll { url, .. } => {
                let path = url.split('?').next().unwrap_or(url);
                [
                    ("/chroma/flights", Feed::Flights),
                    ("/chroma/airports", Feed::Airports),
                    ("/chroma/airlines", Feed::Airlines),
                ]
                .into_iter()
                .find(|(suffix, _)| path.ends_with(suffix))
                .map(|(_, f)| f)
            }
            _ => None,
        }
    }

    fn payload(self, sim: &Simulator, at: Timestamp) -> Value {
        match self {
            Feed::Flights => serve_schedule_with(&sim.script, at, sim.inject_null),
            Feed::Airports => serve_airports(&sim.script),
            Feed::Airlines => serve_airlines(&sim.script),
            Feed::Positions => position_frame(&sim.script, at),
        }
    }
}

struct Fed {
    feed: Feed,
    interval: chrono::Duration,
    next: Timestamp,
}

pub struct Runtime {
    pub config: RuntimeConfig,
    pub clock: Arc<dyn Clock>,
    manual: Option<Arc<SimClock>>,
    pub broker: Option<Arc<Broker>>,
    pub broker_url: String,
    pub simulator: Option<Arc<Simulator>>,
    pub engine: Option<Arc<Engine>>,
    pub history: Option<Arc<HistoryStore>>,
    pub live: Option<Arc<LiveHub>>,
    pipelines: Vec<PipelineHandle>,
    fed: Vec<Option<Fed>>,
    /// Bound address of every listener, by component.
    pub addresses: BTreeMap<&'static str, SocketAddr>,
    cancel: CancellationToken,
    tasks: Vec<JoinHandle<()>>,
}

/// Waits until no notification is in flight and the engine has nothing
/// queued, re-checking because each can create work for the other.
pub async fn quiesce(broker: &Broker, engine: Option<&Engine>) {
    loop {
        broker.wait_idle().await;
        if let Some(e) = engine {
            e.wait_idle().await;
        }
        let engine_idle = engine.is_none_or(|e| e.metrics().pending == 0);
        if broker.metrics().in_flight == 0 && engine_idle {
            return;
        }
    }
}

fn settle_hook(broker: Arc<Broker>, engine: Option<Arc<Engine>>) -> SettleHook {
    Arc::new(move || {
        let broker = broker.clone();
        let engine = engine.clone();
        Box::pin(async move { quiesce(&broker, engine.as_deref()).await })
    })
}

fn replace_authority(url: &str, addr: &SocketAddr) -> String {
    let rest = url.split_once("://").map_or(url, |(_, r)| r);
    let path = rest.find('/').map_or("", |i| &rest[i..]);
    format!("http://{addr}{path}")
}

impl Runtime {
    pub async fn start(config: RuntimeConfig) -> Result<Self, StartupError> {
        config.validate().map_err(|e| fail("config")(e.to_string()))?;
        let cancel = CancellationToken::new();
        let mut addresses = BTreeMap::new();
        let mut tasks = Vec::new();

        let script = match (&config.simulator.enabled, &config.simulator.scenario) {
            (true, Some(path)) => Some(ScenarioScript::load(path).map_err(|e| fail("simulator")(e.to_string()))?),
            _ => None,
        };
        let start = match &config.clock.start {
            Some(s) => Some(parse_timestamp(s).map_err(|e| fail("clock")(e.to_string()))?),
            None => script.as_ref().and_then(|s| s.start_time()),
        };
        let (clock, manual): (Arc<dyn Clock>, Option<Arc<SimClock>>) = match (start, config.is_lockstep()) {
            (Some(t), true) => {
                let c = Arc::new(SimClock::manual(t));
                (c.clone(), Some(c))
            }
            (Some(t), false) => (Arc::new(SimClock::scaled(t, config.clock.scale)), None),
            (None, true) => {
                let c = Arc::new(SimClock::manual(SystemClock.now()));
                (c.clone(), Some(c))
            }
            (None, false) => (Arc::new(SystemClock), None),
        };

        let mut broker = None;
        let broker_url = if config.broker.enabled {
            let b = Arc::new(Broker::new(clock.clone(), config.broker.retry));
            let (addr, task) = spawn_http(&config.broker.listen, broker_http::router(b.clone()), cancel.clone())
                .await
                .map_err(|e| fail("broker")(format!("{}: {e}", config.broker.listen)))?;
            addresses.insert("broker", addr);
            tasks.push(task);
            broker = Some(b);
            format!("http://{addr}")
        } else {
            config.broker_url()
        };
        let client = BrokerClient::new(&broker_url);

        let mut history_store = None;
        if config.history.enabled {
            let store = Arc::new(HistoryStore::open(&config.history.dir).map_err(|e| fail("history")(e.to_string()))?);
            let (addr, task) = spawn_http(&config.history.listen, history::router(store.clone()), cancel.clone())
                .await
                .map_err(|e| fail("history")(format!("{}: {e}", config.history.listen)))?;
            addresses.insert("history", addr);
            tasks.push(task);
            history::subscribe(&client, &format!("http://{addr}/notify"))
                .await
                .map_err(|e| fail("history")(e.to_string()))?;
            history_store = Some(store);
        }

        let mut engine = None;
        let mut live_hub = None;
        if config.engine.enabled {
            let settings = EngineSettings {
                home_airport: config.home_airport.clone(),
                delay_threshold_secs: config.engine.delay_threshold_secs,
                ..EngineSettings::default()
            };
            let e =
                Engine::start(client.clone(), clock.clone(), settings).map_err(|e| fail("engine")(e.to_string()))?;
            let hub = LiveHub::new(live::DEFAULT_BUFFER, config.engine.session_token.clone());
            let router = engine_service::router(e.clone()).merge(live::router(hub.clone()));
            let (addr, task) = spawn_http(&config.engine.listen, router, cancel.clone())
                .await
                .map_err(|e| fail("engine")(format!("{}: {e}", config.engine.listen)))?;
            addresses.insert("engine", addr);
            tasks.push(task);
            e.sync().await.map_err(|err| fail("engine")(err.to_string()))?;
            e.subscribe(&format!("http://{addr}/notify"))
                .await
                .map_err(|err| fail("engine")(err.to_string()))?;
            hub.sync(&client)
                .await
                .map_err(|err| fail("live feed")(err.to_string()))?;
            hub.subscribe(&client, &format!("http://{addr}/live/notify"))
                .await
                .map_err(|err| fail("live feed")(err.to_string()))?;
            engine = Some(e);
            live_hub = Some(hub);
        }

        let mut simulator = None;
        if let Some(script) = script {
            let mut sim = Simulator::new(script, clock.clone());
            sim.token = config.simulator.token.clone();
            sim.inject_null = config.simulator.inject_null;
            sim.tick = Duration::from_secs(config.simulator.tick_seconds);
            let sim = Arc::new(sim);
            if manual.is_none() {
                let (addr, task) = spawn_http(
                    &config.simulator.rest_listen,
                    crate::feeds::simulator::router(sim.clone()),
                    cancel.clone(),
                )
                .await
                .map_err(|e| fail("simulator")(format!("{}: {e}", config.simulator.rest_listen)))?;
                addresses.insert("simulator", addr);
                tasks.push(task);
                let listener = TcpListener::bind(&config.simulator.tcp_listen)
                    .await
                    .map_err(|e| fail("simulator")(format!("{}: {e}", config.simulator.tcp_listen)))?;
                addresses.insert(
                    "simulator positions",
                    listener.local_addr().map_err(|e| fail("simulator")(e.to_string()))?,
                );
                tasks.push(crate::feeds::simulator::serve_positions(
                    listener,
                    sim.clone(),
                    cancel.clone(),
                ));
            }
            simulator = Some(sim);
        }

        let mut pipelines = Vec::new();
        let mut fed = Vec::new();
        if config.pipelines.enabled {
            let mut ctx = RunContext::new(clock.clone());
            ctx.cancel = cancel.child_token();
            if let (Some(_), Some(b)) = (&manual, &broker) {
                ctx = ctx.with_settle(settle_hook(b.clone(), engine.clone()));
            }
            let start = clock.now();
            for path in &config.pipelines.configs {
                let mut pc = PipelineConfig::load(path).map_err(|e| fail("pipelines")(e.to_string()))?;
                if let SinkSpec::Broker { url } = &mut pc.sink {
                    *url = broker_url.clone();
                }
                pc.dead_letter = match (&config.pipelines.dead_letter_dir, &pc.dead_letter) {
                    (Some(dir), Some(file)) => Some(dir.join(file.file_name().unwrap_or_default())),
                    _ => None,
                };
                if let Some(dir) = &config.pipelines.dead_letter_dir {
                    std::fs::create_dir_all(dir).map_err(|e| fail("pipelines")(format!("{}: {e}", dir.display())))?;
                }
                let feed = Feed::of(&pc.source);
                let mut entry = None;
                if simulator.is_some() {
                    match (&manual, feed) {
                        (Some(_), Some(feed)) => {
                            let secs = match &pc.source {
                                SourceSpec::HttpPoll { interval_seconds, .. } => *interval_seconds,
                                _ => config.simulator.tick_seconds,
                            };
                            entry = Some(Fed {
                                feed,
                                interval: chrono::Duration::seconds(secs.max(1) as i64),
                                next: start,
                            });
                            pc.source = SourceSpec::Channel;
                        }
                        (Some(_), None) => {
                            return Err(fail("pipelines")(format!(
                                "{}: lockstep runs need a simulator feed as source",
                                pc.name
                            )))
                        }
                        (None, _) => match &mut pc.source {
                            SourceSpec::HttpPoll { url, token, .. } => {
                                if let Some(addr) = addresses.get("simulator") {
                                    *url = replace_authority(url, addr);
                                    *token = config.simulator.token.clone();
                                }
                            }
                            SourceSpec::Tcp { address } => {
                                if let Some(addr) = addresses.get("simulator positions") {
                                    *address = addr.to_string();
                                }
                            }
                            _ => {}
                        },
                    }
                }
                let handle = start_pipeline(&pc, ctx.clone()).map_err(|e| fail("pipelines")(e.to_string()))?;
                pipelines.push(handle);
                fed.push(entry);
            }
            let stats = pipelines
                .iter()
                .map(|p| Arc::new(p.stats_fn()) as Arc<dyn Fn() -> _ + Send + Sync>)
                .collect();
            let (addr, task) = spawn_http(&config.pipelines.status_listen, status_router(stats), cancel.clone())
                .await
                .map_err(|e| fail("pipelines")(format!("{}: {e}", config.pipelines.status_listen)))?;
            addresses.insert("pipeline status", addr);
            tasks.push(task);
        }

        Ok(Self {
            config,
            clock,
            manual,
            broker,
            broker_url,
            simulator,
            engine,
            history: history_store,
            live: live_hub,
            pipelines,
            fed,
            addresses,
            cancel,
            tasks,
        })
    }

    pub fn is_lockstep(&self) -> bool {
        self.manual.is_some()
    }

    /// Last instant the scenario describes.
    pub fn scenario_end(&self) -> Option<Timestamp> {
        self.simulator.as_ref().and_then(|s| s.script.end_time())
    }

    pub fn pipelines(&self) -> &[PipelineHandle] {
        &self.pipelines
    }

    /// Advances a lockstep run tick by tick up to `until`, feeding each
    /// pipeline when due and settling every component after each record.
    pub async fn step_until(&mut self, until: Timestamp) -> Result<(), StartupError> {
        let (Some(clock), Some(sim)) = (self.manual.clone(), self.simulator.clone()) else {
            return Err(fail("run")("stepping needs a lockstep clock and a simulator".into()));
        };
        let tick = chrono::Duration::seconds(self.config.simulator.tick_seconds as i64);
        loop {
            let now = clock.now();
            for (handle, fed) in self.pipelines.iter().zip(self.fed.iter_mut()) {
                let Some(f) = fed.as_mut() else { continue };
                if now < f.next {
                    continue;
                }
                while f.next <= now {
                    f.next += f.interval;
                }
                let input = handle
                    .input()
                    .ok_or_else(|| fail("run")(format!("{} is stopped", handle.name())))?;
                input
                    .push(f.feed.payload(&sim, now))
                    .await
                    .map_err(|e| fail("run")(format!("{}: {e}", handle.name())))?;
                handle.wait_idle().await;
            }
            self.settle().await;
            if now + tick > until {
                return Ok(());
            }
            clock.set(now + tick);
        }
    }

    /// Waits until the broker, engine and pipelines have nothing in flight.
    pub async fn settle(&self) {
        for p in &self.pipelines {
            p.wait_idle().await;
        }
        if let Some(b) = &self.broker {
            quiesce(b, self.engine.as_deref()).await;
        }
    }

    /// Stops every source and waits for what they produced to land.
    pub async fn drain(&mut self) {
        for p in &mut self.pipelines {
            p.stop();
        }
        self.settle().await;
    }

    /// Runs a live scenario until its end plus one poll of every feed, then
    /// drains.
    pub async fn run_to_end(&mut self) -> Result<(), StartupError> {
        let end = self
            .scenario_end()
            .ok_or_else(|| fail("run")("no scenario to run".into()))?;
        if self.is_lockstep() {
            return self.step_until(end).await;
        }
        let last = end + chrono::Duration::seconds(LIVE_SLACK_SECS + self.config.simulator.tick_seconds as i64);
        crate::time::sleep_until(self.clock.as_ref(), last, &self.cancel).await;
        self.drain().await;
        Ok(())
    }

    /// Broker end state as one JSON array, ordered by id.
    pub fn broker_state(&self) -> Option<Vec<ContextEntity>> {
        self.broker.as_ref().map(|b| {
            let mut all = b.snapshot();
            all.sort_by(|a, b| a.id.cmp(&b.id));
            all
        })
    }

    pub fn cancel_token(&self) -> CancellationToken {
        self.cancel.clone()
    }

    pub async fn shutdown(mut self) {
        for p in &mut self.pipelines {
            p.stop();
        }
        self.cancel.cancel();
        for t in self.tasks.drain(..) {
            let _ = tokio::time::timeout(Duration::from_secs(5), t).await;
        }
    }
}

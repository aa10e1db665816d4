use std::fs::{File, OpenOptions};
use std::future::Future;
use std::io::Write;
use std::path::PathBuf;
use std::pin::Pin;
use std::sync::atomic::{AtomicI64, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::Serialize;
use serde_json::Value;
use tokio::sync::{mpsc, Notify};
use tokio::task::JoinHandle;
use tokio_util::sync::CancellationToken;

use super::capture::read_capture;
use super::config::{ConfigError, PipelineConfig, SinkSpec, SourceSpec};
use super::processors::{Outcome, Processor};
use super::record::FlowRecord;
use crate::feeds::adapters::{consume_tcp_source, poll_rest_source, PollSettings, TcpSettings};
use crate::time::{Clock, SystemClock};

/// What a source adapter reports.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceEvent {
    Record(FlowRecord),
    Failure(String),
}

pub type BoxFuture<T> = Pin<Box<dyn Future<Output = T> + Send>>;

/// Awaited after every sink delivery.
pub type SettleHook = Arc<dyn Fn() -> BoxFuture<()> + Send + Sync>;

#[derive(Clone)]
pub struct RunContext {
    pub clock: Arc<dyn Clock>,
    pub http: reqwest::Client,
    pub settle: Option<SettleHook>,
    pub cancel: CancellationToken,
}

impl RunContext {
    pub fn new(clock: Arc<dyn Clock>) -> Self {
        Self {
            clock,
            http: reqwest::Client::new(),
            settle: None,
            cancel: CancellationToken::new(),
        }
    }

    pub fn with_settle(mut self, hook: SettleHook) -> Self {
        self.settle = Some(hook);
        self
    }
}

impl Default for RunContext {
    fn default() -> Self {
        Self::new(Arc::new(SystemClock))
    }
}

#[derive(Debug, Default)]
struct Counters {
    input: AtomicU64,
    out: AtomicU64,
    dropped: AtomicU64,
    failed: AtomicU64,
    emitted: AtomicU64,
}

#[derive(Debug)]
struct Stage {
    name: String,
    kind: &'static str,
    counters: Counters,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageStats {
    pub name: String,
    pub kind: String,
    #[serde(rename = "in")]
    pub input: u64,
    pub out: u64,
    pub dropped: u64,
    pub failed: u64,
    /// Records produced; differs from `out` only for splitting stages.
    pub emitted: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeadLetter {
    pub stage: String,
    pub reason: String,
    pub record: FlowRecord,
}

struct Shared {
    name: String,
    stages: Vec<Stage>,
    pending: AtomicI64,
    idle: Notify,
    dead: Mutex<Vec<DeadLetter>>,
    dead_file: Option<Mutex<File>>,
}

impl Shared {
    fn add_pending(&self, n: i64) {
        if self.pending.fetch_add(n, Ordering::SeqCst) + n == 0 {
            self.idle.notify_waiters();
        }
    }

    fn dead_letter(&self, stage: usize, reason: String, record: FlowRecord) {
        let letter = DeadLetter {
            stage: self.stages[stage].name.clone(),
            reason,
            record,
        };
        tracing::warn!(pipeline = %self.name, stage = %letter.stage, reason = %letter.reason, "record failed");
        if let Some(file) = &self.dead_file {
            let mut f = file.lock().expect("dead letter file");
            if serde_json::to_writer(&mut *f, &letter).is_ok() {
                let _ = f.write_all(b"\n");
            }
        }
        self.dead.lock().expect("dead letters").push(letter);
    }

    fn counters(&self, stage: usize) -> &Counters {
        &self.stages[stage].counters
    }
}

/// In-process entry point for pipelines with a `channel` source.
#[derive(Clone)]
pub struct PipelineInput {
    tx: mpsc::Sender<FlowRecord>,
    shared: Arc<Shared>,
    seq: Arc<AtomicU64>,
    source: String,
}

impl PipelineInput {
    /// Queues `payload` with the next sequence number; waits while the first
    /// stage's queue is full.
    pub async fn push(&self, payload: Value) -> Result<(), String> {
        let seq = self.seq.fetch_add(1, Ordering::SeqCst) + 1;
        self.push_record(FlowRecord::new(&self.source, seq, payload)).await
    }

    pub async fn push_record(&self, record: FlowRecord) -> Result<(), String> {
        self.shared.add_pending(1);
        let c = self.shared.counters(0);
        c.input.fetch_add(1, Ordering::SeqCst);
        c.out.fetch_add(1, Ordering::SeqCst);
        c.emitted.fetch_add(1, Ordering::SeqCst);
        if self.tx.send(record).await.is_err() {
            self.shared.add_pending(-1);
            return Err("pipeline stopped".into());
        }
        Ok(())
    }
}

pub struct PipelineHandle {
    shared: Arc<Shared>,
    tasks: Vec<JoinHandle<()>>,
    cancel: CancellationToken,
    input: Option<PipelineInput>,
    output: Option<mpsc::UnboundedReceiver<FlowRecord>>,
}

impl PipelineHandle {
    pub fn name(&self) -> &str {
        &self.shared.name
    }

    /// Per-stage counters, source first and sink last.
    pub fn stats(&self) -> Vec<StageStats> {
        stats_of(&self.shared)
    }

    pub fn stats_fn(&self) -> impl Fn() -> (String, Vec<StageStats>) + Send + Sync + 'static {
        let shared = self.shared.clone();
        move || (shared.name.clone(), stats_of(&shared))
    }

    pub fn dead_letters(&self) -> Vec<DeadLetter> {
        self.shared.dead.lock().expect("dead letters").clone()
    }

    pub fn input(&self) -> Option<PipelineInput> {
        self.input.clone()
    }

    pub fn take_output(&mut self) -> Option<mpsc::UnboundedReceiver<FlowRecord>> {
        self.output.take()
    }

    /// Records accepted by the source but not yet sunk, dropped or failed.
    pub fn pending(&self) -> i64 {
        self.shared.pending.load(Ordering::SeqCst)
    }

    /// Waits until no record is in flight.
    pub async fn wait_idle(&self) {
        loop {
            let notified = self.shared.idle.notified();
            tokio::pin!(notified);
            notified.as_mut().enable();
            if self.pending() == 0 {
                return;
            }
            tokio::select! {
                _ = notified => {}
                _ = tokio::time::sleep(Duration::from_millis(50)) => {}
            }
        }
    }

    /// Stops the source; records already accepted still drain.
    pub fn stop(&mut self) {
        self.cancel.cancel();
        self.input = None;
    }

    /// Waits for every stage to finish. Without [`stop`](Self::stop) this
    /// returns once a finite source is exhausted.
    pub async fn join(mut self) -> Vec<StageStats> {
        self.input = None;
        for t in self.tasks.drain(..) {
            let _ = t.await;
        }
        stats_of(&self.shared)
    }
}

fn stats_of(shared: &Shared) -> Vec<StageStats> {
    shared
        .stages
        .iter()
        .map(|s| StageStats {
            name: s.name.clone(),
            kind: s.kind.to_string(),
            input: s.counters.input.load(Ordering::SeqCst),
            out: s.counters.out.load(Ordering::SeqCst),
            dropped: s.counters.dropped.load(Ordering::SeqCst),
            failed: s.counters.failed.load(Ordering::SeqCst),
            emitted: s.counters.emitted.load(Ordering::SeqCst),
        })
        .collect()
}

enum Sink {
    Broker { client: reqwest::Client, url: String },
    Directory { path: PathBuf, written: u64 },
    Channel(mpsc::UnboundedSender<FlowRecord>),
}

impl Sink {
    async fn deliver(&mut self, record: &FlowRecord) -> Result<(), String> {
        match self {
            Sink::Broker { client, url } => {
                let resp = client
                    .post(format!("{url}/entities"))
                    .json(&record.payload)
                    .send()
                    .await
                    .map_err(|e| format!("broker unreachable: {e}"))?;
                if resp.status().is_success() {
                    Ok(())
                } else {
                    let status = resp.status();
                    let body = resp.text().await.unwrap_or_default();
                    Err(format!("broker answered {status}: {body}"))
                }
            }
            Sink::Directory { path, written } => {
                *written += 1;
                let file = path.join(format!("{:05}.json", *written));
                let mut text = serde_json::to_string_pretty(&record.payload).map_err(|e| e.to_string())?;
                text.push('\n');
                std::fs::write(&file, text).map_err(|e| format!("{}: {e}", file.display()))
            }
            Sink::Channel(tx) => tx.send(record.clone()).map_err(|_| "output closed".into()),
        }
    }
}

/// Validates `config` and starts every stage.
pub fn start_pipeline(config: &PipelineConfig, ctx: RunContext) -> Result<PipelineHandle, ConfigError> {
    let processors = config.compile()?;
    let invalid = |e: String| ConfigError::Invalid {
        name: config.name.clone(),
        errors: vec![e],
    };

    let captured = match &config.source {
        SourceSpec::Capture { path } => Some(read_capture(path).map_err(|e| invalid(e.to_string()))?),
        _ => None,
    };
    let dead_file = match &config.dead_letter {
        Some(path) => Some(Mutex::new(
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| invalid(format!("dead letter log {}: {e}", path.display())))?,
        )),
        None => None,
    };
    let mut output = None;
    let sink = match &config.sink {
        SinkSpec::Broker { url } => Sink::Broker {
            client: ctx.http.clone(),
            url: url.trim_end_matches('/').to_string(),
        },
        SinkSpec::Directory { path } => {
            std::fs::create_dir_all(path).map_err(|e| invalid(format!("sink directory {}: {e}", path.display())))?;
            Sink::Directory {
                path: path.clone(),
                written: 0,
            }
        }
        SinkSpec::Channel => {
            let (tx, rx) = mpsc::unbounded_channel();
            output = Some(rx);
            Sink::Channel(tx)
        }
    };

    let mut stages = vec![Stage {
        name: "source".into(),
        kind: match &config.source {
            SourceSpec::HttpPoll { .. } => "http-poll",
            SourceSpec::Tcp { .. } => "tcp",
            SourceSpec::Capture { .. } => "capture",
            SourceSpec::Channel => "channel",
        },
        counters: Counters::default(),
    }];
    for (i, p) in processors.iter().enumerate() {
        stages.push(Stage {
            name: format!("{}#{}", p.kind(), i + 1),
            kind: p.kind(),
            counters: Counters::default(),
        });
    }
    stages.push(Stage {
        name: "sink".into(),
        kind: match &config.sink {
            SinkSpec::Broker { .. } => "broker",
            SinkSpec::Directory { .. } => "directory",
            SinkSpec::Channel => "channel",
        },
        counters: Counters::default(),
    });

    let shared = Arc::new(Shared {
        name: config.name.clone(),
        stages,
        pending: AtomicI64::new(0),
        idle: Notify::new(),
        dead: Mutex::new(Vec::new()),
        dead_file,
    });
    let cancel = ctx.cancel.child_token();
    let capacity = config.queue_capacity;
    let mut tasks = Vec::new();

    let (first_tx, mut rx) = mpsc::channel::<FlowRecord>(capacity);
    let mut input = None;
    match &config.source {
        SourceSpec::Channel => {
            input = Some(PipelineInput {
                tx: first_tx,
                shared: shared.clone(),
                seq: Arc::new(AtomicU64::new(0)),
                source: config.name.clone(),
            });
        }
        SourceSpec::Capture { .. } => {
            let records = captured.unwrap_or_default();
            let input = PipelineInput {
                tx: first_tx,
                shared: shared.clone(),
                seq: Arc::new(AtomicU64::new(0)),
                source: config.name.clone(),
            };
            let cancel = cancel.clone();
            tasks.push(tokio::spawn(async move {
                for r in records {
                    if cancel.is_cancelled() || input.push_record(r).await.is_err() {
                        break;
                    }
                }
            }));
        }
        SourceSpec::HttpPoll {
            url,
            interval_seconds,
            token,
        } => {
            let (ev_tx, ev_rx) = mpsc::channel(capacity);
            let settings = PollSettings {
                url: url.clone(),
                interval: Duration::from_secs(*interval_seconds),
                token: token.clone(),
                source: config.name.clone(),
            };
            tasks.push(tokio::spawn(poll_rest_source(
                settings,
                ctx.http.clone(),
                ctx.clock.clone(),
                ev_tx,
                cancel.clone(),
            )));
            tasks.push(tokio::spawn(forward_events(ev_rx, first_tx, shared.clone())));
        }
        SourceSpec::Tcp { address } => {
            let (ev_tx, ev_rx) = mpsc::channel(capacity);
            let settings = TcpSettings {
                address: address.clone(),
                source: config.name.clone(),
            };
            tasks.push(tokio::spawn(consume_tcp_source(settings, ev_tx, cancel.clone())));
            tasks.push(tokio::spawn(forward_events(ev_rx, first_tx, shared.clone())));
        }
    }

    for (i, processor) in processors.into_iter().enumerate() {
        let (tx, next_rx) = mpsc::channel::<FlowRecord>(capacity);
        let stage_rx = std::mem::replace(&mut rx, next_rx);
        tasks.push(tokio::spawn(run_stage(i + 1, processor, stage_rx, tx, shared.clone())));
    }
    let sink_index = shared.stages.len() - 1;
    tasks.push(tokio::spawn(run_sink(
        sink_index,
        sink,
        rx,
        shared.clone(),
        ctx.settle.clone(),
    )));

    Ok(PipelineHandle {
        shared,
        tasks,
        cancel,
        input,
        output,
    })
}

async fn forward_events(mut events: mpsc::Receiver<SourceEvent>, tx: mpsc::Sender<FlowRecord>, shared: Arc<Shared>) {
    while let Some(ev) = events.recv().await {
        let c = shared.counters(0);
        match ev {
            SourceEvent::Record(r) => {
                shared.add_pending(1);
                c.input.fetch_add(1, Ordering::SeqCst);
                c.out.fetch_add(1, Ordering::SeqCst);
                c.emitted.fetch_add(1, Ordering::SeqCst);
                if tx.send(r).await.is_err() {
                    shared.add_pending(-1);
                    break;
                }
            }
            SourceEvent::Failure(reason) => {
                c.input.fetch_add(1, Ordering::SeqCst);
                c.failed.fetch_add(1, Ordering::SeqCst);
                tracing::warn!(pipeline = %shared.name, %reason, "source failure");
            }
        }
    }
}

async fn run_stage(
    index: usize,
    processor: Processor,
    mut rx: mpsc::Receiver<FlowRecord>,
    tx: mpsc::Sender<FlowRecord>,
    shared: Arc<Shared>,
) {
    while let Some(record) = rx.recv().await {
        let c = shared.counters(index);
        c.input.fetch_add(1, Ordering::SeqCst);
        match processor.process(record.clone()) {
            Outcome::Emit(records) => {
                c.out.fetch_add(1, Ordering::SeqCst);
                c.emitted.fetch_add(records.len() as u64, Ordering::SeqCst);
                shared.add_pending(records.len() as i64 - 1);
                let mut remaining = records.len() as i64;
                for r in records {
                    if tx.send(r).await.is_err() {
                        shared.add_pending(-remaining);
                        return;
                    }
                    remaining -= 1;
                }
            }
            Outcome::Drop => {
                c.dropped.fetch_add(1, Ordering::SeqCst);
                shared.add_pending(-1);
            }
            Outcome::Fail(reason) => {
                c.failed.fetch_add(1, Ordering::SeqCst);
                shared.dead_letter(index, reason, record);
                shared.add_pending(-1);
            }
        }
    }
}

async fn run_sink(
    index: usize,
    mut sink: Sink,
    mut rx: mpsc::Receiver<FlowRecord>,
    shared: Arc<Shared>,
    settle: Option<SettleHook>,
) {
    while let Some(record) = rx.recv().await {
        let c = shared.counters(index);
        c.input.fetch_add(1, Ordering::SeqCst);
        match sink.deliver(&record).await {
            Ok(()) => {
                c.out.fetch_add(1, Ordering::SeqCst);
                c.emitted.fetch_add(1, Ordering::SeqCst);
            }
            Err(reason) => {
                c.failed.fetch_add(1, Ordering::SeqCst);
                shared.dead_letter(index, reason, record);
            }
        }
        if let Some(hook) = &settle {
            hook().await;
        }
        shared.add_pending(-1);
    }
}

/// Reports a pipeline's name and stage counters.
pub type StatsSource = Arc<dyn Fn() -> (String, Vec<StageStats>) + Send + Sync>;

/// Serves `GET /status` with the counters of every pipeline as JSON.
pub fn status_router(sources: Vec<StatsSource>) -> axum::Router {
    use axum::routing::get;
    axum::Router::new().route(
        "/status",
        get(move || {
            let sources = sources.clone();
            async move {
                let body: serde_json::Map<String, Value> = sources
                    .iter()
                    .map(|f| {
                        let (name, stats) = f();
                        (name, serde_json::to_value(stats).unwrap_or(Value::Null))
                    })
                    .collect();
                axum::Json(Value::Object(body))
            }
        }),
    )
}

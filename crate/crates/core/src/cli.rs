//! Command-line entry point. Exit codes: 0 success, 1 user error, 2 runtime
//! failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::broker::{AttrFilter, BrokerClient, ClientError, Comparator, TimeWindow};
use crate::feeds::demo::DEMO_START;
use crate::feeds::{generate_demo, DemoSettings};
use crate::history::HistoryEvent;
use crate::model::records::FLIGHT;
use crate::model::{ContextEntity, EntityId, FlightRecord};
use crate::pipeline::{start_pipeline, PipelineConfig, RunContext, SinkSpec, SourceSpec};
use crate::runtime::{Runtime, RuntimeConfig};
use crate::time::{format_wire, parse_timestamp, Timestamp};

#[derive(Debug, Parser)]
#[command(name = "aerotwin", version, about = "Airport turnaround digital twin")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Start every enabled component.
    Run(RunArgs),
    /// Inspect broker or history state.
    Query(QueryArgs),
    /// Push a capture file through a pipeline and write the sink bodies.
    Replay(ReplayArgs),
    /// Write a generated demo scenario.
    Simulate(SimulateArgs),
    /// Report a milestone to the engine.
    Milestone(MilestoneArgs),
    /// Change a turnaround task's status through the engine.
    Task(TaskArgs),
    /// Validate a runtime config and print the effective settings.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(short, long, env = "AEROTWIN_CONFIG")]
    pub config: Option<PathBuf>,
    /// Exit once the scenario has played out.
    #[arg(long)]
    pub until_end: bool,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[command(subcommand)]
    pub target: QueryTarget,
    #[arg(
        long,
        global = true,
        default_value = "http://127.0.0.1:1026",
        env = "AEROTWIN_BROKER"
    )]
    pub broker: String,
    #[arg(
        long,
        global = true,
        default_value = "http://127.0.0.1:8092",
        env = "AEROTWIN_HISTORY"
    )]
    pub history: String,
    /// Print raw JSON instead of a table.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum QueryTarget {
    /// One entity by id.
    Entity {
        #[arg(long)]
        id: String,
    },
    /// Flights, optionally by number and scheduled day (YYYY-MM-DD).
    Flights {
        #[arg(long)]
        number: Option<String>,
        #[arg(long)]
        date: Option<String>,
    },
    /// Recorded changes of one entity in [from, to).
    History {
        #[arg(long)]
        id: String,
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
    },
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub capture: PathBuf,
    #[arg(long)]
    pub pipeline: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub aircraft: usize,
    #[arg(long, default_value = DEMO_START)]
    pub start: String,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MilestoneArgs {
    #[arg(long)]
    pub flight: String,
    #[arg(long)]
    pub milestone: String,
    #[arg(long)]
    pub at: String,
    #[arg(long, default_value = "http://127.0.0.1:8093", env = "AEROTWIN_ENGINE")]
    pub engine: String,
}

#[derive(Debug, Args)]
pub struct TaskArgs {
    #[arg(long)]
    pub id: String,
    #[arg(long)]
    pub status: String,
    #[arg(long, default_value = "http://127.0.0.1:8093", env = "AEROTWIN_ENGINE")]
    pub engine: String,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(short, long, env = "AEROTWIN_CONFIG")]
    pub config: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    User(String),
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::User(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::User(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<ClientError> for CliError {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::NotFound(_) | ClientError::Rejected { .. } => CliError::User(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn user(e: impl std::fmt::Display) -> CliError {
    CliError::User(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn time_arg(name: &str, raw: &str) -> Result<Timestamp, CliError> {
    parse_timestamp(raw).map_err(|_| CliError::User(format!("--{name}: {raw:?} is not a timestamp")))
}

fn id_arg(raw: &str) -> Result<EntityId, CliError> {
    raw.parse().map_err(user)
}

/// Parses arguments, runs the command and maps the outcome to an exit code.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut stdout = std::io::stdout().lock();
    match rt.block_on(execute(cli.command, &mut stdout)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn init_logging(level: &str) {
    let filter = tracing_subscriber::EnvFilter::try_from_env("AEROTWIN_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

pub async fn execute(command: Command, out: &mut impl Write) -> Result<(), CliError> {
    match command {
        Command::Run(args) => run(args, out).await,
        Command::Query(args) => query(args, out).await,
        Command::Replay(args) => replay(args, out).await,
        Command::Simulate(args) => simulate(args, out),
        Command::Milestone(args) => {
            let flight = id_arg(&args.flight)?;
            let body = serde_json::json!({"milestone": args.milestone, "at": args.at});
            let url = format!("{}/flights/{flight}/milestones", args.engine.trim_end_matches('/'));
            let v = post_json(&url, &body).await?;
            writeln!(out, "{v}").map_err(runtime)
        }
        Command::Task(args) => {
            let task = id_arg(&args.id)?;
            let body = serde_json::json!({ "status": args.status });
            let url = format!("{}/tasks/{task}", args.engine.trim_end_matches('/'));
            let v = post_json(&url, &body).await?;
            writeln!(out, "{}", serde_json::to_string_pretty(&v).map_err(runtime)?).map_err(runtime)
        }
        Command::Check(args) => {
            let config = RuntimeConfig::load(args.config.as_deref()).map_err(user)?;
            let text = toml::to_string_pretty(&config).map_err(runtime)?;
            write!(out, "{text}").map_err(runtime)
        }
    }
}

async fn post_json(url: &str, body: &Value) -> Result<Value, CliError> {
    let resp = reqwest::Client::new()
        .post(url)
        .json(body)
        .send()
        .await
        .map_err(|e| CliError::Runtime(format!("{url}: {e}")))?;
    let status = resp.status();
    let v: Value = resp.json().await.unwrap_or(Value::Null);
    if status.is_success() {
        Ok(v)
    } else {
        let detail = v["detail"]
            .as_str()
            .map(str::to_string)
            .unwrap_or_else(|| v.to_string());
        let msg = format!("{status}: {detail}");
        Err(if status.is_client_error() {
            CliError::User(msg)
        } else {
            CliError::Runtime(msg)
        })
    }
}

async fn run(args: RunArgs, out: &mut impl Write) -> Result<(), CliError> {
    let config = RuntimeConfig::load(args.config.as_deref()).map_err(user)?;
    init_logging(&config.log_level);
    let stop_at_end = args.until_end || config.clock.stop_at_end;
    let mut rt = Runtime::start(config).await.map_err(runtime)?;
    for (component, addr) in &rt.addresses {
        tracing::info!(component, %addr, "listening");
    }
    let cancel = rt.cancel_token();
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    if rt.scenario_end().is_some() && (stop_at_end || rt.is_lockstep()) {
        tokio::select! {
            r = rt.run_to_end() => r.map_err(runtime)?,
            _ = ctrl_c => {
                rt.shutdown().await;
                return Ok(());
            }
        }
        summarize(&rt, out)?;
        if stop_at_end {
            rt.shutdown().await;
            return Ok(());
        }
        let _ = tokio::signal::ctrl_c().await;
    } else {
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = cancel.cancelled() => {}
        }
        rt.drain().await;
        summarize(&rt, out)?;
    }
    rt.shutdown().await;
    Ok(())
}

/// Prints entity counts by type and the history checksum.
fn summarize(rt: &Runtime, out: &mut impl Write) -> Result<(), CliError> {
    let mut summary = serde_json::Map::new();
    summary.insert("simulatedTime".into(), format_wire(&rt.clock.now()).into());
    if let Some(b) = &rt.broker {
        let mut by_type = std::collections::BTreeMap::<String, usize>::new();
        for e in b.snapshot() {
            *by_type.entry(e.entity_type).or_default() += 1;
        }
        summary.insert("entities".into(), serde_json::to_value(by_type).map_err(runtime)?);
        summary.insert("changeEvents".into(), b.metrics().change_events.into());
    }
    if let Some(h) = &rt.history {
        summary.insert("historyEvents".into(), h.len().into());
        summary.insert("historyChecksum".into(), h.log_checksum().map_err(runtime)?.into());
    }
    writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(&Value::Object(summary)).map_err(runtime)?
    )
    .map_err(runtime)
}

fn table(out: &mut impl Write, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    writeln!(out, "{}", line(header.to_vec())).map_err(runtime)?;
    for r in rows {
        writeln!(out, "{}", line(r.iter().map(String::as_str).collect())).map_err(runtime)?;
    }
    Ok(())
}

fn or_dash<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_else(|| "-".into())
}

fn flight_row(e: &ContextEntity) -> Vec<String> {
    let f = FlightRecord::from_entity(e).ok();
    let local = |id: Option<&EntityId>| or_dash(id.map(|i| i.local_key().to_string()));
    match f {
        Some(f) => vec![
            f.id.to_string(),
            or_dash(f.flight_number.clone()),
            local(f.departs_from_airport.as_ref()),
            local(f.arrives_to_airport.as_ref()),
            or_dash(f.date_scheduled.as_ref().map(format_wire)),
            or_dash(f.stand_code.clone()),
            or_dash(f.state.map(|s| s.as_str())),
        ],
        None => vec![
            e.id.to_string(),
            "?".into(),
            "".into(),
            "".into(),
            "".into(),
            "".into(),
            "".into(),
        ],
    }
}

async fn query(args: QueryArgs, out: &mut impl Write) -> Result<(), CliError> {
    let client = BrokerClient::new(&args.broker);
    match args.target {
        QueryTarget::Entity { id } => {
            let id = id_arg(&id)?;
            let e = client.get(&id).await?;
            writeln!(out, "{}", e.to_pretty_string()).map_err(runtime)
        }
        QueryTarget::Flights { number, date } => {
            let q: Vec<AttrFilter> = number
                .iter()
                .map(|n| AttrFilter::new("flightNumber", Comparator::Eq, n))
                .collect();
            let window = match &date {
                Some(d) => {
                    let from = time_arg("date", &format!("{d}T00:00:00Z"))?;
                    Some(TimeWindow::between(
                        "dateScheduled",
                        from,
                        from + chrono::Duration::days(1),
                    ))
                }
                None => None,
            };
            let mut flights = client.query(FLIGHT, &q, window.as_ref()).await?;
            flights.sort_by(|a, b| a.id.cmp(&b.id));
            if args.json {
                let docs: Vec<Value> = flights.iter().map(|e| e.to_json()).collect();
                return writeln!(out, "{}", serde_json::to_string_pretty(&docs).map_err(runtime)?).map_err(runtime);
            }
            let rows: Vec<Vec<String>> = flights.iter().map(flight_row).collect();
            table(
                out,
                &["ID", "NUMBER", "FROM", "TO", "SCHEDULED", "STAND", "STATE"],
                &rows,
            )
        }
        QueryTarget::History { id, from, to } => {
            let id = id_arg(&id)?;
            let from = from.map(|f| time_arg("from", &f)).transpose()?;
            let to = to.map(|t| time_arg("to", &t)).transpose()?;
            let events = fetch_history(&args.history, &id, from, to).await?;
            if args.json {
                return writeln!(out, "{}", serde_json::to_string_pretty(&events).map_err(runtime)?).map_err(runtime);
            }
            let rows: Vec<Vec<String>> = events
                .iter()
                .map(|e| {
                    vec![
                        e.sequence.to_string(),
                        format_wire(&e.recorded_at),
                        e.changed_attributes.iter().cloned().collect::<Vec<_>>().join(","),
                    ]
                })
                .collect();
            table(out, &["SEQ", "RECORDED", "CHANGED"], &rows)
        }
    }
}

/// `GET /history/{id}` on a history service.
pub async fn fetch_history(
    base: &str,
    id: &EntityId,
    from: Option<Timestamp>,
    to: Option<Timestamp>,
) -> Result<Vec<HistoryEvent>, CliError> {
    let mut params = Vec::new();
    if let Some(f) = from {
        params.push(("from", format_wire(&f)));
    }
    if let Some(t) = to {
        params.push(("to", format_wire(&t)));
    }
    let url = format!("{}/history/{id}", base.trim_end_matches('/'));
    let resp = reqwest::Client::new()
        .get(&url)
        .query(&params)
        .send()
        .await
        .map_err(|e| CliError::Runtime(format!("{url}: {e}")))?;
    let status = resp.status();
    if !status.is_success() {
        let body: Value = resp.json().await.unwrap_or(Value::Null);
        let msg = format!("{status}: {}", body["detail"].as_str().unwrap_or(""));
        return Err(if status.is_client_error() {
            CliError::User(msg)
        } else {
            CliError::Runtime(msg)
        });
    }
    resp.json().await.map_err(runtime)
}

/// Runs a capture through `pipeline` into `out_dir`. Returns the number of
/// files written.
pub async fn replay_capture(capture: &Path, pipeline: &Path, out_dir: &Path) -> Result<u64, CliError> {
    let mut config = PipelineConfig::load(pipeline).map_err(user)?;
    crate::pipeline::capture::read_capture(capture).map_err(user)?;
    config.source = SourceSpec::Capture {
        path: capture.to_path_buf(),
    };
    config.sink = SinkSpec::Directory {
        path: out_dir.to_path_buf(),
    };
    config.dead_letter = None;
    let handle = start_pipeline(&config, RunContext::default()).map_err(user)?;
    let stats = handle.join().await;
    Ok(stats.last().map_or(0, |s| s.out))
}

async fn replay(args: ReplayArgs, out: &mut impl Write) -> Result<(), CliError> {
    let written = replay_capture(&args.capture, &args.pipeline, &args.out).await?;
    writeln!(out, "{written} file(s) written to {}", args.out.display()).map_err(runtime)
}

fn simulate(args: SimulateArgs, out: &mut impl Write) -> Result<(), CliError> {
    let settings = DemoSettings {
        seed: args.seed,
        aircraft: args.aircraft,
        start: time_arg("start", &args.start)?,
    };
    if args.aircraft == 0 {
        return Err(CliError::User("--aircraft must be at least 1".into()));
    }
    let script = generate_demo(&settings);
    let text = script.to_json_pretty();
    match args.out {
        Some(path) => {
            std::fs::write(&path, format!("{text}\n")).map_err(runtime)?;
            writeln!(out, "{} flight(s) written to {}", script.flights.len(), path.display()).map_err(runtime)
        }
        None => writeln!(out, "{text}").map_err(runtime),
    }
}

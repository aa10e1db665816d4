mod common;

use std::path::Path;
use std::process::Output;
use std::sync::Arc;
use std::time::Duration;

use aerotwin::broker::{BrokerClient, RetryPolicy};
use aerotwin::fixtures;
use aerotwin::history::{self, HistoryEvent, HistoryStore};
use aerotwin::model::{make_entity_id, parse_entity, FlightRecord};
use aerotwin::net::spawn_http;
use aerotwin::runtime::{Runtime, RuntimeConfig};
use aerotwin::time::{parse_timestamp, SimClock};
use common::{config_dir, start_broker};
use serde_json::{json, Value};
use tokio::process::Command;
use tokio_util::sync::CancellationToken;

async fn aerotwin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aerotwin"))
        .args(args)
        .env_remove("AEROTWIN_CONFIG")
        .output()
        .await
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

async fn broker_with_flights() -> String {
    let clock = Arc::new(SimClock::manual(parse_timestamp("2021-02-04T12:00:00Z").unwrap()));
    let (_, addr) = start_broker(clock, RetryPolicy::default()).await;
    let client = BrokerClient::new(&format!("http://{addr}"));
    client
        .upsert(&parse_entity(&serde_json::from_str(&fixtures::expected_flight_document()).unwrap()).unwrap())
        .await
        .unwrap();
    for n in ["1235", "4321"] {
        let mut f = FlightRecord::new(make_entity_id("Flight", n).unwrap());
        f.flight_number = Some(n.into());
        client.upsert(&f.to_entity()).await.unwrap();
    }
    format!("http://{addr}")
}

#[tokio::test]
async fn flights_by_number_gives_one_row() {
    let broker = broker_with_flights().await;
    let o = aerotwin(&["query", "flights", "--number", "1234", "--broker", &broker]).await;
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2, "{text}");
    assert!(lines[0].starts_with("ID"));
    assert!(lines[1].starts_with("urn:ngsi-ld:Flight:flight-1 ") && lines[1].contains("1234"));

    let o = aerotwin(&["query", "flights", "--number", "1234", "--json", "--broker", &broker]).await;
    let docs: Value = serde_json::from_slice(&o.stdout).unwrap();
    let flight_document: Value = serde_json::from_str(&fixtures::expected_flight_document()).unwrap();
    assert_eq!(docs, json!([flight_document]));

    let o = aerotwin(&["query", "flights", "--number", "777", "--broker", &broker]).await;
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[tokio::test]
async fn exit_codes_separate_user_and_runtime_errors() {
    let broker = broker_with_flights().await;
    let o = aerotwin(&[
        "query",
        "entity",
        "--id",
        "urn:ngsi-ld:Flight:flight-none",
        "--broker",
        &broker,
    ])
    .await;
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).to_lowercase().contains("not found"), "{}", stderr(&o));

    let o = aerotwin(&[
        "query",
        "entity",
        "--id",
        "urn:ngsi-ld:Flight:flight-1",
        "--broker",
        &broker,
    ])
    .await;
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim_end(), fixtures::expected_flight_document().trim_end());

    let closed = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap()
    };
    let o = aerotwin(&[
        "query",
        "entity",
        "--id",
        "urn:ngsi-ld:Flight:flight-1",
        "--broker",
        &format!("http://{closed}"),
    ])
    .await;
    assert_eq!(o.status.code(), Some(2));

    assert_eq!(aerotwin(&["query", "entity"]).await.status.code(), Some(1));
    assert_eq!(aerotwin(&["frobnicate"]).await.status.code(), Some(1));
    assert_eq!(aerotwin(&["--help"]).await.status.code(), Some(0));
    let o = aerotwin(&["query", "entity", "--id", "not-a-urn"]).await;
    assert_eq!(o.status.code(), Some(1));
}

#[tokio::test]
async fn history_query_matches_http_api() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(HistoryStore::open(dir.path()).unwrap());
    let doc: Value = serde_json::from_str(&fixtures::expected_aircraft_document()).unwrap();
    let base = parse_timestamp("2021-02-04T16:50:00Z").unwrap();
    for i in 0..8 {
        let mut d = doc.clone();
        d["heading"]["value"] = json!(200 + i);
        store
            .append(
                parse_entity(&d).unwrap(),
                base + chrono::Duration::seconds(10 * i),
                None,
            )
            .unwrap();
    }
    let (addr, _) = spawn_http("127.0.0.1:0", history::router(store), CancellationToken::new())
        .await
        .unwrap();
    let url = format!("http://{addr}");
    let id = doc["id"].as_str().unwrap();
    let (from, to) = ("2021-02-04T16:50:20Z", "2021-02-04T16:51:00Z");

    let api: Value = reqwest::Client::new()
        .get(format!("{url}/history/{id}"))
        .query(&[("from", from), ("to", to)])
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(api.as_array().unwrap().len(), 4);

    let args = [
        "query",
        "history",
        "--id",
        id,
        "--from",
        from,
        "--to",
        to,
        "--history",
        &url,
    ];
    let o = aerotwin(&[&args[..], &["--json"]].concat()).await;
    assert!(o.status.success(), "{}", stderr(&o));
    let cli: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(cli, api);
    let _: Vec<HistoryEvent> = serde_json::from_value(cli).unwrap();

    let o = aerotwin(&args).await;
    assert_eq!(stdout(&o).lines().count(), 1 + 4);
}

fn files_in(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out: Vec<_> = match std::fs::read_dir(dir) {
        Ok(rd) => rd.map(|e| e.unwrap().path()).collect(),
        Err(_) => Vec::new(),
    };
    out.sort();
    out
}

fn pipeline(name: &str) -> String {
    config_dir().join("pipelines").join(name).display().to_string()
}

fn close_enough(got: &Value, want: &Value) -> bool {
    match (got, want) {
        (Value::Number(g), Value::Number(w)) => {
            let (g, w) = (g.as_f64().unwrap(), w.as_f64().unwrap());
            (g - w).abs() <= 1e-6 * w.abs().max(1.0)
        }
        (Value::Object(g), Value::Object(w)) => {
            g.len() == w.len() && w.iter().all(|(k, v)| g.get(k).is_some_and(|x| close_enough(x, v)))
        }
        (Value::Array(g), Value::Array(w)) => g.len() == w.len() && g.iter().zip(w).all(|(a, b)| close_enough(a, b)),
        _ => got == want,
    }
}

#[tokio::test]
async fn replay_writes_golden_documents() {
    let dir = tempfile::tempdir().unwrap();
    let capture = dir.path().join("schedule.json");
    std::fs::write(&capture, fixtures::SCHEDULE_SAMPLE).unwrap();
    let mut written = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = aerotwin(&[
            "replay",
            "--capture",
            &capture.display().to_string(),
            "--pipeline",
            &pipeline("chroma-flights.toml"),
            "--out",
            &out.display().to_string(),
        ])
        .await;
        assert!(o.status.success(), "{}", stderr(&o));
        let files = files_in(&out);
        assert_eq!(files.len(), 1);
        written.push(std::fs::read(&files[0]).unwrap());
    }
    assert_eq!(
        String::from_utf8(written[0].clone()).unwrap(),
        fixtures::expected_flight_document()
    );
    assert_eq!(written[0], written[1]);

    let capture = dir.path().join("frame.json");
    std::fs::write(&capture, fixtures::POSITION_FRAME).unwrap();
    let out = dir.path().join("positions");
    let o = aerotwin(&[
        "replay",
        "--capture",
        &capture.display().to_string(),
        "--pipeline",
        &pipeline("positions.toml"),
        "--out",
        &out.display().to_string(),
    ])
    .await;
    assert!(o.status.success(), "{}", stderr(&o));
    let files = files_in(&out);
    assert_eq!(files.len(), 1);
    let got: Value = serde_json::from_slice(&std::fs::read(&files[0]).unwrap()).unwrap();
    let want: Value = serde_json::from_str(&fixtures::expected_aircraft_document()).unwrap();
    assert!(close_enough(&got, &want), "{got:#}");
}

#[tokio::test]
async fn replay_of_empty_or_malformed_captures() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.ndjson");
    std::fs::write(&empty, "").unwrap();
    let out = dir.path().join("out");
    let o = aerotwin(&[
        "replay",
        "--capture",
        &empty.display().to_string(),
        "--pipeline",
        &pipeline("chroma-flights.toml"),
        "--out",
        &out.display().to_string(),
    ])
    .await;
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("0 file(s)"));
    assert!(files_in(&out).is_empty());

    let bad = dir.path().join("bad.ndjson");
    std::fs::write(&bad, "{\"id\": 1}\n{not json\n").unwrap();
    let o = aerotwin(&[
        "replay",
        "--capture",
        &bad.display().to_string(),
        "--pipeline",
        &pipeline("chroma-flights.toml"),
        "--out",
        &out.display().to_string(),
    ])
    .await;
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    assert!(files_in(&out).is_empty());
}

#[tokio::test]
async fn check_reports_invalid_configs_and_env_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let conf = config_dir().join("aerotwin.toml").display().to_string();
    let o = Command::new(env!("CARGO_BIN_EXE_aerotwin"))
        .args(["check", "--config", &conf])
        .env("AEROTWIN__ENGINE__DELAY_THRESHOLD_SECS", "600")
        .output()
        .await
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let effective: RuntimeConfig = toml::from_str(&stdout(&o)).unwrap();
    assert_eq!(effective.engine.delay_threshold_secs, 600);

    let clash = dir.path().join("clash.toml");
    std::fs::write(
        &clash,
        "[broker]\nlisten = \"127.0.0.1:7000\"\n[history]\nlisten = \"127.0.0.1:7000\"\n[simulator]\nenabled = false\n[pipelines]\nenabled = false\n",
    )
    .unwrap();
    let o = aerotwin(&["check", "--config", &clash.display().to_string()]).await;
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("7000"), "{}", stderr(&o));
}

fn broker_only(dir: &Path, listen: &str) -> RuntimeConfig {
    let text = format!(
        "[broker]\nlisten = \"{listen}\"\n[simulator]\nenabled = false\n[pipelines]\nenabled = false\n\
         [engine]\nenabled = false\n[history]\nenabled = false\ndir = \"{}\"\n",
        dir.join("history").display()
    );
    std::fs::write(dir.join("broker.toml"), &text).unwrap();
    RuntimeConfig::from_toml_with_env(&text, Vec::new()).unwrap()
}

#[tokio::test]
async fn broker_only_config_serves_without_pipelines() {
    let dir = tempfile::tempdir().unwrap();
    let rt = Runtime::start(broker_only(dir.path(), "127.0.0.1:0")).await.unwrap();
    assert_eq!(rt.addresses.keys().copied().collect::<Vec<_>>(), vec!["broker"]);
    assert!(rt.pipelines().is_empty() && rt.engine.is_none() && rt.history.is_none());
    let url = format!("http://{}/entities?type=Flight", rt.addresses["broker"]);
    let r = reqwest::get(&url).await.unwrap();
    assert_eq!(r.status(), 200);
    assert_eq!(r.json::<Value>().await.unwrap(), json!([]));
    rt.shutdown().await;
}

#[tokio::test]
async fn run_command_serves_until_interrupted() {
    let dir = tempfile::tempdir().unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    broker_only(dir.path(), &format!("127.0.0.1:{port}"));
    let child = Command::new(env!("CARGO_BIN_EXE_aerotwin"))
        .args(["run", "--config", &dir.path().join("broker.toml").display().to_string()])
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    let url = format!("http://127.0.0.1:{port}/entities?type=Flight");
    let mut up = false;
    for _ in 0..100 {
        if reqwest::get(&url).await.is_ok_and(|r| r.status() == 200) {
            up = true;
            break;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    assert!(up, "broker never answered");
    let pid = child.id().unwrap().to_string();
    assert!(Command::new("kill")
        .args(["-INT", &pid])
        .status()
        .await
        .unwrap()
        .success());
    let o = tokio::time::timeout(Duration::from_secs(10), child.wait_with_output())
        .await
        .expect("graceful exit")
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["changeEvents"], 0);
}

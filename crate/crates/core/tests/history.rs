mod common;

use std::sync::Arc;
use std::time::Duration;

use aerotwin::feeds::{frames_between, generate_demo, DemoSettings, ScenarioScript};
use aerotwin::history::{self, HistoryEvent, HistoryStore};
use aerotwin::model::{make_entity_id, parse_entity, ContextEntity, FlightRecord};
use aerotwin::net::spawn_http;
use aerotwin::runtime::Runtime;
use aerotwin::time::{format_wire, parse_timestamp, Timestamp};
use common::demo_runtime_config;
use serde_json::{json, Value};
use tokio_util::sync::CancellationToken;

fn t(s: &str) -> Timestamp {
    parse_timestamp(s).unwrap()
}

fn flight(key: &str, gate: &str) -> ContextEntity {
    let mut f = FlightRecord::new(make_entity_id("Flight", key).unwrap());
    f.flight_number = Some(key.into());
    f.gate_code = Some(gate.into());
    f.to_entity()
}

fn payload(id: &str, at: Timestamp, entity: &ContextEntity) -> Value {
    json!({
        "id": id,
        "type": "Notification",
        "subscriptionId": "urn:ngsi-ld:Subscription:1",
        "notifiedAt": format_wire(&at),
        "data": [entity.to_json()],
    })
}

async fn serve(store: Arc<HistoryStore>) -> String {
    let (addr, _) = spawn_http("127.0.0.1:0", history::router(store), CancellationToken::new())
        .await
        .unwrap();
    format!("http://{addr}")
}

#[tokio::test]
async fn http_windows_follow_half_open_rule() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(HistoryStore::open(dir.path()).unwrap());
    let base = serve(store.clone()).await;
    let http = reqwest::Client::new();
    let times = ["2021-02-04T10:00:00Z", "2021-02-04T10:05:00Z", "2021-02-04T10:10:00Z"];
    for (i, at) in times.iter().enumerate() {
        let body = payload(&format!("n{i}"), t(at), &flight("1234", &format!("G{i}")));
        let r = http.post(format!("{base}/notify")).json(&body).send().await.unwrap();
        assert_eq!(r.status(), 204);
    }
    let id = "urn:ngsi-ld:Flight:flight-1234";
    let get = |q: &'static str| {
        let http = http.clone();
        let url = format!("{base}/history/{id}{q}");
        async move {
            let r = http.get(url).send().await.unwrap();
            let status = r.status().as_u16();
            (status, r.json::<Value>().await.unwrap())
        }
    };
    let (_, all) = get("").await;
    let all: Vec<HistoryEvent> = serde_json::from_value(all).unwrap();
    assert_eq!(all.iter().map(|e| e.sequence).collect::<Vec<_>>(), vec![1, 2, 3]);

    let (_, left) = get("?from=2021-02-04T10:00:00Z&to=2021-02-04T10:05:00Z").await;
    let (_, right) = get("?from=2021-02-04T10:05:00Z&to=2021-02-04T10:10:01Z").await;
    assert_eq!(left.as_array().unwrap().len(), 1);
    assert_eq!(right.as_array().unwrap().len(), 2);
    assert_eq!(right[0]["sequence"], 2);

    let (status, empty) = get("?from=2021-02-04T10:05:00Z&to=2021-02-04T10:05:00Z").await;
    assert_eq!((status, empty), (200, json!([])));
    let (status, _) = get("?from=2021-02-04T11:00:00Z&to=2021-02-04T10:00:00Z").await;
    assert_eq!(status, 400);
    let (status, unknown) = http_get(&http, &format!("{base}/history/urn:ngsi-ld:Flight:flight-9")).await;
    assert_eq!((status, unknown), (200, json!([])));
    let (status, _) = http_get(&http, &format!("{base}/history/not-a-urn")).await;
    assert_eq!(status, 400);

    let (_, st) = http_get(&http, &format!("{base}/status")).await;
    assert_eq!(st["events"], 3);
    assert_eq!(st["checksum"], store.log_checksum().unwrap());
}

async fn http_get(http: &reqwest::Client, url: &str) -> (u16, Value) {
    let r = http.get(url).send().await.unwrap();
    (r.status().as_u16(), r.json().await.unwrap_or(Value::Null))
}

#[tokio::test]
async fn storage_failure_is_not_acknowledged() {
    let root = tempfile::tempdir().unwrap();
    let dir = root.path().join("log");
    let store = Arc::new(HistoryStore::open(&dir).unwrap());
    let base = serve(store.clone()).await;
    let http = reqwest::Client::new();
    let first = payload("n1", t("2021-02-04T10:00:00Z"), &flight("1", "A"));
    assert_eq!(
        http.post(format!("{base}/notify"))
            .json(&first)
            .send()
            .await
            .unwrap()
            .status(),
        204
    );

    std::fs::remove_dir_all(&dir).unwrap();
    let second = payload("n2", t("2021-02-04T10:01:00Z"), &flight("1", "B"));
    let r = http.post(format!("{base}/notify")).json(&second).send().await.unwrap();
    assert_eq!(r.status(), 503);
    assert_eq!(store.len(), 1);

    std::fs::create_dir_all(&dir).unwrap();
    for _ in 0..2 {
        let r = http.post(format!("{base}/notify")).json(&second).send().await.unwrap();
        assert_eq!(r.status(), 204);
    }
    assert_eq!(store.len(), 2);
}

#[test]
fn stored_bytes_survive_restart_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let at = t("2021-02-04T10:00:00Z");
    let before = {
        let store = HistoryStore::open(dir.path()).unwrap();
        for i in 0..20 {
            store.append(flight("7", &format!("G{i}")), at, None).unwrap();
        }
        store.segment_checksums().unwrap()
    };
    let segment = dir.path().join(before.keys().next().unwrap());
    let bytes = std::fs::read(&segment).unwrap();

    let store = HistoryStore::open(dir.path()).unwrap();
    assert_eq!(store.segment_checksums().unwrap(), before);
    store.append(flight("7", "last"), at, None).unwrap();
    let grown = std::fs::read(&segment).unwrap();
    assert!(grown.len() > bytes.len());
    assert_eq!(&grown[..bytes.len()], &bytes[..]);
}

#[test]
fn concurrent_readers_see_a_consistent_prefix() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(HistoryStore::open(dir.path()).unwrap());
    let id = make_entity_id("Flight", "42").unwrap();
    let base = t("2021-02-04T10:00:00Z");
    let writes = 300u64;
    std::thread::scope(|s| {
        let writer = s.spawn(|| {
            for i in 0..writes {
                let at = base + chrono::Duration::seconds(i as i64);
                store.append(flight("42", &format!("G{i}")), at, None).unwrap();
            }
        });
        for _ in 0..3 {
            s.spawn(|| {
                let mut last = 0;
                loop {
                    let events = store.query(&id, None, None).unwrap();
                    let seqs: Vec<u64> = events.iter().map(|e| e.sequence).collect();
                    assert_eq!(seqs, (1..=events.len() as u64).collect::<Vec<_>>());
                    for (i, e) in events.iter().enumerate() {
                        let gate = &e.snapshot.to_json()["gateCode"]["value"];
                        assert_eq!(gate, &json!(format!("G{i}")));
                    }
                    assert!(events.len() >= last);
                    last = events.len();
                    if last as u64 == writes {
                        break;
                    }
                    std::thread::sleep(Duration::from_micros(200));
                }
            });
        }
        writer.join().unwrap();
    });
}

fn small_scenario(dir: &std::path::Path) -> (ScenarioScript, std::path::PathBuf) {
    let script = generate_demo(&DemoSettings {
        seed: 3,
        aircraft: 2,
        ..DemoSettings::default()
    });
    let path = dir.join("scenario.json");
    std::fs::write(&path, script.to_json_pretty()).unwrap();
    (script, path)
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn aircraft_history_is_the_simulated_track() {
    let dir = tempfile::tempdir().unwrap();
    let (script, path) = small_scenario(dir.path());
    let mut config = demo_runtime_config(dir.path(), 0.0);
    config.simulator.scenario = Some(path);
    let tick = Duration::from_secs(config.simulator.tick_seconds);
    let mut rt = Runtime::start(config).await.unwrap();
    rt.run_to_end().await.unwrap();
    let base = format!("http://{}", rt.addresses["history"]);

    // Track oracle: every frame the simulator emits that contains this aircraft.
    let hex = script.flights[0].hex();
    let start = script.start_time().unwrap();
    let end = script.end_time().unwrap();
    let expected: Vec<(Timestamp, f64, f64)> = frames_between(&script, start, end, tick)
        .into_iter()
        .filter_map(|(at, frame)| {
            let r = frame.get(&hex)?;
            Some((at, r["lat"].as_f64().unwrap(), r["lon"].as_f64().unwrap()))
        })
        .collect();
    assert!(expected.len() > 10);

    let aircraft = rt
        .broker_state()
        .unwrap()
        .into_iter()
        .find(|e| e.to_json()["adshex"]["value"] == json!(hex))
        .expect("aircraft entity");
    let window = format!(
        "{base}/history/{}?from={}&to={}",
        aircraft.id,
        format_wire(&start),
        format_wire(&(end + chrono::Duration::seconds(1)))
    );
    let events: Vec<HistoryEvent> = reqwest::get(&window).await.unwrap().json().await.unwrap();
    rt.shutdown().await;

    let got: Vec<(Timestamp, f64, f64)> = events
        .iter()
        .map(|e| {
            let doc = e.snapshot.to_json();
            let issued = t(doc["dateIssued"]["value"]["@value"].as_str().unwrap());
            let c = &doc["location"]["value"]["coordinates"];
            (issued, c[0].as_f64().unwrap(), c[1].as_f64().unwrap())
        })
        .collect();
    assert_eq!(got.len(), expected.len());
    for (g, w) in got.iter().zip(&expected) {
        assert_eq!(g.0, w.0);
        assert!((g.1 - w.1).abs() < 1e-9 && (g.2 - w.2).abs() < 1e-9, "{g:?} vs {w:?}");
    }
    // The last snapshot replays to the broker's copy.
    let replayed = history::replay_events(&events).unwrap();
    assert_eq!(parse_entity(&replayed.to_json()).unwrap(), aircraft);
}

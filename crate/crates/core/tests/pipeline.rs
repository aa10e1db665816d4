use std::path::PathBuf;

use aerotwin::fixtures;
use aerotwin::pipeline::{start_pipeline, PipelineConfig, RunContext, SinkSpec, SourceSpec};
use serde_json::{json, Value};

fn bundled(name: &str) -> PipelineConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("config/pipelines")
        .join(name);
    let mut c = PipelineConfig::load(&path).unwrap();
    c.source = SourceSpec::Channel;
    c.sink = SinkSpec::Channel;
    c.dead_letter = None;
    c
}

async fn run_channel(config: &PipelineConfig, inputs: Vec<Value>) -> (Vec<Value>, aerotwin::pipeline::PipelineHandle) {
    let mut handle = start_pipeline(config, RunContext::default()).unwrap();
    let mut out = handle.take_output().unwrap();
    let input = handle.input().unwrap();
    for doc in inputs {
        input.push(doc).await.unwrap();
    }
    drop(input);
    handle.wait_idle().await;
    let mut bodies = Vec::new();
    while let Ok(r) = out.try_recv() {
        bodies.push(r.payload);
    }
    (bodies, handle)
}

#[tokio::test]
async fn chroma_chain_turns_schedule_into_flight_document() {
    let schedule_sample: Value = serde_json::from_str(fixtures::SCHEDULE_SAMPLE).unwrap();
    let (bodies, handle) = run_channel(&bundled("chroma-flights.toml"), vec![schedule_sample]).await;
    assert_eq!(bodies.len(), 1);
    assert_eq!(
        serde_json::to_string_pretty(&bodies[0]).unwrap(),
        fixtures::expected_flight_document().trim_end()
    );
    let stats = handle.stats();
    let route = stats.iter().find(|s| s.kind == "route-on-attribute").unwrap();
    assert_eq!((route.input, route.out, route.dropped), (2, 1, 1));
}

#[tokio::test]
async fn position_chain_turns_frame_into_aircraft_document() {
    let frame_sample: Value = serde_json::from_str(fixtures::POSITION_FRAME).unwrap();
    let (bodies, handle) = run_channel(&bundled("positions.toml"), vec![frame_sample]).await;
    assert_eq!(bodies.len(), 1, "{:?}", handle.dead_letters());
    assert_eq!(
        serde_json::to_string_pretty(&bodies[0]).unwrap(),
        fixtures::expected_aircraft_document().trim_end()
    );
}

#[tokio::test]
async fn stage_counters_conserve_records_and_order_is_kept() {
    let mut flights = Vec::new();
    for i in 0..300u32 {
        let sched = if i % 3 == 0 {
            Value::Null
        } else {
            json!("2021-02-04T17:20:00+00:00")
        };
        flights.push(json!({
            "id": i, "FlightNumber": format!("{}", 1000 + i), "AirlineIATA": "SK",
            "DepartureArrivalType": if i % 2 == 0 { "A" } else { "D" },
            "OriginDestAirportIATA": "SVG", "Registration": "LN-ABC",
            "ScheduledDateTime": sched,
        }));
    }
    // One record that cannot be transformed (bad timestamp).
    flights.push(json!({"id": 999, "FlightNumber": "999", "ScheduledDateTime": "soon"}));
    let chunks: Vec<Value> = flights.chunks(50).map(|c| Value::Array(c.to_vec())).collect();
    let (bodies, handle) = run_channel(&bundled("chroma-flights.toml"), chunks).await;

    let expected: Vec<String> = (0..300u32)
        .filter(|i| i % 3 != 0)
        .map(|i| format!("urn:ngsi-ld:Flight:flight-{i}"))
        .collect();
    let got: Vec<String> = bodies.iter().map(|b| b["id"].as_str().unwrap().to_string()).collect();
    assert_eq!(got, expected);

    for s in handle.stats() {
        assert_eq!(s.input, s.out + s.dropped + s.failed, "{s:?}");
    }
    let dead = handle.dead_letters();
    assert_eq!(dead.len(), 1);
    assert!(dead[0].stage.starts_with("transform"));
}

#[tokio::test]
async fn empty_source_makes_no_sink_calls() {
    let (bodies, handle) = run_channel(&bundled("chroma-flights.toml"), vec![]).await;
    assert!(bodies.is_empty());
    assert!(handle.stats().iter().all(|s| s.input == 0 && s.failed == 0));
}

#[tokio::test]
async fn replay_writes_flight_document_to_directory() {
    let dir = tempfile::tempdir().unwrap();
    let capture = dir.path().join("schedule.json");
    std::fs::write(&capture, fixtures::SCHEDULE_SAMPLE).unwrap();
    let mut c = bundled("chroma-flights.toml");
    c.source = SourceSpec::Capture { path: capture };
    c.sink = SinkSpec::Directory {
        path: dir.path().join("out"),
    };
    let handle = start_pipeline(&c, RunContext::default()).unwrap();
    handle.join().await;
    let written = std::fs::read_to_string(dir.path().join("out/00001.json")).unwrap();
    assert_eq!(written, fixtures::expected_flight_document());
}

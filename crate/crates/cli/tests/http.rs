mod common;

use common::TestServer;
use serde_json::json;
use slicelab::baselines::ControllerKind;
use slicelab::harness::{replay, ScenarioConfig};
use slicelab_cli::serve::ServeOptions;

fn paused(dilation: f64) -> ServeOptions {
    ServeOptions {
        dilation,
        start_paused: true,
    }
}

#[test]
fn stream_emits_one_event_per_simulated_second() {
    let cfg = ScenarioConfig::reference().with_duration(10);
    let server = TestServer::start(cfg, paused(0.0));
    let stream = server.subscribe();
    let (status, body) = server.post("/v1/resume", json!({}));
    assert_eq!(status, 200);
    assert_eq!(body["paused"], false);
    let batches = stream.collect_batches();
    assert_eq!(batches.len(), 10);
    for (i, b) in batches.iter().enumerate() {
        assert_eq!(b.len(), 4);
        assert!(b.iter().all(|r| r.t == (i + 1) as f64));
    }
    let log = server.finish();
    assert_eq!(log.of_kind(slicelab::sim::EventKind::Kpm).count(), 40);
}

#[test]
fn intents_round_trip_and_the_session_replays() {
    let cfg = ScenarioConfig::reference().with_duration(90);
    let server = TestServer::start(cfg.clone(), paused(60.0));

    let (status, body) = server.intent("promote slice 4 to VIP");
    assert_eq!(status, 409);
    assert_eq!(body["error"], "paused");

    let (_, before) = server.get("/v1/policy");
    assert_eq!(before["version"], 1);
    server.post("/v1/resume", json!({}));

    let (status, body) = server.intent("promote slice 4 to VIP");
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["ack"]["policy_version"], 2);
    assert_eq!(body["policy"]["version"], 2);
    let (_, policy) = server.get("/v1/policy");
    assert_eq!(policy["version"], 2);
    assert_eq!(policy["intent_tag"], "promote_slice:4");

    let (status, body) = server.intent("make slice 4 faster");
    assert_eq!(status, 422);
    assert_eq!(body["error"], "grammar");
    assert_eq!(body["grammar"]["grammar"].as_array().unwrap().len(), 4);

    let (status, body) = server.intent("set weight of slice 3 to 0");
    assert_eq!(status, 422, "{body}");
    assert_eq!(body["error"], "guardrail");
    assert!(!body["report"]["violations"].as_array().unwrap().is_empty());

    let (status, report) = server.get("/v1/report");
    assert_eq!(status, 200);
    assert!(report["elapsed_s"].as_f64().unwrap() > 0.0);

    let log = server.finish();
    let r = replay(&cfg, &log).unwrap();
    assert!(r.matches, "diverged at {:?}", r.first_divergence);
    assert_eq!(r.intents.len(), 3);
}

#[test]
fn governance_and_pause_report_state() {
    let cfg = ScenarioConfig::reference().with_duration(40);
    let server = TestServer::start(cfg, paused(0.0));
    let (status, g) = server.get("/v1/governance");
    assert_eq!(status, 200);
    assert_eq!(g["catalog"]["entries"][0]["model_id"], "wpfm");
    assert_eq!(g["lifecycle"]["stage"], "initial");
    let (_, s) = server.post("/v1/pause", json!({}));
    assert_eq!(s["paused"], true);
    assert_eq!(s["t"], 0);
    let stream = server.subscribe();
    server.post("/v1/resume", json!({}));
    assert_eq!(stream.collect_batches().len(), 40);
    let log = server.finish();
    assert!(log.of_kind(slicelab::sim::EventKind::Governance).count() > 0);
}

#[test]
fn baseline_sessions_have_no_strategic_endpoints() {
    let mut cfg = ScenarioConfig::reference().with_duration(5);
    cfg.controller = ControllerKind::Heuristic;
    let server = TestServer::start(cfg, paused(0.0));
    assert_eq!(server.get("/v1/policy").0, 404);
    assert_eq!(server.get("/v1/governance").0, 404);
    server.post("/v1/resume", json!({}));
    let (status, body) = server.intent("promote slice 4 to VIP");
    assert_eq!(status, 409);
    assert!(body["error"] == "no_strategic_tier" || body["error"] == "finished");
    let log = server.finish();
    assert_eq!(log.of_kind(slicelab::sim::EventKind::Intent).count(), 0);
}

#[test]
fn finished_runs_refuse_commands_but_keep_serving_reads() {
    let cfg = ScenarioConfig::reference().with_duration(3);
    let server = TestServer::start(
        cfg,
        ServeOptions {
            dilation: 0.0,
            start_paused: false,
        },
    );
    let deadline = std::time::Instant::now() + std::time::Duration::from_secs(30);
    while server.get("/v1/report").1["elapsed_s"] != 3.0 {
        assert!(std::time::Instant::now() < deadline);
        std::thread::sleep(std::time::Duration::from_millis(20));
    }
    std::thread::sleep(std::time::Duration::from_millis(50));
    let (status, body) = server.intent("promote slice 4 to VIP");
    assert_eq!(status, 409);
    assert_eq!(body["error"], "finished");
    assert_eq!(server.post("/v1/resume", json!({})).0, 409);
    assert!(server.subscribe().collect_batches().is_empty());
    assert_eq!(server.get("/v1/policy").1["version"], 1);
    server.finish();
}

#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::thread::JoinHandle;

use serde_json::Value;
use slicelab::domain::KpmRecord;
use slicelab::harness::{HarnessError, ScenarioConfig};
use slicelab::sim::EventLog;
use slicelab_cli::serve::{self, ServeOptions};

/// A live run bound to an ephemeral local port.
pub struct TestServer {
    pub base: String,
    runtime: tokio::runtime::Runtime,
    join: Option<JoinHandle<Result<EventLog, HarnessError>>>,
    agent: ureq::Agent,
}

impl TestServer {
    pub fn start(config: ScenarioConfig, options: ServeOptions) -> Self {
        let runtime = tokio::runtime::Runtime::new().unwrap();
        let live = serve::start(config, options).unwrap();
        let listener = runtime
            .block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))
            .unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let router = live.router;
        runtime.spawn(async move { axum::serve(listener, router).await });
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base,
            runtime,
            join: Some(live.join),
            agent,
        }
    }

    pub fn get(&self, path: &str) -> (u16, Value) {
        let mut r = self
            .agent
            .get(&format!("{}{path}", self.base))
            .call()
            .unwrap();
        let status = r.status().as_u16();
        (
            status,
            serde_json::from_str(&r.body_mut().read_to_string().unwrap()).unwrap(),
        )
    }

    pub fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let mut r = self
            .agent
            .post(&format!("{}{path}", self.base))
            .header("content-type", "application/json")
            .send(body.to_string())
            .unwrap();
        let status = r.status().as_u16();
        (
            status,
            serde_json::from_str(&r.body_mut().read_to_string().unwrap()).unwrap(),
        )
    }

    pub fn intent(&self, utterance: &str) -> (u16, Value) {
        self.post("/v1/intent", serde_json::json!({ "utterance": utterance }))
    }

    /// Opens the KPM stream; returns once the subscription is registered.
    pub fn subscribe(&self) -> KpmStream {
        let r = self
            .agent
            .get(&format!("{}/v1/kpm/stream", self.base))
            .call()
            .unwrap();
        assert_eq!(r.status().as_u16(), 200);
        assert!(r.headers()["content-type"]
            .to_str()
            .unwrap()
            .starts_with("text/event-stream"));
        KpmStream {
            reader: Box::new(BufReader::new(r.into_body().into_reader())),
        }
    }

    /// Waits for the run to finish and returns its event log.
    pub fn finish(mut self) -> EventLog {
        let log = self.join.take().unwrap().join().unwrap().unwrap();
        self.runtime.shutdown_background();
        log
    }
}

pub struct KpmStream {
    reader: Box<dyn BufRead + Send>,
}

impl KpmStream {
    /// Every KPM batch until the server ends the stream.
    pub fn collect_batches(mut self) -> Vec<Vec<KpmRecord>> {
        let mut out = Vec::new();
        let mut event = String::new();
        let mut line = String::new();
        loop {
            line.clear();
            if self.reader.read_line(&mut line).unwrap() == 0 {
                return out;
            }
            let l = line.trim_end();
            if let Some(name) = l.strip_prefix("event: ") {
                event = name.to_string();
            } else if let Some(data) = l.strip_prefix("data: ") {
                assert_eq!(event, "kpm");
                out.push(serde_json::from_str(data).unwrap());
            }
        }
    }
}

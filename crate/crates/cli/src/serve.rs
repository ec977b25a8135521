//! Live run with an HTTP control surface.
//!
//! The simulation loop owns the [`Session`] on its own thread. HTTP
//! handlers reach it only through one ordered command queue (intents,
//! pause, resume); KPM batches fan out to SSE subscribers over a broadcast
//! channel, and read-only snapshots of the policy, governance state and
//! metrics are refreshed after every simulated second.

use std::convert::Infallible;
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, RwLock};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use slicelab::domain::{KpmRecord, PolicyObject};
use slicelab::governance::GovernanceView;
use slicelab::harness::{HarnessError, IntentOutcome, MetricsReport, ScenarioConfig, Session};
use slicelab::sim::EventLog;
use slicelab::strategic::IntentError;
use tokio::sync::{broadcast, oneshot};

/// How long an intent request waits for the loop to apply it.
const INTENT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone)]
pub struct ServeOptions {
    /// Simulated seconds per wall-clock second; 0 runs as fast as possible.
    pub dilation: f64,
    /// Hold the loop before the first second until a resume command.
    pub start_paused: bool,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self {
            dilation: 1.0,
            start_paused: false,
        }
    }
}

/// Body of `POST /v1/intent`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntentRequest {
    pub utterance: String,
}

/// Run state returned by pause and resume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStatus {
    pub t: u64,
    pub duration_s: u64,
    pub paused: bool,
    pub finished: bool,
}

#[derive(Clone)]
enum Tick {
    Batch(Arc<Vec<KpmRecord>>),
    End,
}

enum IntentReply {
    Applied(Box<(IntentOutcome, Option<PolicyObject>)>),
    Unavailable(&'static str, String),
}

enum Command {
    Intent(String, oneshot::Sender<IntentReply>),
    Pause(oneshot::Sender<RunStatus>),
    Resume(oneshot::Sender<RunStatus>),
}

struct Snapshot {
    status: RunStatus,
    policy: Option<PolicyObject>,
    governance: Option<GovernanceView>,
    report: MetricsReport,
}

#[derive(Clone)]
struct AppState {
    commands: mpsc::Sender<Command>,
    ticks: broadcast::Sender<Tick>,
    snapshot: Arc<RwLock<Snapshot>>,
}

/// A started live run: the router to mount and the loop thread, which
/// yields the finished event log.
pub struct LiveRun {
    pub router: Router,
    pub join: JoinHandle<Result<EventLog, HarnessError>>,
}

/// Builds the session, starts its loop thread and returns the HTTP router.
pub fn start(config: ScenarioConfig, options: ServeOptions) -> Result<LiveRun, HarnessError> {
    let session = Session::new(config)?;
    let snapshot = Arc::new(RwLock::new(snapshot_of(&session, options.start_paused)));
    let (commands, rx) = mpsc::channel();
    let (ticks, _) = broadcast::channel(1024);
    let state = AppState {
        commands,
        ticks: ticks.clone(),
        snapshot: Arc::clone(&snapshot),
    };
    let join = std::thread::Builder::new()
        .name("slicelab-sim".into())
        .spawn(move || SimLoop::new(session, options, rx, ticks, snapshot).run())
        .map_err(|e| HarnessError::Io(e.to_string()))?;
    Ok(LiveRun {
        router: router(state),
        join,
    })
}

fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/kpm/stream", get(kpm_stream))
        .route("/v1/intent", post(submit_intent))
        .route("/v1/policy", get(current_policy))
        .route("/v1/governance", get(current_governance))
        .route("/v1/report", get(current_report))
        .route("/v1/pause", post(pause))
        .route("/v1/resume", post(resume))
        .with_state(state)
}

fn snapshot_of(session: &Session, paused: bool) -> Snapshot {
    Snapshot {
        status: RunStatus {
            t: session.now(),
            duration_s: session.config().duration_s,
            paused,
            finished: session.finished(),
        },
        policy: session.policy().cloned(),
        governance: session.governance(),
        report: session.report(),
    }
}

struct Waiting {
    from: usize,
    t: f64,
    utterance: String,
    reply: oneshot::Sender<IntentReply>,
}

struct SimLoop {
    session: Session,
    options: ServeOptions,
    rx: mpsc::Receiver<Command>,
    ticks: broadcast::Sender<Tick>,
    snapshot: Arc<RwLock<Snapshot>>,
    paused: bool,
    waiting: Vec<Waiting>,
    anchor: (Instant, u64),
}

impl SimLoop {
    fn new(
        session: Session,
        options: ServeOptions,
        rx: mpsc::Receiver<Command>,
        ticks: broadcast::Sender<Tick>,
        snapshot: Arc<RwLock<Snapshot>>,
    ) -> Self {
        let paused = options.start_paused;
        Self {
            anchor: (Instant::now(), session.now()),
            session,
            options,
            rx,
            ticks,
            snapshot,
            paused,
            waiting: Vec::new(),
        }
    }

    fn status(&self) -> RunStatus {
        RunStatus {
            t: self.session.now(),
            duration_s: self.session.config().duration_s,
            paused: self.paused,
            finished: self.session.finished(),
        }
    }

    fn handle(&mut self, cmd: Command) {
        match cmd {
            Command::Intent(utterance, reply) => {
                if self.paused {
                    let _ = reply.send(IntentReply::Unavailable(
                        "paused",
                        "the run is paused; resume before submitting".into(),
                    ));
                    return;
                }
                let from = self.session.outcomes().len();
                match self.session.queue_intent(&utterance) {
                    Ok(t) => self.waiting.push(Waiting {
                        from,
                        t,
                        utterance,
                        reply,
                    }),
                    Err(e) => {
                        let _ = reply
                            .send(IntentReply::Unavailable("no_strategic_tier", e.to_string()));
                    }
                }
            }
            Command::Pause(reply) => {
                self.paused = true;
                self.publish_status();
                let _ = reply.send(self.status());
            }
            Command::Resume(reply) => {
                if self.paused {
                    self.paused = false;
                    self.anchor = (Instant::now(), self.session.now());
                }
                self.publish_status();
                let _ = reply.send(self.status());
            }
        }
    }

    fn publish_status(&self) {
        let status = self.status();
        self.snapshot.write().expect("snapshot lock").status = status;
    }

    /// Waits for a command while paused or until the next second is due.
    /// Returns false once every handle to the queue is gone.
    fn wait(&mut self) -> bool {
        loop {
            let cmd = if self.paused {
                match self.rx.recv() {
                    Ok(c) => c,
                    Err(_) => return false,
                }
            } else {
                let due = if self.options.dilation > 0.0 {
                    let (at, t0) = self.anchor;
                    at + Duration::from_secs_f64(
                        (self.session.now() + 1 - t0) as f64 / self.options.dilation,
                    )
                } else {
                    Instant::now()
                };
                match self
                    .rx
                    .recv_timeout(due.saturating_duration_since(Instant::now()))
                {
                    Ok(c) => c,
                    Err(RecvTimeoutError::Timeout) => return true,
                    Err(RecvTimeoutError::Disconnected) => return false,
                }
            };
            self.handle(cmd);
            while let Ok(c) = self.rx.try_recv() {
                self.handle(c);
            }
        }
    }

    fn run(mut self) -> Result<EventLog, HarnessError> {
        while !self.session.finished() {
            if !self.wait() {
                break;
            }
            let batch = self.session.step()?;
            self.resolve_intents();
            *self.snapshot.write().expect("snapshot lock") =
                snapshot_of(&self.session, self.paused);
            let _ = self.ticks.send(Tick::Batch(Arc::new(batch)));
        }
        self.session.run_to_end()?;
        self.resolve_intents();
        *self.snapshot.write().expect("snapshot lock") = snapshot_of(&self.session, self.paused);
        let _ = self.ticks.send(Tick::End);
        Ok(self.session.into_output().log)
    }

    fn resolve_intents(&mut self) {
        let outcomes = self.session.outcomes();
        let policy = self.session.policy().cloned();
        let mut claimed = Vec::new();
        let mut still = Vec::new();
        for w in self.waiting.drain(..) {
            let found = (w.from..outcomes.len()).find(|&i| {
                !claimed.contains(&i)
                    && outcomes[i].t == w.t
                    && outcomes[i].utterance == w.utterance
            });
            match found {
                Some(i) => {
                    claimed.push(i);
                    let _ = w.reply.send(IntentReply::Applied(Box::new((
                        outcomes[i].clone(),
                        policy.clone(),
                    ))));
                }
                None => still.push(w),
            }
        }
        self.waiting = still;
    }
}

fn error_body(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    (
        status,
        Json(json!({"error": code, "message": message.into()})),
    )
        .into_response()
}

async fn kpm_stream(
    State(state): State<AppState>,
) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = state.ticks.subscribe();
    let finished = state
        .snapshot
        .read()
        .expect("snapshot lock")
        .status
        .finished;
    let events = stream::unfold((rx, finished), |(mut rx, done)| async move {
        if done {
            return None;
        }
        loop {
            match rx.recv().await {
                Ok(Tick::Batch(batch)) => {
                    let t = batch.first().map_or(0.0, |r| r.t);
                    let event = Event::default()
                        .event("kpm")
                        .id(format!("{t}"))
                        .json_data(&*batch)
                        .expect("KPM batch serializes");
                    return Some((Ok(event), (rx, false)));
                }
                Ok(Tick::End) | Err(broadcast::error::RecvError::Closed) => return None,
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
            }
        }
    });
    Sse::new(events).keep_alive(KeepAlive::default())
}

fn rejection_body(outcome: &IntentOutcome, err: &IntentError) -> Value {
    let mut body = json!({
        "t": outcome.t,
        "utterance": outcome.utterance,
        "message": err.to_string(),
    });
    let (code, key, detail) = match err {
        IntentError::Grammar(g) => ("grammar", "grammar", serde_json::to_value(g)),
        IntentError::Refused(r) => ("guardrail", "report", serde_json::to_value(r)),
        IntentError::Budget(r) => ("update_budget", "report", serde_json::to_value(r)),
        IntentError::Precheck(p) => ("precheck", "precheck", serde_json::to_value(p)),
    };
    body["error"] = json!(code);
    body[key] = detail.expect("rejection detail serializes");
    body
}

async fn submit_intent(State(state): State<AppState>, Json(req): Json<IntentRequest>) -> Response {
    let (tx, rx) = oneshot::channel();
    if state
        .commands
        .send(Command::Intent(req.utterance, tx))
        .is_err()
    {
        return error_body(StatusCode::CONFLICT, "finished", "the run has finished");
    }
    match tokio::time::timeout(INTENT_TIMEOUT, rx).await {
        Err(_) => error_body(
            StatusCode::GATEWAY_TIMEOUT,
            "timeout",
            "the intent was not applied in time",
        ),
        Ok(Err(_)) => error_body(
            StatusCode::CONFLICT,
            "finished",
            "the run finished before the intent was applied",
        ),
        Ok(Ok(IntentReply::Unavailable(code, message))) => {
            error_body(StatusCode::CONFLICT, code, message)
        }
        Ok(Ok(IntentReply::Applied(applied))) => {
            let (outcome, policy) = *applied;
            match &outcome.result {
                Ok(ack) => (
                    StatusCode::OK,
                    Json(json!({
                        "t": outcome.t,
                        "utterance": outcome.utterance,
                        "ack": ack,
                        "policy": policy,
                    })),
                )
                    .into_response(),
                Err(e) => (
                    StatusCode::UNPROCESSABLE_ENTITY,
                    Json(rejection_body(&outcome, e)),
                )
                    .into_response(),
            }
        }
    }
}

async fn current_policy(State(state): State<AppState>) -> Response {
    match &state.snapshot.read().expect("snapshot lock").policy {
        Some(p) => Json(p.clone()).into_response(),
        None => error_body(
            StatusCode::NOT_FOUND,
            "no_strategic_tier",
            "this controller has no policy",
        ),
    }
}

async fn current_governance(State(state): State<AppState>) -> Response {
    match &state.snapshot.read().expect("snapshot lock").governance {
        Some(g) => Json(g.clone()).into_response(),
        None => error_body(
            StatusCode::NOT_FOUND,
            "no_strategic_tier",
            "this controller has no governance loop",
        ),
    }
}

async fn current_report(State(state): State<AppState>) -> Json<MetricsReport> {
    Json(state.snapshot.read().expect("snapshot lock").report.clone())
}

async fn control(state: AppState, make: fn(oneshot::Sender<RunStatus>) -> Command) -> Response {
    let (tx, rx) = oneshot::channel();
    if state.commands.send(make(tx)).is_ok() {
        if let Ok(status) = rx.await {
            return Json(status).into_response();
        }
    }
    let status = state.snapshot.read().expect("snapshot lock").status.clone();
    (StatusCode::CONFLICT, Json(status)).into_response()
}

async fn pause(State(state): State<AppState>) -> Response {
    control(state, Command::Pause).await
}

async fn resume(State(state): State<AppState>) -> Response {
    control(state, Command::Resume).await
}

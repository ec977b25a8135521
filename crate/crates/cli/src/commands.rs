//! The `slicelab` verbs: validate, run, compare, serve and replay.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use slicelab::baselines::ControllerKind;
use slicelab::harness::{compare, replay, run, HarnessError, ScenarioConfig};
use slicelab::sim::EventLog;
use thiserror::Error;

use crate::serve::{self, ServeOptions};

#[derive(Debug, Parser)]
#[command(
    name = "slicelab",
    version,
    about = "Sliced-RAN simulator with an agentic control plane"
)]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
}

/// Scenario selection plus the common overrides.
#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioArgs {
    /// Scenario file (TOML); the bundled reference scenario when omitted.
    pub scenario: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the run length in simulated seconds.
    #[arg(long)]
    pub duration: Option<u64>,
    /// Override the controller.
    #[arg(long)]
    pub controller: Option<ControllerKind>,
}

impl ScenarioArgs {
    pub fn load(&self) -> Result<ScenarioConfig, CliError> {
        let mut cfg = match &self.scenario {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::reference(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(d) = self.duration {
            cfg = cfg.with_duration(d);
        }
        if let Some(k) = self.controller {
            cfg.controller = k;
        }
        cfg.validate().map_err(HarnessError::from)?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Check a scenario file and report the first problem found.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Run a scenario to completion.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Write the JSONL event log here.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Write the JSON metrics report here instead of standard output.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the same scenario under several controllers.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Comma-separated controllers; all four when omitted.
        #[arg(long, value_delimiter = ',')]
        controllers: Vec<ControllerKind>,
        /// Write the comparison table as CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run live with the HTTP control surface.
    Serve {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Simulated seconds per wall-clock second (0 = as fast as possible);
        /// defaults to the scenario's value or 1.
        #[arg(long)]
        dilation: Option<f64>,
        /// Start paused until `POST /v1/resume`.
        #[arg(long)]
        paused: bool,
        /// Write the JSONL event log here when the run finishes.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Stop serving as soon as the run finishes.
        #[arg(long)]
        exit_on_finish: bool,
    },
    /// Re-run a recorded log from its scenario and compare digests.
    Replay {
        /// JSONL event log recorded by `run` or `serve`.
        recorded: PathBuf,
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("{0}")]
    Io(String),
    #[error("replay diverged at event {index:?}: recorded {recorded}, replayed {replayed}")]
    ReplayMismatch {
        index: Option<usize>,
        recorded: String,
        replayed: String,
    },
}

impl CliError {
    /// Process exit status: 2 for unusable input, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Harness(
                HarnessError::Config(_) | HarnessError::Parse(_) | HarnessError::Log(_),
            ) => 2,
            _ => 1,
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Io(e.to_string()))
}

/// Executes one verb, writing human output to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.verb {
        Verb::Validate { scenario } => {
            let cfg = scenario.load()?;
            emit(
                out,
                &format!(
                    "ok: {} ({} slices, {} flows, {} s, controller {})\n",
                    cfg.name,
                    cfg.slices.len(),
                    cfg.flows.len(),
                    cfg.duration_s,
                    cfg.controller.as_str()
                ),
            )
        }
        Verb::Run {
            scenario,
            log,
            report,
        } => {
            let cfg = scenario.load()?;
            let output = run(&cfg)?;
            if let Some(path) = &log {
                write_file(path, &output.log.to_jsonl())?;
            }
            let json = serde_json::to_string_pretty(&output.report).expect("report serializes");
            match &report {
                Some(path) => {
                    write_file(path, &json)?;
                    emit(
                        out,
                        &format!(
                            "{} {} digest {}\n",
                            cfg.name,
                            cfg.controller.as_str(),
                            output.report.digest
                        ),
                    )
                }
                None => emit(out, &format!("{json}\n")),
            }
        }
        Verb::Compare {
            scenario,
            controllers,
            csv,
        } => {
            let cfg = scenario.load()?;
            let kinds = if controllers.is_empty() {
                ControllerKind::ALL.to_vec()
            } else {
                controllers
            };
            let table = compare(&cfg, &kinds)?;
            if let Some(path) = &csv {
                write_file(path, &table.to_csv())?;
            }
            emit(out, &table.to_pretty())
        }
        Verb::Serve {
            scenario,
            addr,
            dilation,
            paused,
            log,
            exit_on_finish,
        } => {
            let cfg = scenario.load()?;
            let options = ServeOptions {
                dilation: dilation.or(cfg.time_dilation).unwrap_or(1.0),
                start_paused: paused,
            };
            let runtime =
                tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
            runtime.block_on(serve_until_done(cfg, options, addr, log, exit_on_finish))
        }
        Verb::Replay { recorded, scenario } => {
            let cfg = scenario.load()?;
            let text = std::fs::read_to_string(&recorded)
                .map_err(|e| CliError::Io(format!("{}: {e}", recorded.display())))?;
            let log = EventLog::from_jsonl(&text).map_err(HarnessError::from)?;
            let result = replay(&cfg, &log)?;
            if !result.matches {
                return Err(CliError::ReplayMismatch {
                    index: result.first_divergence,
                    recorded: result.recorded_digest,
                    replayed: result.replayed_digest,
                });
            }
            emit(
                out,
                &format!(
                    "replay matches: {} events, {} intents, digest {}\n",
                    log.len(),
                    result.intents.len(),
                    result.replayed_digest
                ),
            )
        }
    }
}

async fn serve_until_done(
    cfg: ScenarioConfig,
    options: ServeOptions,
    addr: SocketAddr,
    log_path: Option<PathBuf>,
    exit_on_finish: bool,
) -> Result<(), CliError> {
    let live = serve::start(cfg, options)?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| CliError::Io(format!("{addr}: {e}")))?;
    log::info!(
        "serving on http://{}",
        listener
            .local_addr()
            .map_err(|e| CliError::Io(e.to_string()))?
    );
    let server = tokio::spawn(async move { axum::serve(listener, live.router).await });
    let join = live.join;
    let finished = tokio::task::spawn_blocking(move || join.join());
    tokio::select! {
        done = finished => {
            let log = done
                .map_err(|e| CliError::Io(e.to_string()))?
                .map_err(|_| CliError::Io("simulation thread panicked".into()))??;
            log::info!("run finished, digest {}", log.digest());
            if let Some(path) = &log_path {
                write_file(path, &log.to_jsonl())?;
                log::info!("event log written to {}", path.display());
            }
            if !exit_on_finish {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
        _ = tokio::signal::ctrl_c() => {}
    }
    server.abort();
    Ok(())
}

use std::time::{Duration, Instant};

use thiserror::Error;

/// Environment variable that overrides the configured bridge URL.
pub const BRIDGE_URL_ENV: &str = "SLICELAB_BRIDGE_URL";

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectorReply {
    pub body: String,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransportFailure {
    #[error("deadline exceeded after {elapsed_ms} ms")]
    Timeout { elapsed_ms: f64 },
    #[error("transport: {detail}")]
    Transport { detail: String, elapsed_ms: f64 },
}

/// Carries one serialized request to an agent and returns its raw reply.
pub trait Connector: Send {
    fn exchange(
        &mut self,
        body: &str,
        deadline_ms: u64,
    ) -> Result<ConnectorReply, TransportFailure>;
}

/// POSTs requests to `{url}/v1/decide`. No retries.
pub struct HttpConnector {
    url: String,
}

impl HttpConnector {
    pub fn new(base_url: &str) -> Self {
        Self {
            url: format!("{}/v1/decide", base_url.trim_end_matches('/')),
        }
    }

    /// The URL from [`BRIDGE_URL_ENV`] if set, else `configured`.
    pub fn from_config(configured: Option<&str>) -> Option<Self> {
        std::env::var(BRIDGE_URL_ENV)
            .ok()
            .filter(|u| !u.trim().is_empty())
            .or_else(|| configured.map(str::to_string))
            .map(|u| Self::new(&u))
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl Connector for HttpConnector {
    fn exchange(
        &mut self,
        body: &str,
        deadline_ms: u64,
    ) -> Result<ConnectorReply, TransportFailure> {
        let start = Instant::now();
        let elapsed = |s: Instant| s.elapsed().as_secs_f64() * 1000.0;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(deadline_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        let result = agent
            .post(&self.url)
            .header("content-type", "application/json")
            .send(body)
            .and_then(|mut r| {
                let status = r.status();
                r.body_mut().read_to_string().map(|b| (status, b))
            });
        match result {
            Ok((status, body)) if status.is_success() => Ok(ConnectorReply {
                body,
                elapsed_ms: elapsed(start),
            }),
            Ok((status, _)) => Err(TransportFailure::Transport {
                detail: format!("HTTP {status}"),
                elapsed_ms: elapsed(start),
            }),
            Err(ureq::Error::Timeout(_)) => Err(TransportFailure::Timeout {
                elapsed_ms: elapsed(start),
            }),
            Err(e) => Err(TransportFailure::Transport {
                detail: e.to_string(),
                elapsed_ms: elapsed(start),
            }),
        }
    }
}

/// In-process connector backed by a closure; the closure returns the reply
/// body and the virtual milliseconds it took.
pub struct FnConnector<F>(pub F);

impl<F> Connector for FnConnector<F>
where
    F: FnMut(&str) -> Result<(String, f64), TransportFailure> + Send,
{
    fn exchange(
        &mut self,
        body: &str,
        deadline_ms: u64,
    ) -> Result<ConnectorReply, TransportFailure> {
        let (reply, elapsed_ms) = (self.0)(body)?;
        if elapsed_ms > deadline_ms as f64 {
            return Err(TransportFailure::Timeout { elapsed_ms });
        }
        Ok(ConnectorReply {
            body: reply,
            elapsed_ms,
        })
    }
}

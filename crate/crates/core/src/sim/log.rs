//! Ordered run log, serialized as line-delimited JSON and sealed by a
//! SHA-256 digest line.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::domain::SliceId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Arrivals,
    Drops,
    Tti,
    Kpm,
    Allocation,
    AllocationDiscarded,
    AllocationDeferred,
    AllocationHeld,
    Policy,
    PolicyRefused,
    Intent,
    IntentRejected,
    Anomaly,
    Directive,
    Precheck,
    Registry,
    Governance,
    Bridge,
    Digest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub slice_id: Option<SliceId>,
    pub payload: Value,
}

/// How much per-TTI detail the simulator records.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogDetail {
    /// Per-flow arrivals and drops aggregated per simulated second.
    #[default]
    Summary,
    /// Additionally one `tti` event per slice per TTI with grants and service.
    Tti,
}

#[derive(Debug, Clone, Default)]
pub struct EventLog {
    events: Vec<Event>,
    pub detail: LogDetail,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("log has no digest line")]
    MissingDigest,
    #[error("digest mismatch: recorded {recorded}, recomputed {computed}")]
    DigestMismatch { recorded: String, computed: String },
}

impl EventLog {
    pub fn new(detail: LogDetail) -> Self {
        Self {
            events: Vec::new(),
            detail,
        }
    }

    pub fn push(
        &mut self,
        t: f64,
        kind: EventKind,
        slice_id: Option<SliceId>,
        payload: impl Serialize,
    ) {
        let payload = serde_json::to_value(payload).expect("event payload serializes");
        self.events.push(Event {
            t,
            kind,
            slice_id,
            payload,
        });
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    fn lines(&self) -> impl Iterator<Item = String> + '_ {
        self.events
            .iter()
            .map(|e| serde_json::to_string(e).expect("event serializes"))
    }

    /// Hex SHA-256 over every event line (each terminated by `\n`).
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for line in self.lines() {
            h.update(line.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for line in self.lines() {
            out.push_str(&line);
            out.push('\n');
        }
        let last_t = self.events.last().map_or(0.0, |e| e.t);
        let seal = Event {
            t: last_t,
            kind: EventKind::Digest,
            slice_id: None,
            payload: serde_json::json!({ "sha256": self.digest(), "events": self.events.len() }),
        };
        out.push_str(&serde_json::to_string(&seal).expect("digest serializes"));
        out.push('\n');
        out
    }

    /// Parses a sealed log and checks its digest line.
    pub fn from_jsonl(text: &str) -> Result<EventLog, LogError> {
        let mut log = EventLog::default();
        let mut recorded = None;
        for (i, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let ev: Event = serde_json::from_str(line).map_err(|source| LogError::Parse {
                line: i + 1,
                source,
            })?;
            if ev.kind == EventKind::Digest {
                recorded = ev
                    .payload
                    .get("sha256")
                    .and_then(Value::as_str)
                    .map(str::to_owned);
            } else {
                log.events.push(ev);
            }
        }
        let recorded = recorded.ok_or(LogError::MissingDigest)?;
        let computed = log.digest();
        if recorded != computed {
            return Err(LogError::DigestMismatch { recorded, computed });
        }
        Ok(log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip_checks_digest() {
        let mut log = EventLog::default();
        log.push(
            0.0,
            EventKind::Allocation,
            None,
            serde_json::json!({"cap_prb": [25, 25]}),
        );
        log.push(
            1.0,
            EventKind::Kpm,
            Some(1),
            serde_json::json!({"dl_throughput": 1.5}),
        );
        let text = log.to_jsonl();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().last().unwrap().contains("\"kind\":\"digest\""));
        let back = EventLog::from_jsonl(&text).unwrap();
        assert_eq!(back.digest(), log.digest());

        let tampered = text.replace("1.5", "1.6");
        assert!(matches!(
            EventLog::from_jsonl(&tampered),
            Err(LogError::DigestMismatch { .. })
        ));
    }

    proptest::proptest! {
        #[test]
        fn arbitrary_floats_survive_the_round_trip(xs in proptest::collection::vec(-1e9f64..1e9, 1..20)) {
            let mut log = EventLog::default();
            for (i, x) in xs.iter().enumerate() {
                log.push(i as f64 / 3.0, EventKind::Kpm, Some(1), serde_json::json!({"rlc_delay": x, "ratio": x / 7.0}));
            }
            let back = EventLog::from_jsonl(&log.to_jsonl()).unwrap();
            proptest::prop_assert_eq!(back.events(), log.events());
        }
    }
}

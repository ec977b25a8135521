use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::summary::KpmSummary;
use crate::domain::{SliceClass, SliceId, SliceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyConfig {
    /// Consecutive qualifying minutes before a flag is raised.
    pub persistence_minutes: usize,
    pub starvation_fraction: f64,
    /// Consecutive minute-to-minute cap moves that must alternate.
    pub oscillation_moves: usize,
    /// Minimum minute-mean cap move, PRBs.
    pub oscillation_amplitude: f64,
}

impl Default for AnomalyConfig {
    fn default() -> Self {
        Self {
            persistence_minutes: 2,
            starvation_fraction: 0.5,
            oscillation_moves: 3,
            oscillation_amplitude: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyFlag {
    Starvation,
    Oscillation,
    LatencyViolation,
}

impl AnomalyFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            AnomalyFlag::Starvation => "starvation",
            AnomalyFlag::Oscillation => "oscillation",
            AnomalyFlag::LatencyViolation => "latency_violation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub flag: AnomalyFlag,
    pub slice_id: SliceId,
    /// Minute indices that qualified, oldest first.
    pub minutes: Vec<u64>,
    /// The statistic per qualifying minute.
    pub values: Vec<f64>,
    pub threshold: f64,
}

impl Evidence {
    /// Minute in which the qualifying run began.
    pub fn onset_minute(&self) -> u64 {
        self.minutes.first().copied().unwrap_or_default()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub starvation: BTreeSet<SliceId>,
    pub oscillation: BTreeSet<SliceId>,
    pub latency_violation: BTreeSet<SliceId>,
    pub evidence: Vec<Evidence>,
}

impl AnomalyReport {
    pub fn is_empty(&self) -> bool {
        self.evidence.is_empty()
    }

    pub fn flagged(&self, flag: AnomalyFlag) -> &BTreeSet<SliceId> {
        match flag {
            AnomalyFlag::Starvation => &self.starvation,
            AnomalyFlag::Oscillation => &self.oscillation,
            AnomalyFlag::LatencyViolation => &self.latency_violation,
        }
    }

    pub fn evidence_for(&self, flag: AnomalyFlag, slice_id: SliceId) -> Option<&Evidence> {
        self.evidence
            .iter()
            .find(|e| e.flag == flag && e.slice_id == slice_id)
    }

    fn add(&mut self, e: Evidence) {
        match e.flag {
            AnomalyFlag::Starvation => self.starvation.insert(e.slice_id),
            AnomalyFlag::Oscillation => self.oscillation.insert(e.slice_id),
            AnomalyFlag::LatencyViolation => self.latency_violation.insert(e.slice_id),
        };
        self.evidence.push(e);
    }
}

/// Length of the trailing run of qualifying values, with its evidence.
fn trailing_run(
    history: &[KpmSummary],
    stat: impl Fn(&KpmSummary) -> Option<f64>,
    qualifies: impl Fn(f64) -> bool,
) -> (Vec<u64>, Vec<f64>) {
    let mut minutes = Vec::new();
    let mut values = Vec::new();
    for s in history.iter().rev() {
        match stat(s) {
            Some(v) if qualifies(v) => {
                minutes.push(s.minute);
                values.push(v);
            }
            _ => break,
        }
    }
    minutes.reverse();
    values.reverse();
    (minutes, values)
}

/// Flags anomalies that persist at the end of `history` (oldest first).
pub fn detect_anomalies(
    history: &[KpmSummary],
    slices: &[SliceSpec],
    config: &AnomalyConfig,
) -> AnomalyReport {
    let mut report = AnomalyReport::default();
    let persist = config.persistence_minutes.max(1);
    for spec in slices {
        let id = spec.slice_id;
        let (minutes, values) = trailing_run(
            history,
            |s| s.slice(id).map(|x| x.starvation_fraction),
            |v| v > config.starvation_fraction,
        );
        if minutes.len() >= persist {
            report.add(Evidence {
                flag: AnomalyFlag::Starvation,
                slice_id: id,
                minutes,
                values,
                threshold: config.starvation_fraction,
            });
        }

        if let (SliceClass::LatencySensitive, Some(target)) = (spec.class, spec.latency_target) {
            let (minutes, values) = trailing_run(
                history,
                |s| s.slice(id).map(|x| x.p95_delay),
                |v| v > target,
            );
            if minutes.len() >= persist {
                report.add(Evidence {
                    flag: AnomalyFlag::LatencyViolation,
                    slice_id: id,
                    minutes,
                    values,
                    threshold: target,
                });
            }
        }

        let moves = config.oscillation_moves.max(persist);
        let caps: Vec<(u64, f64)> = history
            .iter()
            .rev()
            .take(moves + 1)
            .map_while(|s| s.slice(id).and_then(|x| x.mean_cap).map(|c| (s.minute, c)))
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect();
        if caps.len() == moves + 1 {
            let deltas: Vec<f64> = caps.windows(2).map(|w| w[1].1 - w[0].1).collect();
            let large = deltas
                .iter()
                .all(|d| d.abs() > config.oscillation_amplitude);
            let alternating = deltas.windows(2).all(|w| w[0] * w[1] < 0.0);
            if large && alternating {
                report.add(Evidence {
                    flag: AnomalyFlag::Oscillation,
                    slice_id: id,
                    minutes: caps[1..].iter().map(|c| c.0).collect(),
                    values: deltas,
                    threshold: config.oscillation_amplitude,
                });
            }
        }
    }
    report
}

use serde::{Deserialize, Serialize};

use super::scenario::{PhaseSpec, ScenarioConfig};
use crate::baselines::ControllerKind;
use crate::domain::{AllocationDecision, KpmRecord, PolicyObject, SliceClass, SliceId};
use crate::sim::{EventKind, EventLog};
use crate::strategic::nearest_rank;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlicePhaseMetrics {
    pub slice_id: SliceId,
    pub phase: String,
    pub samples: usize,
    /// Mbit/s.
    pub mean_throughput: f64,
    /// Milliseconds, nearest-rank over per-second delays.
    pub p95_delay: f64,
    /// Bytes.
    pub mean_buffer: f64,
    pub mean_efficiency: f64,
}

/// One complete minute of a latency-sensitive slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyMinute {
    pub slice_id: SliceId,
    pub minute: u64,
    /// Phase containing the whole minute, if any.
    pub phase: Option<String>,
    pub p95_delay: f64,
    pub target: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyPoint {
    pub t: f64,
    pub version: u64,
    pub intent_tag: String,
    pub rollback: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub allocations: usize,
    pub discarded: usize,
    pub deferred: usize,
    pub held: usize,
    pub anomalies: usize,
    pub directives: usize,
    pub governance: usize,
    pub intents: usize,
    pub intents_rejected: usize,
    pub policies_refused: usize,
    pub bridge: usize,
}

/// Per-slice, per-phase results of a run plus control-plane activity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub controller: ControllerKind,
    pub seed: u64,
    /// Simulated seconds covered.
    pub elapsed_s: f64,
    pub phases: Vec<PhaseSpec>,
    pub slices: Vec<SlicePhaseMetrics>,
    /// Used over allocated PRB-TTIs across all slices and seconds.
    pub overall_efficiency: f64,
    pub latency_minutes: Vec<LatencyMinute>,
    /// Share of complete latency-slice minutes whose p95 delay exceeded
    /// the target.
    pub latency_violation_fraction: f64,
    /// Accepted allocations leaving a latency slice below its initial
    /// policy floor.
    pub floor_violations: usize,
    pub policy_timeline: Vec<PolicyPoint>,
    pub counts: EventCounts,
    pub intent_times: Vec<f64>,
    pub digest: String,
}

impl MetricsReport {
    pub fn slice_phase(&self, slice_id: SliceId, phase: &str) -> Option<&SlicePhaseMetrics> {
        self.slices
            .iter()
            .find(|m| m.slice_id == slice_id && m.phase == phase)
    }

    pub fn latency_minutes_in<'a>(
        &'a self,
        phase: &'a str,
    ) -> impl Iterator<Item = &'a LatencyMinute> + 'a {
        self.latency_minutes
            .iter()
            .filter(move |m| m.phase.as_deref() == Some(phase))
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn policy_of(payload: &serde_json::Value) -> Option<(PolicyObject, bool)> {
    if let Some(p) = payload.get("policy") {
        return serde_json::from_value(p.clone()).ok().map(|p| (p, true));
    }
    serde_json::from_value(payload.clone())
        .ok()
        .map(|p| (p, false))
}

/// Builds the report for everything in `log` so far.
pub fn build_report(config: &ScenarioConfig, log: &EventLog) -> MetricsReport {
    let records: Vec<KpmRecord> = log
        .of_kind(EventKind::Kpm)
        .filter_map(|e| serde_json::from_value(e.payload.clone()).ok())
        .collect();
    let elapsed_s = records.last().map_or(0.0, |r| r.t);
    let phases = config.phase_list();
    let policy = config.initial_policy();

    let mut slices = Vec::new();
    for p in &phases {
        for s in &config.slices {
            let rs: Vec<&KpmRecord> = records
                .iter()
                .filter(|r| r.slice_id == s.slice_id && (p.start..p.end).contains(&(r.t - 0.5)))
                .collect();
            let delays: Vec<f64> = rs.iter().map(|r| r.rlc_delay).collect();
            slices.push(SlicePhaseMetrics {
                slice_id: s.slice_id,
                phase: p.name.clone(),
                samples: rs.len(),
                mean_throughput: mean(rs.iter().map(|r| r.dl_throughput)),
                p95_delay: nearest_rank(&delays, 95.0),
                mean_buffer: mean(rs.iter().map(|r| r.buffer_occupancy as f64)),
                mean_efficiency: mean(rs.iter().map(|r| r.efficiency())),
            });
        }
    }

    let (used, alloc) = records.iter().fold((0u64, 0u64), |(u, a), r| {
        (u + r.prb_used, a + r.prb_allocated)
    });
    let overall_efficiency = if alloc == 0 {
        1.0
    } else {
        used as f64 / alloc as f64
    };

    let mut latency_minutes = Vec::new();
    for s in config
        .slices
        .iter()
        .filter(|s| s.class == SliceClass::LatencySensitive)
    {
        let Some(target) = s.latency_target else {
            continue;
        };
        let full_minutes = (elapsed_s / 60.0).floor() as u64;
        for minute in 0..full_minutes {
            let (lo, hi) = (minute as f64 * 60.0, minute as f64 * 60.0 + 60.0);
            let delays: Vec<f64> = records
                .iter()
                .filter(|r| r.slice_id == s.slice_id && r.t > lo && r.t <= hi)
                .map(|r| r.rlc_delay)
                .collect();
            let p95 = nearest_rank(&delays, 95.0);
            latency_minutes.push(LatencyMinute {
                slice_id: s.slice_id,
                minute,
                phase: phases
                    .iter()
                    .find(|p| p.start <= lo && hi <= p.end)
                    .map(|p| p.name.clone()),
                p95_delay: p95,
                target,
                violated: p95 > target,
            });
        }
    }
    let latency_violation_fraction = if latency_minutes.is_empty() {
        0.0
    } else {
        latency_minutes.iter().filter(|m| m.violated).count() as f64 / latency_minutes.len() as f64
    };

    let latency_floors: Vec<(usize, u32)> = policy
        .slices
        .iter()
        .enumerate()
        .filter(|(_, s)| s.class == SliceClass::LatencySensitive)
        .map(|(i, s)| (i, s.floor_prb))
        .collect();
    let floor_violations = log
        .of_kind(EventKind::Allocation)
        .filter_map(|e| serde_json::from_value::<AllocationDecision>(e.payload.clone()).ok())
        .filter(|d| {
            latency_floors
                .iter()
                .any(|&(i, f)| d.cap_prb.get(i).is_some_and(|&c| c < f))
        })
        .count();

    let mut policy_timeline = Vec::new();
    if config.controller == ControllerKind::Agentic {
        policy_timeline.push(PolicyPoint {
            t: 0.0,
            version: policy.version,
            intent_tag: policy.intent_tag.clone(),
            rollback: false,
        });
        for e in log.of_kind(EventKind::Policy) {
            if let Some((p, rollback)) = policy_of(&e.payload) {
                policy_timeline.push(PolicyPoint {
                    t: e.t,
                    version: p.version,
                    intent_tag: p.intent_tag,
                    rollback,
                });
            }
        }
    }

    let count = |k| log.of_kind(k).count();
    let counts = EventCounts {
        allocations: count(EventKind::Allocation),
        discarded: count(EventKind::AllocationDiscarded),
        deferred: count(EventKind::AllocationDeferred),
        held: count(EventKind::AllocationHeld),
        anomalies: count(EventKind::Anomaly),
        directives: count(EventKind::Directive),
        governance: count(EventKind::Governance),
        intents: count(EventKind::Intent),
        intents_rejected: count(EventKind::IntentRejected),
        policies_refused: count(EventKind::PolicyRefused),
        bridge: count(EventKind::Bridge),
    };
    let mut intent_times: Vec<f64> = log
        .events()
        .iter()
        .filter(|e| matches!(e.kind, EventKind::Intent | EventKind::IntentRejected))
        .map(|e| e.t)
        .collect();
    intent_times.dedup();

    MetricsReport {
        scenario: config.name.clone(),
        controller: config.controller,
        seed: config.seed,
        elapsed_s,
        phases,
        slices,
        overall_efficiency,
        latency_minutes,
        latency_violation_fraction,
        floor_violations,
        policy_timeline,
        counts,
        intent_times,
        digest: log.digest(),
    }
}

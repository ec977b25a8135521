use serde::{Deserialize, Serialize};

use crate::domain::{KpmRecord, PolicyObject, SliceClass, SliceId};
use crate::tactical::{
    estimate_demands, DemandModel, PipelineStep, TacticalPipeline, TacticalSnapshot,
};

/// Seconds of telemetry a conclusive pre-check needs.
pub const MIN_TRACE_SECONDS: usize = 60;

/// Predicted delays are capped here so averages stay finite.
const DELAY_CAP_MS: f64 = 10_000.0;

/// Recorded KPM stream plus the tactical state it started from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryTrace {
    pub initial: TacticalSnapshot,
    pub batches: Vec<Vec<KpmRecord>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplayOutcome {
    Accepted,
    Deferred,
    Infeasible,
}

/// One replayed tactical decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayStep {
    pub t: f64,
    pub outcome: ReplayOutcome,
    /// Caps in force after the decision.
    pub caps: Vec<u32>,
    pub demands: Vec<u32>,
}

/// Runs the tactical pipeline over `trace` under `policy`. Pure: the
/// trace and any live state are left untouched.
pub fn replay(
    trace: &TelemetryTrace,
    policy: &PolicyObject,
    model: &DemandModel,
) -> Vec<ReplayStep> {
    let mut pipeline = TacticalPipeline::from_snapshot(&trace.initial, model.clone());
    let mut in_force = trace
        .initial
        .guard
        .last_caps
        .clone()
        .unwrap_or_else(|| policy.floors());
    let mut out = Vec::with_capacity(trace.batches.len());
    for batch in &trace.batches {
        let Some(t) = batch.first().map(|r| r.t) else {
            continue;
        };
        if pipeline.observe(batch).is_err() {
            continue;
        }
        let demands = estimate_demands(&pipeline.window, model);
        let outcome = match pipeline.step(t, policy) {
            PipelineStep::Accepted(p) => {
                in_force = p.cap_prb;
                ReplayOutcome::Accepted
            }
            PipelineStep::Deferred { .. } => ReplayOutcome::Deferred,
            PipelineStep::Infeasible(_) => ReplayOutcome::Infeasible,
        };
        out.push(ReplayStep {
            t,
            outcome,
            caps: in_force.clone(),
            demands,
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecheckStatus {
    Passed,
    Failed,
    /// Too little telemetry to judge; distinct from failure.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecheckViolations {
    /// Seconds a slice ran below its candidate floor, or a latency slice
    /// below the floor the incumbent guarantees it.
    pub floor_breaches: u32,
    /// Accepted moves larger than the candidate step, plus decisions the
    /// candidate cannot reach at all.
    pub step_breaches: u32,
    /// Seconds a latency slice is predicted to miss its target under the
    /// candidate while meeting it under the incumbent.
    pub predicted_latency_violations: u32,
}

impl PrecheckViolations {
    pub fn total(&self) -> u32 {
        self.floor_breaches + self.step_breaches + self.predicted_latency_violations
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceDelta {
    pub slice_id: SliceId,
    pub mean_cap_delta: f64,
    /// Candidate minus incumbent, Mbit/s.
    pub predicted_throughput_delta: f64,
    /// Candidate minus incumbent, milliseconds.
    pub predicted_delay_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecheckReport {
    /// True exactly when no violation was found.
    pub ok: bool,
    pub status: PrecheckStatus,
    pub replayed_decisions: usize,
    pub violations: PrecheckViolations,
    pub deltas: Vec<SliceDelta>,
}

fn predicted_delay_ms(rec: &KpmRecord, cap: u32, bytes_per_prb_per_second: f64) -> f64 {
    let capacity = f64::from(cap) * bytes_per_prb_per_second;
    if capacity <= 0.0 {
        return DELAY_CAP_MS;
    }
    let pending = rec.buffer_occupancy as f64 + rec.dl_throughput * 1e6 / 8.0;
    (1000.0 * pending / capacity).min(DELAY_CAP_MS)
}

/// Replays the candidate and the incumbent over the same telemetry and
/// compares the outcomes.
pub fn twin_precheck(
    candidate: &PolicyObject,
    trace: &TelemetryTrace,
    incumbent: &PolicyObject,
    model: &DemandModel,
) -> PrecheckReport {
    let n = candidate.slices.len();
    if trace.batches.len() < MIN_TRACE_SECONDS {
        return PrecheckReport {
            ok: true,
            status: PrecheckStatus::Inconclusive,
            replayed_decisions: 0,
            violations: PrecheckViolations::default(),
            deltas: Vec::new(),
        };
    }
    let cand = replay(trace, candidate, model);
    let inc = replay(trace, incumbent, model);
    let mut v = PrecheckViolations::default();
    let mut cap_sum = vec![(0.0, 0.0); n];
    let mut thr_sum = vec![(0.0, 0.0); n];
    let mut delay_sum = vec![(0.0, 0.0); n];
    let mut prev = trace.initial.guard.last_caps.clone();
    let steps = cand.len().min(inc.len());
    for (k, (c, i)) in cand.iter().zip(&inc).enumerate() {
        let batch = &trace.batches[k];
        if c.outcome == ReplayOutcome::Infeasible {
            v.step_breaches += 1;
        }
        for (s, sp) in candidate.slices.iter().enumerate() {
            let incumbent_floor = incumbent.slices.get(s).map_or(0, |x| x.floor_prb);
            let latency = sp.class == SliceClass::LatencySensitive;
            if c.caps[s] < sp.floor_prb || (latency && c.caps[s] < incumbent_floor) {
                v.floor_breaches += 1;
            }
            if c.outcome == ReplayOutcome::Accepted {
                if let Some(p) = &prev {
                    if c.caps[s].abs_diff(p[s]) > candidate.max_step_prb {
                        v.step_breaches += 1;
                    }
                }
            }
            let bpps = model.bytes_per_prb_per_second[s];
            let to_mbps = |cap: u32, demand: u32| f64::from(cap.min(demand)) * bpps * 8.0 / 1e6;
            cap_sum[s].0 += f64::from(c.caps[s]);
            cap_sum[s].1 += f64::from(i.caps[s]);
            thr_sum[s].0 += to_mbps(c.caps[s], c.demands[s]);
            thr_sum[s].1 += to_mbps(i.caps[s], i.demands[s]);
            if let Some(rec) = batch.iter().find(|r| r.slice_id == sp.slice_id) {
                let (dc, di) = (
                    predicted_delay_ms(rec, c.caps[s], bpps),
                    predicted_delay_ms(rec, i.caps[s], bpps),
                );
                delay_sum[s].0 += dc;
                delay_sum[s].1 += di;
                if let (true, Some(target)) = (latency, sp.latency_target) {
                    if dc > target && di <= target {
                        v.predicted_latency_violations += 1;
                    }
                }
            }
        }
        prev = Some(c.caps.clone());
    }
    let m = steps.max(1) as f64;
    let deltas = candidate
        .slices
        .iter()
        .enumerate()
        .map(|(s, sp)| SliceDelta {
            slice_id: sp.slice_id,
            mean_cap_delta: (cap_sum[s].0 - cap_sum[s].1) / m,
            predicted_throughput_delta: (thr_sum[s].0 - thr_sum[s].1) / m,
            predicted_delay_delta: (delay_sum[s].0 - delay_sum[s].1) / m,
        })
        .collect();
    let ok = v.total() == 0;
    PrecheckReport {
        ok,
        status: if ok {
            PrecheckStatus::Passed
        } else {
            PrecheckStatus::Failed
        },
        replayed_decisions: steps,
        violations: v,
        deltas,
    }
}

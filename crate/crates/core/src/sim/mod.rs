//! Deterministic TTI-level simulator of a sliced downlink.
//!
//! Each slice is one aggregate FIFO queue fed by seeded flows. Every TTI the
//! scheduler grants each slice `min(cap, need)` PRBs, then (optionally) hands
//! the spare PRBs to still-backlogged slices with a priority-weighted deficit
//! round-robin. Bytes are accounted in integers and time in microseconds, so
//! a `(setup, seed)` pair always yields the same trajectory.

mod log;
mod radio;
mod traffic;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use self::log::{Event, EventKind, EventLog, LogDetail, LogError};
pub use self::radio::{ChannelStep, RadioModel, SliceRadio};
use self::traffic::{secs_to_us, FlowSource};
pub use self::traffic::{Distribution, FlowSpec};
use crate::apportion;
use crate::domain::{
    validate_slices, AllocationDecision, ConfigError, KpmRecord, SliceId, SliceSpec,
};

/// Scheduler and queue switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Hand PRBs left unused under the caps to other backlogged slices.
    #[serde(default = "default_true")]
    pub redistribution: bool,
    /// Per-slice queue limit in bytes; arrivals beyond it are dropped.
    #[serde(default)]
    pub queue_limit_bytes: Option<u64>,
    #[serde(default)]
    pub log_detail: LogDetail,
}

fn default_true() -> bool {
    true
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            redistribution: true,
            queue_limit_bytes: None,
            log_detail: LogDetail::Summary,
        }
    }
}

/// Everything the simulator needs from a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSetup {
    pub seed: u64,
    pub slices: Vec<SliceSpec>,
    pub flows: Vec<FlowSpec>,
    pub radio: RadioModel,
    pub options: SimOptions,
    /// Caps in force before the first decision; defaults to an equal split.
    pub initial_caps: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(#[from] ConfigError),
    #[error("caps sum to {sum}, cell has {total} PRBs")]
    CapOverflow { sum: u64, total: u32 },
    #[error("{got} caps supplied for {expected} slices")]
    CapLength { got: usize, expected: usize },
    #[error("run horizon {t_end}s is not after the current time {now}s")]
    Horizon { t_end: u64, now: f64 },
}

/// Per-TTI simulator output.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SimEvent {
    Arrival {
        flow: usize,
        slice_id: SliceId,
        bytes: u32,
    },
    Drop {
        flow: usize,
        slice_id: SliceId,
        bytes: u32,
    },
    Service {
        slice_id: SliceId,
        granted: u32,
        redistributed: u32,
        bytes: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimClock {
    pub tti: u64,
    pub tti_us: u64,
    pub ttis_per_second: u64,
}

impl SimClock {
    pub fn now_us(&self) -> u64 {
        self.tti * self.tti_us
    }

    pub fn now(&self) -> f64 {
        self.now_us() as f64 / 1e6
    }

    fn at_second_boundary(&self) -> Option<u64> {
        self.tti
            .is_multiple_of(self.ttis_per_second)
            .then(|| self.tti / self.ttis_per_second)
    }
}

/// Snapshot of one slice queue.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueueState {
    pub slice_id: SliceId,
    pub backlog: u64,
    pub hol_age_ms: f64,
    pub arrived: u64,
    pub served: u64,
    pub dropped: u64,
}

#[derive(Debug, Clone)]
struct Packet {
    arrival_us: u64,
    remaining: u32,
}

#[derive(Debug, Clone, Default)]
struct SliceQueue {
    packets: VecDeque<Packet>,
    backlog: u64,
    arrived: u64,
    served: u64,
    dropped: u64,
    bytes_per_prb: u64,
    base_bytes_per_prb: u64,
    deficit: u64,
    iv_served: u64,
    iv_wait_weighted_us: u128,
    iv_used: u64,
    iv_alloc: u64,
}

impl SliceQueue {
    fn hol_age_us(&self, now_us: u64) -> u64 {
        self.packets
            .front()
            .map_or(0, |p| now_us.saturating_sub(p.arrival_us))
    }

    fn serve(&mut self, mut capacity: u64, now_us: u64) -> u64 {
        let mut served = 0;
        while capacity > 0 {
            let Some(head) = self.packets.front_mut() else {
                break;
            };
            let take = capacity.min(u64::from(head.remaining));
            head.remaining -= take as u32;
            capacity -= take;
            served += take;
            self.iv_wait_weighted_us += u128::from(take) * u128::from(now_us - head.arrival_us);
            if head.remaining == 0 {
                self.packets.pop_front();
            }
        }
        self.backlog -= served;
        self.served += served;
        self.iv_served += served;
        served
    }
}

#[derive(Debug, Clone, Default)]
struct FlowInterval {
    packets: u64,
    bytes: u64,
    dropped_packets: u64,
    dropped_bytes: u64,
}

/// Redistribution weights are scaled to integer quanta of this many units.
const QUANTUM_SCALE: f64 = 1000.0;

/// A controller driven by [`SimState::run_until`].
///
/// `decide` reports the virtual time it consumed; a decision whose cost
/// exceeds `budget_ms` is discarded and the previous caps stay in force.
pub trait Controller {
    fn id(&self) -> &str;

    fn budget_ms(&self) -> f64;

    fn decision_interval_s(&self) -> u64 {
        1
    }

    fn observe(&mut self, _t: f64, _batch: &[KpmRecord], _log: &mut EventLog) {}

    fn decide(&mut self, t: f64, log: &mut EventLog) -> ControlOutput;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub decision: Option<AllocationDecision>,
    /// Virtual milliseconds spent producing the decision.
    pub elapsed_ms: f64,
    /// Redistribution weights to install together with the decision.
    pub weights: Option<Vec<f64>>,
}

impl ControlOutput {
    pub fn none(elapsed_ms: f64) -> Self {
        Self {
            decision: None,
            elapsed_ms,
            weights: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimState {
    seed: u64,
    slices: Vec<SliceSpec>,
    radio: RadioModel,
    options: SimOptions,
    clock: SimClock,
    queues: Vec<SliceQueue>,
    flows: Vec<FlowSource>,
    flow_iv: Vec<FlowInterval>,
    caps: Vec<u32>,
    weights: Vec<f64>,
    channel: Vec<ChannelStep>,
    channel_next: usize,
    last_boundary: Option<u64>,
    last_kpm_us: u64,
    rr: usize,
    arrivals: Vec<(u64, usize, u32)>,
    scratch: Vec<(u64, u32)>,
}

/// Validates the setup and initializes a simulator at t = 0.
pub fn build_sim(setup: &SimSetup) -> Result<SimState, SimError> {
    SimState::new(setup)
}

impl SimState {
    pub fn new(setup: &SimSetup) -> Result<Self, SimError> {
        validate_slices(&setup.slices)?;
        setup.radio.validate()?;
        let index_of = |id: SliceId| setup.slices.iter().position(|s| s.slice_id == id);
        let mut flows = Vec::with_capacity(setup.flows.len());
        for (i, f) in setup.flows.iter().enumerate() {
            let field = format!("flows[{i}]");
            let Some(idx) = index_of(f.slice_id) else {
                return Err(ConfigError::new(
                    "unknown_slice",
                    format!("{field}.slice_id"),
                    format!(
                        "flow references slice {} which is not configured",
                        f.slice_id
                    ),
                )
                .into());
            };
            f.validate(&field)?;
            flows.push(FlowSource::new(f.clone(), idx, setup.seed, i as u64));
        }
        for (i, c) in setup.radio.channel.iter().enumerate() {
            if let Some(id) = c.slice_id {
                if index_of(id).is_none() {
                    return Err(ConfigError::new(
                        "unknown_slice",
                        format!("radio.channel[{i}].slice_id"),
                        format!("channel step references slice {id}"),
                    )
                    .into());
                }
            }
        }

        let n = setup.slices.len();
        let total = setup.radio.total_prb;
        let caps = match &setup.initial_caps {
            Some(c) => c.clone(),
            None => apportion::equal_split(u64::from(total), &vec![u64::from(total); n])
                .into_iter()
                .map(|c| c as u32)
                .collect(),
        };
        let queues = setup
            .slices
            .iter()
            .map(|s| {
                let b = u64::from(setup.radio.base_bytes_per_prb(s.slice_id));
                SliceQueue {
                    bytes_per_prb: b,
                    base_bytes_per_prb: b,
                    ..Default::default()
                }
            })
            .collect();
        let mut channel = setup.radio.channel.clone();
        channel.sort_by(|a, b| a.t.total_cmp(&b.t));

        let mut sim = Self {
            seed: setup.seed,
            slices: setup.slices.clone(),
            radio: setup.radio.clone(),
            options: setup.options.clone(),
            clock: SimClock {
                tti: 0,
                tti_us: u64::from(setup.radio.tti_ms) * 1000,
                ttis_per_second: setup.radio.ttis_per_second(),
            },
            queues,
            flow_iv: vec![FlowInterval::default(); flows.len()],
            flows,
            caps: vec![0; n],
            weights: vec![1.0; n],
            channel,
            channel_next: 0,
            last_boundary: None,
            last_kpm_us: 0,
            rr: 0,
            arrivals: Vec::new(),
            scratch: Vec::new(),
        };
        sim.set_caps(&caps)?;
        Ok(sim)
    }

    pub fn now(&self) -> f64 {
        self.clock.now()
    }

    pub fn clock(&self) -> SimClock {
        self.clock
    }

    pub fn caps(&self) -> &[u32] {
        &self.caps
    }

    pub fn slices(&self) -> &[SliceSpec] {
        &self.slices
    }

    pub fn radio(&self) -> &RadioModel {
        &self.radio
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn set_caps(&mut self, caps: &[u32]) -> Result<(), SimError> {
        if caps.len() != self.slices.len() {
            return Err(SimError::CapLength {
                got: caps.len(),
                expected: self.slices.len(),
            });
        }
        let sum: u64 = caps.iter().map(|&c| u64::from(c)).sum();
        if sum > u64::from(self.radio.total_prb) {
            return Err(SimError::CapOverflow {
                sum,
                total: self.radio.total_prb,
            });
        }
        self.caps.copy_from_slice(caps);
        Ok(())
    }

    /// Redistribution weights; non-finite or negative entries count as zero.
    pub fn set_weights(&mut self, weights: &[f64]) {
        if weights.len() == self.weights.len() {
            for (w, &v) in self.weights.iter_mut().zip(weights) {
                *w = if v.is_finite() && v > 0.0 { v } else { 0.0 };
            }
        }
    }

    pub fn queue_state(&self) -> Vec<QueueState> {
        let now = self.clock.now_us();
        self.slices
            .iter()
            .zip(&self.queues)
            .map(|(s, q)| QueueState {
                slice_id: s.slice_id,
                backlog: q.backlog,
                hol_age_ms: q.hol_age_us(now) as f64 / 1000.0,
                arrived: q.arrived,
                served: q.served,
                dropped: q.dropped,
            })
            .collect()
    }

    /// `arrived = served + backlog + dropped` for every slice.
    pub fn conserves_bytes(&self) -> bool {
        self.queues
            .iter()
            .all(|q| q.arrived == q.served + q.backlog + q.dropped)
    }

    /// Hash of the full dynamic state, including every flow's PRNG position.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(self.clock.tti.to_le_bytes());
        for c in &self.caps {
            h.update(c.to_le_bytes());
        }
        for q in &self.queues {
            for v in [
                q.backlog,
                q.arrived,
                q.served,
                q.dropped,
                q.bytes_per_prb,
                q.deficit,
            ] {
                h.update(v.to_le_bytes());
            }
        }
        for f in &self.flows {
            h.update(f.next_arrival_us.unwrap_or(u64::MAX).to_le_bytes());
            h.update(f.rng_word().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    fn apply_channel_steps(&mut self, now_us: u64) {
        while let Some(step) = self.channel.get(self.channel_next) {
            if secs_to_us(step.t) > now_us {
                break;
            }
            for (s, q) in self.slices.iter().zip(self.queues.iter_mut()) {
                if step.slice_id.is_none_or(|id| id == s.slice_id) {
                    q.bytes_per_prb = ((q.base_bytes_per_prb as f64) * step.factor)
                        .round()
                        .max(1.0) as u64;
                }
            }
            self.channel_next += 1;
        }
    }

    /// Installs `decision`'s caps and advances one TTI.
    pub fn step_tti_with(
        &mut self,
        decision: &AllocationDecision,
    ) -> Result<Vec<SimEvent>, SimError> {
        self.set_caps(&decision.cap_prb)?;
        Ok(self.step_tti())
    }

    /// Advances one TTI under the caps currently in force.
    pub fn step_tti(&mut self) -> Vec<SimEvent> {
        let mut events = Vec::new();
        self.step_into(&mut events);
        events
    }

    fn step_into(&mut self, events: &mut Vec<SimEvent>) {
        let start_us = self.clock.now_us();
        let end_us = start_us + self.clock.tti_us;
        self.apply_channel_steps(start_us);

        // Arrivals, merged across flows in time order.
        self.arrivals.clear();
        for (fi, f) in self.flows.iter_mut().enumerate() {
            self.scratch.clear();
            f.drain_until(end_us, &mut self.scratch);
            self.arrivals
                .extend(self.scratch.iter().map(|&(t, b)| (t, fi, b)));
        }
        self.arrivals.sort_unstable();
        for &(t, fi, bytes) in &self.arrivals {
            let idx = self.flows[fi].slice_idx;
            let q = &mut self.queues[idx];
            let slice_id = self.slices[idx].slice_id;
            q.arrived += u64::from(bytes);
            let iv = &mut self.flow_iv[fi];
            if self
                .options
                .queue_limit_bytes
                .is_some_and(|lim| q.backlog + u64::from(bytes) > lim)
            {
                q.dropped += u64::from(bytes);
                iv.dropped_packets += 1;
                iv.dropped_bytes += u64::from(bytes);
                events.push(SimEvent::Drop {
                    flow: fi,
                    slice_id,
                    bytes,
                });
                continue;
            }
            q.backlog += u64::from(bytes);
            q.packets.push_back(Packet {
                arrival_us: t,
                remaining: bytes,
            });
            iv.packets += 1;
            iv.bytes += u64::from(bytes);
            events.push(SimEvent::Arrival {
                flow: fi,
                slice_id,
                bytes,
            });
        }

        // Capped grants, then work-conserving redistribution.
        let n = self.queues.len();
        let need: Vec<u64> = self
            .queues
            .iter()
            .map(|q| q.backlog.div_ceil(q.bytes_per_prb))
            .collect();
        let mut grant: Vec<u64> = (0..n)
            .map(|i| u64::from(self.caps[i]).min(need[i]))
            .collect();
        let mut extra = vec![0u64; n];
        if self.options.redistribution {
            let mut spare = u64::from(self.radio.total_prb) - grant.iter().sum::<u64>();
            self.redistribute(&mut spare, &need, &grant, &mut extra);
        }
        for i in 0..n {
            grant[i] += extra[i];
        }

        for i in 0..n {
            let q = &mut self.queues[i];
            let bytes = if grant[i] > 0 {
                q.serve(grant[i] * q.bytes_per_prb, end_us)
            } else {
                0
            };
            q.iv_used += grant[i];
            q.iv_alloc += u64::from(self.caps[i]).max(grant[i]);
            if grant[i] > 0 || self.options.log_detail == LogDetail::Tti {
                events.push(SimEvent::Service {
                    slice_id: self.slices[i].slice_id,
                    granted: grant[i] as u32,
                    redistributed: extra[i] as u32,
                    bytes,
                });
            }
        }
        self.rr = (self.rr + 1) % n.max(1);
        self.clock.tti += 1;
    }

    /// Priority-weighted deficit round-robin over slices still short of PRBs.
    fn redistribute(&mut self, spare: &mut u64, need: &[u64], grant: &[u64], extra: &mut [u64]) {
        let n = need.len();
        let quantum: Vec<u64> = self
            .weights
            .iter()
            .map(|w| ((w * QUANTUM_SCALE).round() as u64).max(1))
            .collect();
        let unit = QUANTUM_SCALE as u64;
        let unmet = |i: usize, extra: &[u64]| need[i] - grant[i] - extra[i];
        loop {
            let hungry: Vec<usize> = (0..n)
                .map(|k| (self.rr + k) % n)
                .filter(|&i| unmet(i, extra) > 0)
                .collect();
            if *spare == 0 || hungry.is_empty() {
                break;
            }
            // Skip rounds in which nobody reaches a whole PRB.
            let rounds = hungry
                .iter()
                .map(|&i| (unit.saturating_sub(self.queues[i].deficit)).div_ceil(quantum[i]))
                .min()
                .unwrap_or(1)
                .max(1);
            for &i in &hungry {
                let q = &mut self.queues[i];
                q.deficit += rounds * quantum[i];
                let k = (q.deficit / unit).min(unmet(i, extra)).min(*spare);
                extra[i] += k;
                q.deficit -= k * unit;
                *spare -= k;
                if unmet(i, extra) == 0 {
                    self.queues[i].deficit = 0;
                }
                if *spare == 0 {
                    break;
                }
            }
        }
        for i in 0..n {
            if need[i] <= grant[i] {
                self.queues[i].deficit = 0;
            }
        }
    }

    /// Closes the current KPM interval and returns one record per slice.
    pub fn emit_kpm(&mut self) -> Vec<KpmRecord> {
        let now_us = self.clock.now_us();
        let span_s = (now_us.saturating_sub(self.last_kpm_us)) as f64 / 1e6;
        self.last_kpm_us = now_us;
        let t = self.clock.now();
        self.slices
            .iter()
            .zip(self.queues.iter_mut())
            .map(|(s, q)| {
                let delay_us = if q.iv_served > 0 {
                    q.iv_wait_weighted_us as f64 / q.iv_served as f64
                } else {
                    q.hol_age_us(now_us) as f64
                };
                let rec = KpmRecord {
                    t,
                    slice_id: s.slice_id,
                    dl_throughput: if span_s > 0.0 {
                        q.iv_served as f64 * 8.0 / 1e6 / span_s
                    } else {
                        0.0
                    },
                    buffer_occupancy: q.backlog,
                    rlc_delay: delay_us / 1000.0,
                    prb_used: q.iv_used,
                    prb_allocated: q.iv_alloc,
                };
                q.iv_served = 0;
                q.iv_wait_weighted_us = 0;
                q.iv_used = 0;
                q.iv_alloc = 0;
                rec
            })
            .collect()
    }

    fn log_flow_intervals(&mut self, log: &mut EventLog) {
        let t = self.clock.now();
        for (fi, (iv, f)) in self.flow_iv.iter_mut().zip(&self.flows).enumerate() {
            if iv.packets > 0 {
                log.push(
                    t,
                    EventKind::Arrivals,
                    Some(f.spec.slice_id),
                    serde_json::json!({"flow": fi, "label": f.spec.label, "packets": iv.packets, "bytes": iv.bytes}),
                );
            }
            if iv.dropped_packets > 0 {
                log.push(
                    t,
                    EventKind::Drops,
                    Some(f.spec.slice_id),
                    serde_json::json!({"flow": fi, "label": f.spec.label, "packets": iv.dropped_packets, "bytes": iv.dropped_bytes}),
                );
            }
            *iv = FlowInterval::default();
        }
    }

    fn invoke_controller(
        &mut self,
        t: f64,
        controller: &mut dyn Controller,
        log: &mut EventLog,
    ) -> Result<(), SimError> {
        let out = controller.decide(t, log);
        let budget = controller.budget_ms();
        if out.elapsed_ms > budget {
            log.push(
                t,
                EventKind::AllocationDiscarded,
                None,
                serde_json::json!({
                    "controller_id": controller.id(),
                    "elapsed_ms": out.elapsed_ms,
                    "budget_ms": budget,
                    "caps_in_force": self.caps,
                }),
            );
            return Ok(());
        }
        if let Some(decision) = out.decision {
            self.set_caps(&decision.cap_prb)?;
            if let Some(w) = &out.weights {
                self.set_weights(w);
            }
            log.push(t, EventKind::Allocation, None, &decision);
        }
        Ok(())
    }

    /// Runs whole seconds up to `t_end`: KPM batches at every second
    /// boundary, the controller at its decision interval.
    ///
    /// The boundary at `t_end` itself is processed before returning, so
    /// consecutive calls split a run without changing its log.
    pub fn run_until(
        &mut self,
        t_end: u64,
        controller: &mut dyn Controller,
        log: &mut EventLog,
    ) -> Result<(), SimError> {
        let end_tti = t_end * self.clock.ttis_per_second;
        if end_tti < self.clock.tti
            || (end_tti == self.clock.tti && self.last_boundary == Some(t_end))
        {
            return Err(SimError::Horizon {
                t_end,
                now: self.now(),
            });
        }
        let mut events = Vec::new();
        loop {
            if let Some(second) = self.clock.at_second_boundary() {
                if self.last_boundary != Some(second) {
                    self.last_boundary = Some(second);
                    let t = second as f64;
                    if second > 0 {
                        self.log_flow_intervals(log);
                        let batch = self.emit_kpm();
                        for r in &batch {
                            log.push(t, EventKind::Kpm, Some(r.slice_id), r);
                        }
                        controller.observe(t, &batch, log);
                    }
                    if second % controller.decision_interval_s().max(1) == 0 {
                        self.invoke_controller(t, controller, log)?;
                    }
                }
            }
            if self.clock.tti >= end_tti {
                return Ok(());
            }
            events.clear();
            self.step_into(&mut events);
            if self.options.log_detail == LogDetail::Tti {
                let t = self.clock.now();
                for e in &events {
                    if let SimEvent::Service { slice_id, .. } = e {
                        log.push(t, EventKind::Tti, Some(*slice_id), e);
                    }
                }
            }
        }
    }
}

/// Runs a fresh simulator from t = 0 to `t_end` and returns its log.
pub fn run(
    setup: &SimSetup,
    t_end: u64,
    controller: &mut dyn Controller,
) -> Result<EventLog, SimError> {
    let mut sim = SimState::new(setup)?;
    let mut log = EventLog::new(setup.options.log_detail);
    sim.run_until(t_end, controller, &mut log)?;
    Ok(log)
}

#[cfg(test)]
mod tests;

use serde::{Deserialize, Serialize};

use crate::domain::{KpmRecord, SliceId};

/// Records per slice in a complete minute.
pub const MINUTE_SAMPLES: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryConfig {
    /// Mbit/s below which a backlogged second counts as starved.
    pub starvation_floor_mbps: f64,
}

impl Default for SummaryConfig {
    fn default() -> Self {
        Self {
            starvation_floor_mbps: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSummary {
    pub slice_id: SliceId,
    pub samples: usize,
    pub mean_throughput: f64,
    pub min_throughput: f64,
    pub max_throughput: f64,
    pub p95_delay: f64,
    pub mean_efficiency: f64,
    /// Fraction of seconds with throughput under the starvation floor while
    /// traffic was queued.
    pub starvation_fraction: f64,
    /// Mean cap in force over the minute, when the decision log is known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_cap: Option<f64>,
}

/// One-minute per-slice aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpmSummary {
    pub minute: u64,
    pub policy_version: u64,
    pub partial: bool,
    pub slices: Vec<SliceSummary>,
}

impl KpmSummary {
    pub fn slice(&self, id: SliceId) -> Option<&SliceSummary> {
        self.slices.iter().find(|s| s.slice_id == id)
    }
}

/// Nearest-rank percentile: the value at rank `⌈p/100 · n⌉` of the sorted
/// samples.
pub fn nearest_rank(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Aggregates one minute of records, per slice in `slice_ids` order. Slices
/// with fewer than 60 records mark the summary partial.
pub fn summarize_minute(
    minute: u64,
    records: &[KpmRecord],
    slice_ids: &[SliceId],
    policy_version: u64,
    config: &SummaryConfig,
) -> KpmSummary {
    let mut partial = false;
    let slices = slice_ids
        .iter()
        .map(|&id| {
            let rs: Vec<&KpmRecord> = records.iter().filter(|r| r.slice_id == id).collect();
            if rs.len() < MINUTE_SAMPLES {
                partial = true;
            }
            let n = rs.len().max(1) as f64;
            let thr: Vec<f64> = rs.iter().map(|r| r.dl_throughput).collect();
            let delays: Vec<f64> = rs.iter().map(|r| r.rlc_delay).collect();
            let starved = rs
                .iter()
                .filter(|r| {
                    r.dl_throughput < config.starvation_floor_mbps && r.buffer_occupancy > 0
                })
                .count();
            SliceSummary {
                slice_id: id,
                samples: rs.len(),
                mean_throughput: thr.iter().sum::<f64>() / n,
                min_throughput: thr.iter().copied().reduce(f64::min).unwrap_or(0.0),
                max_throughput: thr.iter().copied().reduce(f64::max).unwrap_or(0.0),
                p95_delay: nearest_rank(&delays, 95.0),
                mean_efficiency: rs.iter().map(|r| r.efficiency()).sum::<f64>() / n,
                starvation_fraction: starved as f64 / n,
                mean_cap: None,
            }
        })
        .collect();
    KpmSummary {
        minute,
        policy_version,
        partial,
        slices,
    }
}

/// Sets each slice's `mean_cap` from the per-second caps in force.
pub fn attach_mean_caps(summary: &mut KpmSummary, caps_per_second: &[Vec<u32>]) {
    if caps_per_second.is_empty() {
        return;
    }
    let n = caps_per_second.len() as f64;
    for (i, s) in summary.slices.iter_mut().enumerate() {
        s.mean_cap = Some(caps_per_second.iter().map(|c| f64::from(c[i])).sum::<f64>() / n);
    }
}

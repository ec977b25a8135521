//! Comparison controllers: static equal split, a KPM-score heuristic, and a
//! reactive demand-proportional allocator without policy awareness.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::apportion;
use crate::tactical::{estimate_demands, DemandModel, KpmWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    StaticEqual,
    Heuristic,
    ReactiveFixedObjective,
    Agentic,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 4] = [
        ControllerKind::StaticEqual,
        ControllerKind::Heuristic,
        ControllerKind::ReactiveFixedObjective,
        ControllerKind::Agentic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::StaticEqual => "static_equal",
            ControllerKind::Heuristic => "heuristic",
            ControllerKind::ReactiveFixedObjective => "reactive_fixed_objective",
            ControllerKind::Agentic => "agentic",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown controller kind {s:?}"))
    }
}

/// `⌊total / n⌋` each, the remainder going to the first slices.
pub fn static_alloc(n_slices: usize, total_prb: u32) -> Vec<u32> {
    assert!(n_slices >= 1, "at least one slice");
    let n = n_slices as u32;
    let (base, rem) = (total_prb / n, total_prb % n);
    (0..n).map(|i| base + u32::from(i < rem)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicWeights {
    pub backlog: f64,
    pub demand: f64,
    pub inefficiency: f64,
}

impl Default for HeuristicWeights {
    fn default() -> Self {
        Self {
            backlog: 0.5,
            demand: 0.3,
            inefficiency: 0.2,
        }
    }
}

fn share(values: &[f64]) -> Vec<f64> {
    let sum: f64 = values.iter().sum();
    values
        .iter()
        .map(|v| if sum > 0.0 { v / sum } else { 0.0 })
        .collect()
}

/// Score-proportional caps: each slice's score mixes its share of the
/// backlog, its share of the windowed demand and its windowed unused-PRB
/// fraction. Slices with telemetry get at least one PRB.
pub fn heuristic_alloc(
    window: &KpmWindow,
    model: &DemandModel,
    weights: &HeuristicWeights,
) -> Vec<u32> {
    let total = model.total_prb;
    let aggs = window.aggregates();
    let n = aggs.len();
    let backlog: Vec<f64> = aggs
        .iter()
        .map(|a| a.as_ref().map_or(0.0, |a| a.latest_backlog as f64))
        .collect();
    let demand: Vec<f64> = estimate_demands(window, model)
        .iter()
        .map(|&d| f64::from(d))
        .collect();
    let (b, d) = (share(&backlog), share(&demand));
    let scores: Vec<f64> = (0..n)
        .map(|i| match &aggs[i] {
            Some(a) => {
                weights.backlog * b[i]
                    + weights.demand * d[i]
                    + weights.inefficiency * (1.0 - a.efficiency)
            }
            None => 0.0,
        })
        .collect();
    if scores.iter().all(|&s| s <= 0.0) {
        return equal(n, total);
    }
    let active: Vec<bool> = aggs.iter().map(Option::is_some).collect();
    let base: Vec<u64> = active.iter().map(|&a| u64::from(a)).collect();
    let floor_sum: u64 = base.iter().sum();
    if floor_sum > u64::from(total) {
        return equal(n, total);
    }
    let rest = apportion::water_fill(
        u64::from(total) - floor_sum,
        &scores,
        &vec![u64::from(total); n],
    );
    base.iter().zip(rest).map(|(a, b)| (a + b) as u32).collect()
}

/// Demand-proportional caps with the aggressive 1 s drain horizon; no
/// floors, step limits or latency protection.
pub fn reactive_alloc(window: &KpmWindow, model: &DemandModel) -> Vec<u32> {
    reactive_split(&estimate_demands(window, model), model.total_prb)
}

/// Proportional split of `total_prb` over `demands` (equal split when
/// nothing is demanded).
pub fn reactive_split(demands: &[u32], total_prb: u32) -> Vec<u32> {
    if demands.iter().all(|&d| d == 0) {
        return equal(demands.len(), total_prb);
    }
    let weights: Vec<f64> = demands.iter().map(|&d| f64::from(d)).collect();
    apportion::water_fill(
        u64::from(total_prb),
        &weights,
        &vec![u64::from(total_prb); demands.len()],
    )
    .into_iter()
    .map(|c| c as u32)
    .collect()
}

fn equal(n: usize, total: u32) -> Vec<u32> {
    apportion::equal_split(u64::from(total), &vec![u64::from(total); n])
        .into_iter()
        .map(|c| c as u32)
        .collect()
}

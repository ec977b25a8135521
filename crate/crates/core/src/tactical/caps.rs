use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::guard::GuardState;
use super::window::KpmWindow;
use crate::apportion;
use crate::domain::{PolicyObject, SliceId};

/// Maps windowed telemetry to PRB demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandModel {
    /// Seconds within which the current backlog should be drained.
    pub drain_horizon_s: f64,
    /// Nominal bytes one cap PRB serves per second, per slice.
    pub bytes_per_prb_per_second: Vec<f64>,
    pub total_prb: u32,
}

/// Demand in PRBs for one slice: the PRBs needed to carry the mean arrival
/// rate plus drain the latest backlog within the horizon, clamped to the
/// cell size. The arrival rate is the windowed mean throughput plus the
/// backlog growth rate across the window.
pub fn estimate_demand(window: &KpmWindow, slice_id: SliceId, model: &DemandModel) -> u32 {
    let Some(idx) = window.slice_ids().iter().position(|&id| id == slice_id) else {
        return 0;
    };
    let Some(a) = window.aggregate(idx) else {
        return 0;
    };
    let bpps = model.bytes_per_prb_per_second[idx];
    let growth = if a.span_s > 0.0 {
        ((a.latest_backlog as f64 - a.earliest_backlog as f64) / a.span_s).max(0.0)
    } else {
        0.0
    };
    let arrival_bps = (a.mean_throughput * 1e6 / 8.0 + growth).max(0.0);
    let prbs = arrival_bps / bpps + a.latest_backlog as f64 / (model.drain_horizon_s * bpps);
    let demand = (prbs - 1e-9).ceil().max(0.0);
    demand.min(f64::from(model.total_prb)) as u32
}

pub fn estimate_demands(window: &KpmWindow, model: &DemandModel) -> Vec<u32> {
    window
        .slice_ids()
        .iter()
        .map(|&id| estimate_demand(window, id, model))
        .collect()
}

/// A controller's candidate cap vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapProposal {
    pub proposal_id: String,
    pub controller_id: String,
    pub t: f64,
    pub cap_prb: Vec<u32>,
    /// Arbitration weight of the proposing controller under the policy.
    pub priority: f64,
    pub confidence: f64,
    /// Predicted priority-weighted throughput change, Mbit/s.
    pub expected_impact: f64,
}

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[error("no cap vector satisfies the policy from the current caps: {reason}")]
pub struct Infeasible {
    pub slice_id: Option<SliceId>,
    pub reason: String,
}

/// Unclamped target caps: every slice starts at its floor; the remaining
/// PRBs go to unmet demand (up to the ceiling), highest priority tier first
/// and proportionally to unmet demand inside a tier; any surplus once all
/// demand is met is split equally up to the ceilings.
///
/// Maximizes `Σ priority × min(cap, demand)` up to one PRB per slice.
pub fn target_caps(demands: &[u32], policy: &PolicyObject, total_prb: u32) -> Vec<u32> {
    let n = policy.slices.len();
    assert_eq!(demands.len(), n, "one demand per policy slice");
    let mut caps: Vec<u64> = policy
        .slices
        .iter()
        .map(|s| u64::from(s.floor_prb))
        .collect();
    let ceil: Vec<u64> = policy
        .slices
        .iter()
        .map(|s| u64::from(s.ceiling_prb.min(total_prb)))
        .collect();
    let mut remaining = u64::from(total_prb).saturating_sub(caps.iter().sum());

    let mut tiers: Vec<f64> = policy.slices.iter().map(|s| s.priority).collect();
    tiers.sort_by(|a, b| b.total_cmp(a));
    tiers.dedup();
    let mut demand_met = true;
    for tier in tiers {
        if remaining == 0 {
            break;
        }
        let unmet: Vec<u64> = (0..n)
            .map(|i| {
                if policy.slices[i].priority == tier {
                    u64::from(demands[i]).min(ceil[i]).saturating_sub(caps[i])
                } else {
                    0
                }
            })
            .collect();
        let weights: Vec<f64> = unmet.iter().map(|&u| u as f64).collect();
        let share = apportion::water_fill(remaining, &weights, &unmet);
        for i in 0..n {
            caps[i] += share[i];
        }
        remaining -= share.iter().sum::<u64>();
        if (0..n).any(|i| share[i] < unmet[i]) {
            demand_met = false;
            break;
        }
    }
    if demand_met && remaining > 0 {
        let room: Vec<u64> = (0..n).map(|i| ceil[i] - caps[i]).collect();
        let share = apportion::equal_split(remaining, &room);
        for i in 0..n {
            caps[i] += share[i];
        }
    }
    caps.into_iter().map(|c| c as u32).collect()
}

/// Per-slice `[lb, ub]` the next cap may take given the previous caps.
pub fn step_bounds(last: Option<&[u32]>, policy: &PolicyObject, total_prb: u32) -> Vec<(u32, u32)> {
    policy
        .slices
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let ceil = s.ceiling_prb.min(total_prb);
            match last {
                Some(last) => (
                    s.floor_prb.max(last[i].saturating_sub(policy.max_step_prb)),
                    ceil.min(last[i].saturating_add(policy.max_step_prb)),
                ),
                None => (s.floor_prb, ceil),
            }
        })
        .collect()
}

/// Whether some cap vector satisfies `policy` one step away from `last`.
pub fn reachable(
    policy: &PolicyObject,
    last: Option<&[u32]>,
    total_prb: u32,
) -> Result<(), Infeasible> {
    if last.is_some_and(|l| l.len() != policy.slices.len()) {
        return Err(Infeasible {
            slice_id: None,
            reason: "cap vector and policy disagree on the slice count".into(),
        });
    }
    let bounds = step_bounds(last, policy, total_prb);
    for (s, &(lb, ub)) in policy.slices.iter().zip(&bounds) {
        if lb > ub {
            return Err(Infeasible {
                slice_id: Some(s.slice_id),
                reason: format!("slice {} needs a cap in [{lb}, {ub}]", s.slice_id),
            });
        }
    }
    let lb_sum: u64 = bounds.iter().map(|&(lb, _)| u64::from(lb)).sum();
    if lb_sum > u64::from(total_prb) {
        return Err(Infeasible {
            slice_id: None,
            reason: format!("lower bounds sum to {lb_sum}, total is {total_prb}"),
        });
    }
    Ok(())
}

/// Clamps `target` into the policy envelope around `last` (floors,
/// ceilings, ±max_step). If the result exceeds the cell, the excess is
/// taken from the lowest-priority slices first, never below their lower
/// bound. PRBs released this way are not handed to anyone else.
pub fn project_caps(
    target: &[u32],
    last: Option<&[u32]>,
    policy: &PolicyObject,
    total_prb: u32,
) -> Result<Vec<u32>, Infeasible> {
    reachable(policy, last, total_prb)?;
    let bounds = step_bounds(last, policy, total_prb);
    let mut caps: Vec<u32> = target
        .iter()
        .zip(&bounds)
        .map(|(&t, &(lb, ub))| t.clamp(lb, ub))
        .collect();
    let mut excess = caps
        .iter()
        .map(|&c| u64::from(c))
        .sum::<u64>()
        .saturating_sub(u64::from(total_prb));
    if excess > 0 {
        let mut order: Vec<usize> = (0..caps.len()).collect();
        order.sort_by(|&a, &b| {
            policy.slices[a]
                .priority
                .total_cmp(&policy.slices[b].priority)
                .then(b.cmp(&a))
        });
        for i in order {
            let cut = u64::from(caps[i] - bounds[i].0).min(excess);
            caps[i] -= cut as u32;
            excess -= cut;
            if excess == 0 {
                break;
            }
        }
    }
    Ok(caps)
}

fn expected_impact(
    caps: &[u32],
    last: Option<&[u32]>,
    demands: &[u32],
    policy: &PolicyObject,
    model: &DemandModel,
) -> f64 {
    let Some(last) = last else { return 0.0 };
    (0..caps.len())
        .map(|i| {
            let gained = f64::from(caps[i].min(demands[i])) - f64::from(last[i].min(demands[i]));
            policy.slices[i].priority * gained * model.bytes_per_prb_per_second[i] * 8.0 / 1e6
        })
        .sum()
}

/// Policy-constrained cap proposal from the current window.
pub fn compute_caps(
    window: &KpmWindow,
    policy: &PolicyObject,
    guard: &GuardState,
    model: &DemandModel,
    controller_id: &str,
    t: f64,
) -> Result<CapProposal, Infeasible> {
    let demands = estimate_demands(window, model);
    let target = target_caps(&demands, policy, model.total_prb);
    let last = guard.last_caps.as_deref();
    let caps = project_caps(&target, last, policy, model.total_prb)?;
    Ok(CapProposal {
        proposal_id: format!("{controller_id}@{t}"),
        controller_id: controller_id.into(),
        t,
        expected_impact: expected_impact(&caps, last, &demands, policy, model),
        cap_prb: caps,
        priority: policy.controller_priority(controller_id),
        confidence: window.fill_fraction(),
    })
}

/// Wraps an externally produced cap vector (baseline owner or bridge) as a
/// proposal after projecting it into the policy envelope.
pub fn projected_proposal(
    raw: &[u32],
    window: &KpmWindow,
    policy: &PolicyObject,
    guard: &GuardState,
    model: &DemandModel,
    controller_id: &str,
    t: f64,
) -> Result<CapProposal, Infeasible> {
    let last = guard.last_caps.as_deref();
    let caps = project_caps(raw, last, policy, model.total_prb)?;
    let demands = estimate_demands(window, model);
    Ok(CapProposal {
        proposal_id: format!("{controller_id}@{t}"),
        controller_id: controller_id.into(),
        t,
        expected_impact: expected_impact(&caps, last, &demands, policy, model),
        cap_prb: caps,
        priority: policy.controller_priority(controller_id),
        confidence: window.fill_fraction(),
    })
}

use serde::{Deserialize, Serialize};

use super::policy::PolicyObject;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArbitrationOutcome {
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbitrationEntry {
    pub proposal_id: String,
    pub outcome: ArbitrationOutcome,
    pub reason: String,
}

/// Per-slice PRB caps enforced on the simulated cell, with provenance.
///
/// `cap_prb[i]` belongs to the i-th slice of the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationDecision {
    pub t: f64,
    pub cap_prb: Vec<u32>,
    pub policy_version: u64,
    pub controller_id: String,
    #[serde(default)]
    pub arbitration_trace: Vec<ArbitrationEntry>,
}

impl AllocationDecision {
    pub fn total(&self) -> u64 {
        self.cap_prb.iter().map(|&c| u64::from(c)).sum()
    }
}

/// Lists every way `caps` breaks the decision invariants under `policy`:
/// total budget, per-slice floors, ceilings, and the per-step change bound
/// relative to `prev`. Empty means the decision is safe.
pub fn decision_violations(
    caps: &[u32],
    prev: Option<&[u32]>,
    policy: &PolicyObject,
    total_prb: u32,
) -> Vec<String> {
    let mut out = Vec::new();
    let sum: u64 = caps.iter().map(|&c| u64::from(c)).sum();
    if sum > u64::from(total_prb) {
        out.push(format!("sum {sum} exceeds total {total_prb}"));
    }
    if caps.len() != policy.slices.len() {
        out.push(format!(
            "{} caps for {} slices",
            caps.len(),
            policy.slices.len()
        ));
        return out;
    }
    for (i, (cap, s)) in caps.iter().zip(&policy.slices).enumerate() {
        if *cap < s.floor_prb {
            out.push(format!(
                "slice {} cap {cap} below floor {}",
                s.slice_id, s.floor_prb
            ));
        }
        if *cap > s.ceiling_prb {
            out.push(format!(
                "slice {} cap {cap} above ceiling {}",
                s.slice_id, s.ceiling_prb
            ));
        }
        if let Some(prev) = prev {
            let delta = cap.abs_diff(prev[i]);
            if delta > policy.max_step_prb {
                out.push(format!(
                    "slice {} moved {delta} PRBs, step limit {}",
                    s.slice_id, policy.max_step_prb
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{SliceClass, SliceSpec};

    #[test]
    fn flags_each_invariant() {
        let slices: Vec<SliceSpec> = (1..=2)
            .map(|id| SliceSpec {
                slice_id: id,
                class: SliceClass::Regular,
                latency_target: None,
                display_name: String::new(),
            })
            .collect();
        let mut p = PolicyObject::permissive(&slices, 10);
        p.slices[0].floor_prb = 3;
        p.max_step_prb = 2;
        assert!(decision_violations(&[5, 5], Some(&[4, 6]), &p, 10).is_empty());
        let v = decision_violations(&[2, 9], Some(&[5, 5]), &p, 10);
        assert_eq!(v.len(), 4, "{v:?}");
    }
}

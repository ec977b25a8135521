use std::cmp::Ordering;

use super::caps::CapProposal;
use crate::domain::{ArbitrationEntry, ArbitrationOutcome, PolicyObject};

/// Winning proposal and the full ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct Arbitration {
    pub winner: CapProposal,
    pub trace: Vec<ArbitrationEntry>,
}

fn rank(a: &CapProposal, b: &CapProposal, policy: &PolicyObject) -> Ordering {
    let pa = policy.controller_priority(&a.controller_id);
    let pb = policy.controller_priority(&b.controller_id);
    pb.total_cmp(&pa)
        .then(b.confidence.total_cmp(&a.confidence))
        .then(b.expected_impact.total_cmp(&a.expected_impact))
        .then_with(|| a.controller_id.cmp(&b.controller_id))
        .then_with(|| a.proposal_id.cmp(&b.proposal_id))
        .then_with(|| a.cap_prb.cmp(&b.cap_prb))
}

/// Orders proposals by controller priority under `policy`, then confidence,
/// then expected impact (all descending), then controller id ascending.
/// Returns `None` for an empty list: no decision, caps persist.
pub fn arbitrate(proposals: &[CapProposal], policy: &PolicyObject) -> Option<Arbitration> {
    let mut ranked: Vec<&CapProposal> = proposals.iter().collect();
    ranked.sort_by(|a, b| rank(a, b, policy));
    let winner = (*ranked.first()?).clone();
    let trace = ranked
        .iter()
        .enumerate()
        .map(|(pos, p)| ArbitrationEntry {
            proposal_id: p.proposal_id.clone(),
            outcome: if pos == 0 {
                ArbitrationOutcome::Accepted
            } else {
                ArbitrationOutcome::Rejected
            },
            reason: format!(
                "rank {}: priority {}, confidence {:.3}, impact {:.3}",
                pos + 1,
                policy.controller_priority(&p.controller_id),
                p.confidence,
                p.expected_impact
            ),
        })
        .collect();
    Some(Arbitration { winner, trace })
}

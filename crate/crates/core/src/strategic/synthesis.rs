use serde::{Deserialize, Serialize};

use super::ladder::{CorrectiveDirective, DirectivePayload, Rung};
use crate::domain::{
    apply_intent, validate_policy, GuardrailSet, Intent, PolicyObject, PromotionConfig,
    ValidationReport,
};

/// A fold step that was dropped because its result broke a guardrail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refusal {
    /// Intent tag or directive description.
    pub source: String,
    pub report: ValidationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Synthesis {
    pub policy: PolicyObject,
    pub changed: bool,
    pub applied: Vec<String>,
    pub refusals: Vec<Refusal>,
}

fn apply_adjustment(policy: &PolicyObject, payload: &DirectivePayload) -> Option<PolicyObject> {
    let mut next = policy.clone();
    match payload {
        DirectivePayload::RaiseFloor { slice_id, by } => {
            let s = next.slice_mut(*slice_id)?;
            s.floor_prb += by;
            s.ceiling_prb = s.ceiling_prb.max(s.floor_prb);
        }
        DirectivePayload::ReduceMaxStep { to } => next.max_step_prb = *to,
        _ => return None,
    }
    Some(next)
}

/// Folds intents (earliest first) and then policy-adjustment directives
/// into one candidate. Each step must pass [`validate_policy`]; a failing
/// step is dropped with a refusal and the fold continues. The result is
/// the unchanged `current` when nothing took effect, else `current`'s
/// version + 1.
pub fn synthesize_policy(
    current: &PolicyObject,
    intents: &[Intent],
    directives: &[CorrectiveDirective],
    guard: &GuardrailSet,
    promotion: &PromotionConfig,
) -> Synthesis {
    let mut policy = current.clone();
    let mut applied = Vec::new();
    let mut refusals = Vec::new();
    let mut ordered: Vec<&Intent> = intents.iter().collect();
    ordered.sort_by(|a, b| a.received_at.total_cmp(&b.received_at));
    for intent in ordered {
        match apply_intent(&policy, intent, guard, promotion) {
            Ok(next) => {
                policy = next;
                applied.push(intent.tag());
            }
            Err(r) => refusals.push(Refusal {
                source: intent.tag(),
                report: r.report,
            }),
        }
    }
    for d in directives.iter().filter(|d| d.rung == Rung::AdjustPolicy) {
        let Some(next) = apply_adjustment(&policy, &d.payload) else {
            refusals.push(Refusal {
                source: d.describe(),
                report: ValidationReport::single(
                    "unknown_slice",
                    "payload.slice_id",
                    "directive names no policy slice",
                ),
            });
            continue;
        };
        let report = validate_policy(&next, guard);
        if report.ok {
            policy = next;
            applied.push(d.describe());
        } else {
            refusals.push(Refusal {
                source: d.describe(),
                report,
            });
        }
    }
    if policy.same_rules(current) {
        return Synthesis {
            policy: current.clone(),
            changed: false,
            applied,
            refusals,
        };
    }
    policy.version = current.version + 1;
    policy.intent_tag = applied.join(",");
    Synthesis {
        policy,
        changed: true,
        applied,
        refusals,
    }
}

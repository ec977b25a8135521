use serde::{Deserialize, Serialize};

use super::policy::{validate_policy, GuardrailSet, PolicyObject, PriorState, ValidationReport};
use super::{SliceClass, SliceId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentKind {
    PromoteSlice,
    DemoteSlice,
    SetLatencyTarget,
    SetPriorityWeight,
}

impl IntentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IntentKind::PromoteSlice => "promote_slice",
            IntentKind::DemoteSlice => "demote_slice",
            IntentKind::SetLatencyTarget => "set_latency_target",
            IntentKind::SetPriorityWeight => "set_priority_weight",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentSource {
    Operator,
    Scripted,
}

/// Kind-specific arguments. Promotion and demotion take none.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IntentParameters {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_target_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intent {
    pub kind: IntentKind,
    pub target_slice: SliceId,
    #[serde(default)]
    pub parameters: IntentParameters,
    pub source: IntentSource,
    pub received_at: f64,
}

impl Intent {
    pub fn new(kind: IntentKind, target_slice: SliceId) -> Self {
        Self {
            kind,
            target_slice,
            parameters: IntentParameters::default(),
            source: IntentSource::Operator,
            received_at: 0.0,
        }
    }

    pub fn with_latency_target(mut self, ms: f64) -> Self {
        self.parameters.latency_target_ms = Some(ms);
        self
    }

    pub fn with_weight(mut self, w: f64) -> Self {
        self.parameters.weight = Some(w);
        self
    }

    pub fn at(mut self, t: f64, source: IntentSource) -> Self {
        self.received_at = t;
        self.source = source;
        self
    }

    pub fn tag(&self) -> String {
        format!("{}:{}", self.kind.as_str(), self.target_slice)
    }
}

/// How a VIP promotion reshapes a slice's policy entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromotionConfig {
    pub vip_weight: f64,
    /// Ceiling granted on promotion; `None` means the cell total.
    #[serde(default)]
    pub vip_ceiling: Option<u32>,
}

impl Default for PromotionConfig {
    fn default() -> Self {
        Self {
            vip_weight: 3.0,
            vip_ceiling: None,
        }
    }
}

/// An intent that could not be folded into the policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentRefusal {
    pub intent: Intent,
    pub report: ValidationReport,
}

impl std::fmt::Display for IntentRefusal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let rules: Vec<&str> = self
            .report
            .violations
            .iter()
            .map(|v| v.rule_id.as_str())
            .collect();
        write!(
            f,
            "intent {} refused: {}",
            self.intent.tag(),
            rules.join(", ")
        )
    }
}

impl std::error::Error for IntentRefusal {}

/// Folds one intent into a policy, producing version + 1.
///
/// The result always passes [`validate_policy`]; anything that would not is
/// refused with the failing report. Latency-sensitive floors are never
/// touched by promotion or demotion.
pub fn apply_intent(
    policy: &PolicyObject,
    intent: &Intent,
    guard: &GuardrailSet,
    promotion: &PromotionConfig,
) -> Result<PolicyObject, IntentRefusal> {
    let refuse = |rule: &str, field: &str, message: String| IntentRefusal {
        intent: intent.clone(),
        report: ValidationReport::single(rule, field, message),
    };
    let mut next = policy.clone();
    let id = intent.target_slice;
    let Some(entry) = next.slice_mut(id) else {
        return Err(refuse(
            "unknown_slice",
            "target_slice",
            format!("no slice {id} in policy"),
        ));
    };

    match intent.kind {
        IntentKind::PromoteSlice => {
            if entry.class == SliceClass::Vip {
                return Err(refuse(
                    "already_vip",
                    "target_slice",
                    format!("slice {id} is already VIP"),
                ));
            }
            if guard.forbids(entry.class, SliceClass::Vip) {
                return Err(refuse(
                    "forbidden_transition",
                    "target_slice",
                    format!("{} -> vip is forbidden", entry.class.as_str()),
                ));
            }
            entry.restore = Some(PriorState {
                class: entry.class,
                priority: entry.priority,
                ceiling_prb: entry.ceiling_prb,
            });
            entry.class = SliceClass::Vip;
            entry.priority = promotion.vip_weight;
            entry.ceiling_prb = promotion
                .vip_ceiling
                .unwrap_or(guard.total_prb)
                .max(entry.floor_prb);
        }
        IntentKind::DemoteSlice => {
            if entry.class != SliceClass::Vip {
                return Err(refuse(
                    "not_vip",
                    "target_slice",
                    format!("slice {id} is not VIP"),
                ));
            }
            let prior = entry.restore.take().unwrap_or(PriorState {
                class: SliceClass::Regular,
                priority: 1.0,
                ceiling_prb: entry.ceiling_prb,
            });
            if guard.forbids(SliceClass::Vip, prior.class) {
                return Err(refuse(
                    "forbidden_transition",
                    "target_slice",
                    format!("vip -> {} is forbidden", prior.class.as_str()),
                ));
            }
            entry.class = prior.class;
            entry.priority = prior.priority;
            entry.ceiling_prb = prior.ceiling_prb.max(entry.floor_prb);
        }
        IntentKind::SetLatencyTarget => {
            if entry.class != SliceClass::LatencySensitive {
                return Err(refuse(
                    "not_latency_slice",
                    "target_slice",
                    format!("slice {id} has no latency target"),
                ));
            }
            let Some(ms) = intent.parameters.latency_target_ms else {
                return Err(refuse(
                    "missing_parameter",
                    "parameters.latency_target_ms",
                    "no target given".into(),
                ));
            };
            entry.latency_target = Some(ms);
        }
        IntentKind::SetPriorityWeight => {
            let Some(w) = intent.parameters.weight else {
                return Err(refuse(
                    "missing_parameter",
                    "parameters.weight",
                    "no weight given".into(),
                ));
            };
            entry.priority = w;
        }
    }

    next.version = policy.version + 1;
    next.intent_tag = intent.tag();
    next.issued_at = intent.received_at;
    let report = validate_policy(&next, guard);
    if report.ok {
        Ok(next)
    } else {
        Err(IntentRefusal {
            intent: intent.clone(),
            report,
        })
    }
}

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{SliceClass, SliceId, SliceSpec};

pub const POLICY_SCHEMA: &str = "policy/v1";

fn policy_schema() -> String {
    POLICY_SCHEMA.to_string()
}

/// Class, weight and ceiling a slice had before a promotion, kept so that a
/// later demotion can restore them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorState {
    pub class: SliceClass,
    pub priority: f64,
    pub ceiling_prb: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlicePolicy {
    pub slice_id: SliceId,
    pub class: SliceClass,
    pub floor_prb: u32,
    pub ceiling_prb: u32,
    /// Non-negative proportional-share weight.
    pub priority: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restore: Option<PriorState>,
}

/// Structured A1-style policy handed from the strategic to the tactical tier.
///
/// `slices` is ordered like the scenario's slice list; per-slice vectors
/// elsewhere in the crate (caps, demands) use the same order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyObject {
    #[serde(default = "policy_schema")]
    pub schema: String,
    pub version: u64,
    pub slices: Vec<SlicePolicy>,
    /// Largest per-decision change of any slice cap.
    pub max_step_prb: u32,
    /// Minimum spacing between accepted tactical decisions, seconds.
    pub min_decision_interval: f64,
    #[serde(default)]
    pub intent_tag: String,
    #[serde(default)]
    pub issued_at: f64,
    /// Arbitration priority per controller id; unknown controllers weigh 1.0.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub controller_priority: BTreeMap<String, f64>,
}

impl PolicyObject {
    /// Floors 0, ceilings at the cell total, equal weights.
    pub fn permissive(slices: &[SliceSpec], total_prb: u32) -> Self {
        Self {
            schema: policy_schema(),
            version: 1,
            slices: slices
                .iter()
                .map(|s| SlicePolicy {
                    slice_id: s.slice_id,
                    class: s.class,
                    floor_prb: 0,
                    ceiling_prb: total_prb,
                    priority: 1.0,
                    latency_target: s.latency_target,
                    restore: None,
                })
                .collect(),
            max_step_prb: total_prb.max(1),
            min_decision_interval: 1.0,
            intent_tag: "baseline".into(),
            issued_at: 0.0,
            controller_priority: BTreeMap::new(),
        }
    }

    pub fn slice(&self, id: SliceId) -> Option<&SlicePolicy> {
        self.slices.iter().find(|s| s.slice_id == id)
    }

    pub fn slice_mut(&mut self, id: SliceId) -> Option<&mut SlicePolicy> {
        self.slices.iter_mut().find(|s| s.slice_id == id)
    }

    pub fn index_of(&self, id: SliceId) -> Option<usize> {
        self.slices.iter().position(|s| s.slice_id == id)
    }

    pub fn floors(&self) -> Vec<u32> {
        self.slices.iter().map(|s| s.floor_prb).collect()
    }

    pub fn ceilings(&self) -> Vec<u32> {
        self.slices.iter().map(|s| s.ceiling_prb).collect()
    }

    pub fn priorities(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.priority).collect()
    }

    pub fn controller_priority(&self, controller_id: &str) -> f64 {
        self.controller_priority
            .get(controller_id)
            .copied()
            .unwrap_or(1.0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("policy serializes")
    }

    /// Same content apart from version and issue metadata.
    pub fn same_rules(&self, other: &PolicyObject) -> bool {
        self.slices == other.slices
            && self.max_step_prb == other.max_step_prb
            && self.min_decision_interval == other.min_decision_interval
            && self.controller_priority == other.controller_priority
    }
}

/// Hard constraints held in the knowledge base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuardrailSet {
    pub total_prb: u32,
    pub max_step_prb_limit: u32,
    pub min_floor_latency_slice: u32,
    #[serde(default)]
    pub forbidden_transitions: Vec<(SliceClass, SliceClass)>,
    pub max_policy_updates_per_minute: u32,
    /// Reject zero weights on latency-sensitive slices.
    #[serde(default = "yes")]
    pub protect_latency_weight: bool,
}

fn yes() -> bool {
    true
}

impl GuardrailSet {
    pub fn new(total_prb: u32) -> Self {
        Self {
            total_prb,
            max_step_prb_limit: total_prb.max(1),
            min_floor_latency_slice: 0,
            forbidden_transitions: vec![
                (SliceClass::LatencySensitive, SliceClass::Vip),
                (SliceClass::Vip, SliceClass::LatencySensitive),
            ],
            max_policy_updates_per_minute: 6,
            protect_latency_weight: true,
        }
    }

    pub fn forbids(&self, from: SliceClass, to: SliceClass) -> bool {
        self.forbidden_transitions
            .iter()
            .any(|&(a, b)| a == from && b == to)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule_id: String,
    pub message: String,
    pub offending_field: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            ok: violations.is_empty(),
            violations,
        }
    }

    pub fn single(rule_id: &str, field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::from_violations(vec![Violation {
            rule_id: rule_id.into(),
            message: message.into(),
            offending_field: field.into(),
        }])
    }

    pub fn has_rule(&self, rule_id: &str) -> bool {
        self.violations.iter().any(|v| v.rule_id == rule_id)
    }
}

/// Checks a policy against the guardrails and returns every violated rule.
pub fn validate_policy(policy: &PolicyObject, guard: &GuardrailSet) -> ValidationReport {
    let mut out = Vec::new();
    let mut push = |rule: &str, field: String, message: String| {
        out.push(Violation {
            rule_id: rule.into(),
            message,
            offending_field: field,
        })
    };
    let total = guard.total_prb;

    if policy.schema != POLICY_SCHEMA {
        push(
            "schema_mismatch",
            "schema".into(),
            format!("expected {POLICY_SCHEMA}, got {}", policy.schema),
        );
    }
    if policy.slices.is_empty() {
        push(
            "empty_policy",
            "slices".into(),
            "policy names no slices".into(),
        );
    }

    let mut ids = BTreeSet::new();
    let mut floor_sum: u64 = 0;
    for (i, s) in policy.slices.iter().enumerate() {
        let f = |name: &str| format!("slices[{i}].{name}");
        if !ids.insert(s.slice_id) {
            push(
                "duplicate_slice",
                f("slice_id"),
                format!("slice {} listed twice", s.slice_id),
            );
        }
        floor_sum += u64::from(s.floor_prb);
        if s.ceiling_prb < s.floor_prb {
            push(
                "ceiling_below_floor",
                f("ceiling_prb"),
                format!("ceiling {} below floor {}", s.ceiling_prb, s.floor_prb),
            );
        }
        if s.ceiling_prb > total {
            push(
                "ceiling_exceeds_total",
                f("ceiling_prb"),
                format!("ceiling {} above total {total}", s.ceiling_prb),
            );
        }
        if !(s.priority.is_finite() && s.priority >= 0.0) {
            push(
                "priority_invalid",
                f("priority"),
                format!("weight {} is not a non-negative number", s.priority),
            );
        }
        if s.class == SliceClass::LatencySensitive {
            if s.floor_prb < guard.min_floor_latency_slice {
                push(
                    "latency_floor_protection",
                    f("floor_prb"),
                    format!(
                        "latency-sensitive slice {} floor {} below protected minimum {}",
                        s.slice_id, s.floor_prb, guard.min_floor_latency_slice
                    ),
                );
            }
            if guard.protect_latency_weight && s.priority == 0.0 {
                push(
                    "latency_weight_protection",
                    f("priority"),
                    format!(
                        "latency-sensitive slice {} cannot be zero-weighted",
                        s.slice_id
                    ),
                );
            }
        }
        if let Some(t) = s.latency_target {
            if !(t.is_finite() && t > 0.0) {
                push(
                    "latency_target_invalid",
                    f("latency_target"),
                    format!("target {t} ms is not positive"),
                );
            }
        }
    }
    if floor_sum > u64::from(total) {
        push(
            "floor_sum_exceeds_total",
            "slices[*].floor_prb".into(),
            format!("floors sum to {floor_sum}, total is {total}"),
        );
    }
    if policy.max_step_prb < 1 || policy.max_step_prb > guard.max_step_prb_limit {
        push(
            "step_out_of_bounds",
            "max_step_prb".into(),
            format!(
                "max_step_prb {} outside [1, {}]",
                policy.max_step_prb, guard.max_step_prb_limit
            ),
        );
    }
    if !(policy.min_decision_interval.is_finite() && policy.min_decision_interval >= 0.0) {
        push(
            "decision_interval_invalid",
            "min_decision_interval".into(),
            format!(
                "{} is not a non-negative number of seconds",
                policy.min_decision_interval
            ),
        );
    }
    for (id, w) in &policy.controller_priority {
        if !(w.is_finite() && *w >= 0.0) {
            push(
                "priority_invalid",
                format!("controller_priority.{id}"),
                format!("weight {w} is not a non-negative number"),
            );
        }
    }
    ValidationReport::from_violations(out)
}

/// Policy update-rate budget: `issued_at` holds the issue times of earlier
/// updates. Fails when another update at `now` would exceed the per-minute
/// allowance.
pub fn check_update_budget(issued_at: &[f64], now: f64, guard: &GuardrailSet) -> ValidationReport {
    let recent = issued_at
        .iter()
        .filter(|&&t| t > now - 60.0 && t <= now)
        .count();
    if recent as u32 >= guard.max_policy_updates_per_minute {
        ValidationReport::single(
            "update_rate_budget",
            "version",
            format!(
                "{recent} policy updates in the last minute, budget is {}",
                guard.max_policy_updates_per_minute
            ),
        )
    } else {
        ValidationReport::from_violations(Vec::new())
    }
}

//! Shared value types: slices, A1-style policies, guardrails, intents,
//! telemetry records and allocation decisions.
//!
//! Everything here is a plain value. Updates construct new values, so the
//! types can be shared read-only between agents.

mod decision;
mod intent;
mod policy;
mod telemetry;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use decision::{decision_violations, AllocationDecision, ArbitrationEntry, ArbitrationOutcome};
pub use intent::{
    apply_intent, Intent, IntentKind, IntentParameters, IntentRefusal, IntentSource,
    PromotionConfig,
};
pub use policy::{
    check_update_budget, validate_policy, GuardrailSet, PolicyObject, PriorState, SlicePolicy,
    ValidationReport, Violation, POLICY_SCHEMA,
};
pub use telemetry::{resource_efficiency, KpmRecord, TelemetryError};

pub type SliceId = u32;

/// Service class of a slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceClass {
    Bandwidth,
    LatencySensitive,
    Regular,
    Vip,
}

impl SliceClass {
    pub fn as_str(self) -> &'static str {
        match self {
            SliceClass::Bandwidth => "bandwidth",
            SliceClass::LatencySensitive => "latency_sensitive",
            SliceClass::Regular => "regular",
            SliceClass::Vip => "vip",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSpec {
    pub slice_id: SliceId,
    pub class: SliceClass,
    /// Delay target in milliseconds; present iff the slice is latency sensitive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_target: Option<f64>,
    #[serde(default)]
    pub display_name: String,
}

/// A malformed configuration value, named by its field path.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{code} at {field}: {message}")]
pub struct ConfigError {
    pub code: &'static str,
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(code: &'static str, field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code,
            field: field.into(),
            message: message.into(),
        }
    }
}

impl SliceSpec {
    pub fn validate(&self, field: &str) -> Result<(), ConfigError> {
        match (self.class, self.latency_target) {
            (SliceClass::LatencySensitive, None) => Err(ConfigError::new(
                "missing_latency_target",
                format!("{field}.latency_target"),
                "latency-sensitive slices need a delay target",
            )),
            (SliceClass::LatencySensitive, Some(t)) if !(t.is_finite() && t > 0.0) => {
                Err(ConfigError::new(
                    "invalid_latency_target",
                    format!("{field}.latency_target"),
                    format!("must be a positive number of milliseconds, got {t}"),
                ))
            }
            (SliceClass::LatencySensitive, Some(_)) => Ok(()),
            (_, Some(_)) => Err(ConfigError::new(
                "unexpected_latency_target",
                format!("{field}.latency_target"),
                "only latency-sensitive slices carry a delay target",
            )),
            (_, None) => Ok(()),
        }
    }
}

/// Validates a full slice list: per-slice rules plus id uniqueness.
pub fn validate_slices(slices: &[SliceSpec]) -> Result<(), ConfigError> {
    if slices.is_empty() {
        return Err(ConfigError::new(
            "no_slices",
            "slices",
            "at least one slice is required",
        ));
    }
    let mut seen = std::collections::BTreeSet::new();
    for (i, s) in slices.iter().enumerate() {
        let field = format!("slices[{i}]");
        s.validate(&field)?;
        if !seen.insert(s.slice_id) {
            return Err(ConfigError::new(
                "duplicate_slice",
                format!("{field}.slice_id"),
                format!("slice id {} appears more than once", s.slice_id),
            ));
        }
    }
    Ok(())
}

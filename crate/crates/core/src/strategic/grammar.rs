use serde::{Deserialize, Serialize};

use crate::domain::{Intent, IntentKind, SliceId};

/// The closed operator grammar, as shown to clients on rejection.
pub const INTENT_GRAMMAR: &[&str] = &[
    "promote slice <N> to VIP",
    "demote slice <N>",
    "set latency target of slice <N> to <X> ms",
    "set weight of slice <N> to <W>",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrammarRejection {
    pub utterance: String,
    pub message: String,
    pub grammar: Vec<String>,
}

impl GrammarRejection {
    fn new(utterance: &str, message: impl Into<String>) -> Self {
        Self {
            utterance: utterance.into(),
            message: message.into(),
            grammar: INTENT_GRAMMAR.iter().map(|s| s.to_string()).collect(),
        }
    }
}

fn slice_id(token: &str) -> Option<SliceId> {
    token.parse().ok()
}

fn positive(token: &str) -> Option<f64> {
    token
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite() && *v > 0.0)
}

fn non_negative(token: &str) -> Option<f64> {
    token
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite() && *v >= 0.0)
}

/// Matches an utterance against the grammar. Keywords are
/// case-insensitive and whitespace is collapsed.
pub fn parse_intent(utterance: &str) -> Result<Intent, GrammarRejection> {
    let tokens: Vec<String> = utterance
        .split_whitespace()
        .map(str::to_lowercase)
        .collect();
    let t: Vec<&str> = tokens.iter().map(String::as_str).collect();
    let bad_number = || GrammarRejection::new(utterance, "numeric slot out of range");
    match t.as_slice() {
        ["promote", "slice", n, "to", "vip"] => {
            let id = slice_id(n).ok_or_else(bad_number)?;
            Ok(Intent::new(IntentKind::PromoteSlice, id))
        }
        ["demote", "slice", n] => {
            let id = slice_id(n).ok_or_else(bad_number)?;
            Ok(Intent::new(IntentKind::DemoteSlice, id))
        }
        ["set", "latency", "target", "of", "slice", n, "to", x, "ms"] => {
            let id = slice_id(n).ok_or_else(bad_number)?;
            let ms = positive(x).ok_or_else(bad_number)?;
            Ok(Intent::new(IntentKind::SetLatencyTarget, id).with_latency_target(ms))
        }
        ["set", "weight", "of", "slice", n, "to", w] => {
            let id = slice_id(n).ok_or_else(bad_number)?;
            let w = non_negative(w).ok_or_else(bad_number)?;
            Ok(Intent::new(IntentKind::SetPriorityWeight, id).with_weight(w))
        }
        _ => Err(GrammarRejection::new(
            utterance,
            "utterance does not match the intent grammar",
        )),
    }
}

/// Canonical text for an intent; [`parse_intent`] inverts it.
pub fn render_intent(intent: &Intent) -> String {
    let n = intent.target_slice;
    match intent.kind {
        IntentKind::PromoteSlice => format!("promote slice {n} to VIP"),
        IntentKind::DemoteSlice => format!("demote slice {n}"),
        IntentKind::SetLatencyTarget => format!(
            "set latency target of slice {n} to {} ms",
            intent.parameters.latency_target_ms.unwrap_or(f64::NAN)
        ),
        IntentKind::SetPriorityWeight => {
            format!(
                "set weight of slice {n} to {}",
                intent.parameters.weight.unwrap_or(f64::NAN)
            )
        }
    }
}

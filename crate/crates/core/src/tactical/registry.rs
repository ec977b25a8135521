use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const SLM_CONTROLLER: &str = "slm-tactical";
pub const ML_CONTROLLER: &str = "ml-demand";
pub const LEGACY_CONTROLLER: &str = "legacy-heuristic";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XappKind {
    Slm,
    Ml,
    Legacy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XappState {
    Active,
    Inactive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XappEntry {
    pub controller_id: String,
    pub kind: XappKind,
    pub state: XappState,
    pub config: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum RegistryTransition {
    Activate {
        controller_id: String,
    },
    Deactivate {
        controller_id: String,
    },
    Reconfigure {
        controller_id: String,
        config: Value,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegistryError {
    #[error("unknown controller {0}")]
    UnknownController(String),
    #[error("activating {candidate} while {owner} still owns the slice caps")]
    SecondOwner { candidate: String, owner: String },
    #[error("transition batch leaves no decision owner")]
    NoOwner,
}

/// What the strategic tier asks of the controller set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "directive", rename_all = "snake_case")]
pub enum OrchestrationDirective {
    /// Hand cap ownership to the legacy heuristic.
    FallbackToHeuristic,
    /// Hand cap ownership to a named controller.
    SwitchTo { controller_id: String },
    Reconfigure {
        controller_id: String,
        config: Value,
    },
}

/// Controllers eligible to own the slice-cap control variable. Exactly one
/// is active at any time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XappRegistry {
    entries: Vec<XappEntry>,
}

impl Default for XappRegistry {
    fn default() -> Self {
        Self::standard(2.0)
    }
}

impl XappRegistry {
    /// The policy-aware SLM allocator as owner, with an ML demand-following
    /// allocator and the legacy heuristic registered as inactive fallbacks.
    pub fn standard(drain_horizon_s: f64) -> Self {
        let entry = |id: &str, kind, state, cfg: Value| XappEntry {
            controller_id: id.into(),
            kind,
            state,
            config: cfg,
        };
        Self {
            entries: vec![
                entry(
                    SLM_CONTROLLER,
                    XappKind::Slm,
                    XappState::Active,
                    serde_json::json!({"drain_horizon_s": drain_horizon_s}),
                ),
                entry(
                    ML_CONTROLLER,
                    XappKind::Ml,
                    XappState::Inactive,
                    serde_json::json!({"drain_horizon_s": 1.0}),
                ),
                entry(
                    LEGACY_CONTROLLER,
                    XappKind::Legacy,
                    XappState::Inactive,
                    serde_json::json!({}),
                ),
            ],
        }
    }

    pub fn entries(&self) -> &[XappEntry] {
        &self.entries
    }

    pub fn get(&self, controller_id: &str) -> Option<&XappEntry> {
        self.entries
            .iter()
            .find(|e| e.controller_id == controller_id)
    }

    pub fn owner(&self) -> &XappEntry {
        self.entries
            .iter()
            .find(|e| e.state == XappState::Active)
            .expect("registry always has an owner")
    }

    /// Applies a batch atomically: either every transition succeeds and one
    /// owner remains, or the registry is unchanged.
    pub fn apply(&mut self, transitions: &[RegistryTransition]) -> Result<(), RegistryError> {
        let mut next = self.entries.clone();
        for tr in transitions {
            let id = match tr {
                RegistryTransition::Activate { controller_id }
                | RegistryTransition::Deactivate { controller_id }
                | RegistryTransition::Reconfigure { controller_id, .. } => controller_id,
            };
            let idx = next
                .iter()
                .position(|e| &e.controller_id == id)
                .ok_or_else(|| RegistryError::UnknownController(id.clone()))?;
            match tr {
                RegistryTransition::Activate { .. } => {
                    if let Some(owner) = next
                        .iter()
                        .find(|e| e.state == XappState::Active && &e.controller_id != id)
                    {
                        return Err(RegistryError::SecondOwner {
                            candidate: id.clone(),
                            owner: owner.controller_id.clone(),
                        });
                    }
                    next[idx].state = XappState::Active;
                }
                RegistryTransition::Deactivate { .. } => next[idx].state = XappState::Inactive,
                RegistryTransition::Reconfigure { config, .. } => next[idx].config = config.clone(),
            }
        }
        if next.iter().filter(|e| e.state == XappState::Active).count() != 1 {
            return Err(RegistryError::NoOwner);
        }
        self.entries = next;
        Ok(())
    }
}

/// Turns a directive into registry transitions and applies them. Returns
/// the transitions actually applied (empty if the directive is already in
/// effect).
pub fn orchestrate(
    registry: &mut XappRegistry,
    directive: &OrchestrationDirective,
) -> Result<Vec<RegistryTransition>, RegistryError> {
    let owner = registry.owner().controller_id.clone();
    let transitions = match directive {
        OrchestrationDirective::FallbackToHeuristic => switch(&owner, LEGACY_CONTROLLER),
        OrchestrationDirective::SwitchTo { controller_id } => {
            if registry.get(controller_id).is_none() {
                return Err(RegistryError::UnknownController(controller_id.clone()));
            }
            switch(&owner, controller_id)
        }
        OrchestrationDirective::Reconfigure {
            controller_id,
            config,
        } => vec![RegistryTransition::Reconfigure {
            controller_id: controller_id.clone(),
            config: config.clone(),
        }],
    };
    registry.apply(&transitions)?;
    Ok(transitions)
}

fn switch(owner: &str, to: &str) -> Vec<RegistryTransition> {
    if owner == to {
        return Vec::new();
    }
    vec![
        RegistryTransition::Deactivate {
            controller_id: owner.into(),
        },
        RegistryTransition::Activate {
            controller_id: to.into(),
        },
    ]
}

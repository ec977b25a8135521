use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::catalog::ModelCatalog;
use super::drift::{DriftSignal, DriftSource};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ModelAction {
    Finetune { model_id: String },
    Retrain { task_tag: String },
    SelectAlternative { model_id: String, version: u32 },
    FallbackLegacy,
    Rollback { model_id: String },
}

impl ModelAction {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelAction::Finetune { .. } => "finetune",
            ModelAction::Retrain { .. } => "retrain",
            ModelAction::SelectAlternative { .. } => "select_alternative",
            ModelAction::FallbackLegacy => "fallback_legacy",
            ModelAction::Rollback { .. } => "rollback",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDecision {
    pub action: ModelAction,
    /// What serves the task until `action` completes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interim: Option<ModelAction>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ActionRefusal {
    #[error("drift signal not yet explained; policy causes must be ruled out first")]
    Unexplained,
}

/// What the governance engine knows about the affected task.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionContext {
    pub task_tag: String,
    /// Model the signal concerns, when one is deployed for the task.
    pub model_id: Option<String>,
    /// Time of that model's most recent deployment.
    pub last_deployment_t: Option<f64>,
    /// Seconds after a deployment within which drift is blamed on it.
    pub coincidence_window_s: f64,
}

impl ActionContext {
    pub fn for_task(catalog: &ModelCatalog, task_tag: &str) -> Self {
        let deployed = catalog.deployed_for_task(task_tag);
        Self {
            task_tag: task_tag.into(),
            model_id: deployed.map(|e| e.model_id.clone()),
            last_deployment_t: deployed.and_then(|e| {
                e.deployment_history
                    .iter()
                    .rev()
                    .find(|r| r.action == "deploy" || r.action == "redeploy")
                    .map(|r| r.t)
            }),
            coincidence_window_s: 60.0,
        }
    }
}

/// Picks the model-level response to an explained drift signal.
pub fn decide_model_action(
    signal: &DriftSignal,
    catalog: &ModelCatalog,
    ctx: &ActionContext,
) -> Result<ModelDecision, ActionRefusal> {
    if !signal.explanation_checked {
        return Err(ActionRefusal::Unexplained);
    }
    if let (Some(model_id), Some(deployed_at)) = (&ctx.model_id, ctx.last_deployment_t) {
        let lag = signal.onset() - deployed_at;
        if signal.source != DriftSource::Announcement
            && (0.0..=ctx.coincidence_window_s).contains(&lag)
        {
            return Ok(ModelDecision {
                action: ModelAction::Rollback {
                    model_id: model_id.clone(),
                },
                interim: None,
                reason: format!("drift began {lag} s after deployment"),
            });
        }
    }
    let retrain = |why: String| ModelDecision {
        action: ModelAction::Retrain {
            task_tag: ctx.task_tag.clone(),
        },
        interim: Some(ModelAction::FallbackLegacy),
        reason: why,
    };
    Ok(match signal.source {
        DriftSource::Announcement => match &ctx.model_id {
            Some(model_id) => ModelDecision {
                action: ModelAction::Finetune {
                    model_id: model_id.clone(),
                },
                interim: None,
                reason: "announcement extends the supported classes".into(),
            },
            None => retrain(format!("no model deployed for {}", ctx.task_tag)),
        },
        DriftSource::AccuracyDrop | DriftSource::KpmDegradation => {
            let alternative = catalog
                .validated_alternatives(&ctx.task_tag)
                .into_iter()
                .next();
            match (signal.source, alternative, &ctx.model_id) {
                (DriftSource::AccuracyDrop, Some(e), _) => ModelDecision {
                    action: ModelAction::SelectAlternative {
                        model_id: e.model_id.clone(),
                        version: e.version,
                    },
                    interim: None,
                    reason: format!(
                        "validated alternative {} v{} serves {}",
                        e.model_id, e.version, ctx.task_tag
                    ),
                },
                (_, _, None) => retrain(format!("no model deployed for {}", ctx.task_tag)),
                _ => retrain(format!("no validated alternative for {}", ctx.task_tag)),
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::governance::catalog::{ModelCatalogEntry, ModelKind};

    fn catalog() -> ModelCatalog {
        let mut c = ModelCatalog::default();
        for v in 1..=3 {
            c.register(
                ModelCatalogEntry::new(
                    "wpfm",
                    ModelKind::Wpfm,
                    v,
                    "technology_recognition",
                    &["lte", "nr"],
                ),
                0.0,
            )
            .unwrap();
            c.validate("wpfm", v, 0.0).unwrap();
        }
        c.deploy("wpfm", 3, 1000.0).unwrap();
        c
    }

    fn signal(source: DriftSource, onset: f64) -> DriftSignal {
        DriftSignal {
            source,
            magnitude: 0.2,
            window: (onset, onset + 60.0),
            explanation_checked: true,
        }
    }

    #[test]
    fn unexplained_is_refused() {
        let c = catalog();
        let mut s = signal(DriftSource::AccuracyDrop, 5000.0);
        s.explanation_checked = false;
        let ctx = ActionContext::for_task(&c, "technology_recognition");
        assert_eq!(
            decide_model_action(&s, &c, &ctx),
            Err(ActionRefusal::Unexplained)
        );
    }

    #[test]
    fn drift_right_after_deploy_rolls_back() {
        let mut c = catalog();
        let ctx = ActionContext::for_task(&c, "technology_recognition");
        assert_eq!(ctx.last_deployment_t, Some(1000.0));
        let d =
            decide_model_action(&signal(DriftSource::KpmDegradation, 1030.0), &c, &ctx).unwrap();
        assert_eq!(
            d.action,
            ModelAction::Rollback {
                model_id: "wpfm".into()
            }
        );
        assert!(matches!(
            c.rollback("wpfm", 1031.0),
            crate::governance::RollbackOutcome::Redeployed {
                restored: 2,
                retired: 3,
                ..
            }
        ));
    }

    #[test]
    fn announcement_finetunes() {
        let c = catalog();
        let ctx = ActionContext::for_task(&c, "technology_recognition");
        let d = decide_model_action(&DriftSignal::announcement(1010.0), &c, &ctx).unwrap();
        assert_eq!(d.action.as_str(), "finetune");
    }

    #[test]
    fn accuracy_drop_prefers_alternative() {
        let c = catalog();
        let ctx = ActionContext::for_task(&c, "technology_recognition");
        let d = decide_model_action(&signal(DriftSource::AccuracyDrop, 9000.0), &c, &ctx).unwrap();
        assert_eq!(
            d.action,
            ModelAction::SelectAlternative {
                model_id: "wpfm".into(),
                version: 2
            }
        );
    }

    #[test]
    fn no_alternative_retrains_with_legacy_interim() {
        let mut c = ModelCatalog::default();
        c.register(
            ModelCatalogEntry::new("wpfm", ModelKind::Wpfm, 1, "technology_recognition", &[]),
            0.0,
        )
        .unwrap();
        c.validate("wpfm", 1, 0.0).unwrap();
        c.deploy("wpfm", 1, 0.0).unwrap();
        let ctx = ActionContext::for_task(&c, "technology_recognition");
        let d = decide_model_action(&signal(DriftSource::AccuracyDrop, 9000.0), &c, &ctx).unwrap();
        assert_eq!(d.action.as_str(), "retrain");
        assert_eq!(d.interim, Some(ModelAction::FallbackLegacy));
    }

    #[test]
    fn interference_without_model_starts_new_task() {
        let c = catalog();
        let ctx = ActionContext::for_task(&c, "interference_detection");
        assert!(ctx.model_id.is_none());
        let d =
            decide_model_action(&signal(DriftSource::KpmDegradation, 9000.0), &c, &ctx).unwrap();
        assert_eq!(
            d.action,
            ModelAction::Retrain {
                task_tag: "interference_detection".into()
            }
        );
        assert_eq!(d.interim, Some(ModelAction::FallbackLegacy));
    }
}

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::actions::{decide_model_action, ActionContext, ModelAction, ModelDecision};
use super::catalog::{ModelCatalog, ModelCatalogEntry, ModelKind, RollbackOutcome};
use super::drift::{detect_drift, DriftConfig, DriftSignal, SeriesKind};
use super::lifecycle::{lifecycle_step, LifecycleEvent, LifecycleState, Stage};
use super::trajectory::TrajectorySpec;
use crate::domain::{ConfigError, KpmRecord};
use crate::sim::{EventKind, EventLog};
use crate::strategic::{ChangeRecord, ChangeSubject, DirectivePayload, DriftEvidence};

pub const WPFM_MODEL: &str = "wpfm";
pub const RECOGNITION_TASK: &str = "technology_recognition";
pub const INTERFERENCE_TASK: &str = "interference_detection";

fn wpfm() -> String {
    WPFM_MODEL.into()
}

fn recognition() -> String {
    RECOGNITION_TASK.into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Announcement {
    pub t: f64,
    #[serde(default)]
    pub message: String,
}

/// Fine-tuning scenario driven alongside a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GovernanceScenario {
    #[serde(default = "wpfm")]
    pub model_id: String,
    #[serde(default = "recognition")]
    pub task_tag: String,
    pub trajectory: TrajectorySpec,
    #[serde(default)]
    pub announcements: Vec<Announcement>,
}

impl GovernanceScenario {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.trajectory.validate("governance.trajectory")?;
        for (i, a) in self.announcements.iter().enumerate() {
            if !(a.t.is_finite() && a.t >= 0.0) {
                return Err(ConfigError::new(
                    "invalid_time",
                    format!("governance.announcements[{i}].t"),
                    "announcement time must be a non-negative number",
                ));
            }
        }
        Ok(())
    }
}

/// One point of the lifecycle timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub t: f64,
    pub stage: Stage,
    pub epoch: u32,
    pub accuracy: f64,
    pub model_version: u32,
}

/// Read-only snapshot served to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GovernanceView {
    pub catalog: ModelCatalog,
    pub lifecycle: Option<LifecycleState>,
    pub total_epochs: Option<u32>,
    pub timeline: Vec<StageRecord>,
}

/// Catalog, fine-tuning lifecycle and drift monitor of one run.
#[derive(Debug, Clone)]
pub struct GovernanceEngine {
    catalog: ModelCatalog,
    scenario: Option<GovernanceScenario>,
    lifecycle: Option<LifecycleState>,
    next_announcement: usize,
    next_epoch_due: Option<f64>,
    timeline: Vec<StageRecord>,
    drift_config: DriftConfig,
    minute_bits: f64,
    minute_prbs: u64,
    efficiency_series: Vec<(f64, f64)>,
    drift: Option<DriftEvidence>,
    changes: Vec<ChangeRecord>,
}

impl GovernanceEngine {
    /// Catalog seeded with the deployed foundation model and the three
    /// tactical xApps.
    pub fn new(scenario: Option<GovernanceScenario>, drift_config: DriftConfig) -> Self {
        let mut catalog = ModelCatalog::default();
        let (model_id, task, classes) = scenario
            .as_ref()
            .map(|s| {
                (
                    s.model_id.clone(),
                    s.task_tag.clone(),
                    s.trajectory.old_classes,
                )
            })
            .unwrap_or_else(|| (wpfm(), recognition(), 3));
        let class_names: Vec<String> = (1..=classes).map(|k| format!("class_{k}")).collect();
        let class_refs: Vec<&str> = class_names.iter().map(String::as_str).collect();
        let seeds = [
            ModelCatalogEntry::new(&model_id, ModelKind::Wpfm, 1, &task, &class_refs),
            ModelCatalogEntry::new(
                crate::tactical::SLM_CONTROLLER,
                ModelKind::SlmXapp,
                1,
                "prb_allocation",
                &[],
            ),
            ModelCatalogEntry::new(
                crate::tactical::ML_CONTROLLER,
                ModelKind::MlXapp,
                1,
                "prb_allocation",
                &[],
            ),
            ModelCatalogEntry::new(
                crate::tactical::LEGACY_CONTROLLER,
                ModelKind::LegacyXapp,
                1,
                "prb_allocation",
                &[],
            ),
        ];
        for e in seeds {
            let (id, v) = (e.model_id.clone(), e.version);
            let e = e.with_config(json!({"checkpoint": format!("{id}-v{v}")}));
            catalog.register(e, 0.0).expect("fresh catalog");
            catalog.validate(&id, v, 0.0).expect("fresh catalog");
        }
        catalog.deploy(&model_id, 1, 0.0).expect("fresh catalog");
        let lifecycle = scenario
            .as_ref()
            .map(|s| LifecycleState::initial(&s.trajectory, 1));
        let mut engine = Self {
            catalog,
            scenario,
            lifecycle,
            next_announcement: 0,
            next_epoch_due: None,
            timeline: Vec::new(),
            drift_config,
            minute_bits: 0.0,
            minute_prbs: 0,
            efficiency_series: Vec::new(),
            drift: None,
            changes: Vec::new(),
        };
        engine.record(0.0);
        engine
    }

    pub fn catalog(&self) -> &ModelCatalog {
        &self.catalog
    }

    pub fn lifecycle(&self) -> Option<&LifecycleState> {
        self.lifecycle.as_ref()
    }

    pub fn timeline(&self) -> &[StageRecord] {
        &self.timeline
    }

    pub fn drift(&self) -> Option<&DriftEvidence> {
        self.drift.as_ref()
    }

    /// Model changes made since the last call, for rollback attribution.
    pub fn take_changes(&mut self) -> Vec<ChangeRecord> {
        std::mem::take(&mut self.changes)
    }

    pub fn view(&self) -> GovernanceView {
        GovernanceView {
            catalog: self.catalog.clone(),
            lifecycle: self.lifecycle.clone(),
            total_epochs: self.scenario.as_ref().map(|s| s.trajectory.total_epochs),
            timeline: self.timeline.clone(),
        }
    }

    fn record(&mut self, t: f64) {
        if let Some(s) = &self.lifecycle {
            self.timeline.push(StageRecord {
                t,
                stage: s.stage,
                epoch: s.epoch,
                accuracy: s.current_accuracy,
                model_version: s.model_version,
            });
        }
    }

    fn step(&mut self, event: LifecycleEvent, t: f64, log: &mut EventLog) -> bool {
        let (Some(state), Some(scn)) = (&self.lifecycle, &self.scenario) else {
            return false;
        };
        match lifecycle_step(state, event, &scn.trajectory, t) {
            Ok(next) => {
                log.push(
                    t,
                    EventKind::Governance,
                    None,
                    json!({
                        "event": "lifecycle",
                        "trigger": event,
                        "stage": next.stage.as_str(),
                        "epoch": next.epoch,
                        "accuracy": next.current_accuracy,
                        "model_version": next.model_version,
                    }),
                );
                self.lifecycle = Some(next);
                self.record(t);
                true
            }
            Err(fault) => {
                log.push(
                    t,
                    EventKind::Governance,
                    None,
                    json!({"event": "transition_fault", "detail": fault.to_string()}),
                );
                false
            }
        }
    }

    fn announce(&mut self, t: f64, message: &str, log: &mut EventLog) {
        let Some(scn) = self.scenario.clone() else {
            return;
        };
        let ctx = ActionContext::for_task(&self.catalog, &scn.task_tag);
        if let Ok(d) = decide_model_action(&DriftSignal::announcement(t), &self.catalog, &ctx) {
            log.push(
                t,
                EventKind::Governance,
                None,
                json!({"event": "model_action", "action": d.action, "reason": d.reason, "announcement": message}),
            );
        }
        if self.step(LifecycleEvent::Announce, t, log) {
            self.next_epoch_due = Some(t + scn.trajectory.epoch_duration);
        }
    }

    fn finish_training(&mut self, t: f64, log: &mut EventLog) {
        let Some(scn) = self.scenario.clone() else {
            return;
        };
        if !self.step(LifecycleEvent::ValidationPass, t, log) {
            return;
        }
        let state = self.lifecycle.clone().expect("lifecycle present");
        let from = self
            .catalog
            .deployed(&scn.model_id)
            .map_or(0, |e| e.version);
        let version = self.catalog.latest_version(&scn.model_id).unwrap_or(0) + 1;
        let classes: Vec<String> = (1..=scn.trajectory.new_classes)
            .map(|k| format!("class_{k}"))
            .collect();
        let class_refs: Vec<&str> = classes.iter().map(String::as_str).collect();
        let entry = ModelCatalogEntry::new(
            &scn.model_id,
            ModelKind::Wpfm,
            version,
            &scn.task_tag,
            &class_refs,
        )
        .with_config(json!({
            "checkpoint": format!("{}-v{version}", scn.model_id),
            "accuracy": state.current_accuracy,
            "epochs": state.epoch,
        }));
        let ok = self.catalog.register(entry, t).is_ok()
            && self.catalog.validate(&scn.model_id, version, t).is_ok()
            && self.catalog.deploy(&scn.model_id, version, t).is_ok();
        if ok {
            log.push(
                t,
                EventKind::Governance,
                None,
                json!({"event": "deploy", "model_id": scn.model_id, "version": version, "from_version": from}),
            );
            self.changes.push(ChangeRecord {
                t,
                subject: ChangeSubject::Model {
                    model_id: scn.model_id.clone(),
                    version,
                },
                revertible: true,
            });
        }
    }

    /// Processes announcements and epoch completions due by `t`.
    pub fn advance(&mut self, t: f64, log: &mut EventLog) {
        loop {
            let due_announcement = self
                .scenario
                .as_ref()
                .and_then(|s| s.announcements.get(self.next_announcement))
                .filter(|a| a.t <= t)
                .map(|a| (a.t, a.message.clone()));
            let due_epoch = self.next_epoch_due.filter(|&d| d <= t + 1e-9);
            match (due_announcement, due_epoch) {
                (Some((ta, msg)), e) if e.is_none_or(|d| ta <= d) => {
                    self.next_announcement += 1;
                    if self
                        .lifecycle
                        .as_ref()
                        .is_some_and(|s| s.stage == Stage::Initial)
                    {
                        self.announce(ta, &msg, log);
                    } else {
                        log.push(
                            ta,
                            EventKind::Governance,
                            None,
                            json!({"event": "announcement_deferred", "announcement": msg}),
                        );
                    }
                }
                (_, Some(due)) => {
                    self.step(LifecycleEvent::EpochComplete, due, log);
                    let (epoch, total, dur) = match (&self.lifecycle, &self.scenario) {
                        (Some(s), Some(scn)) => (
                            s.epoch,
                            scn.trajectory.total_epochs,
                            scn.trajectory.epoch_duration,
                        ),
                        _ => break,
                    };
                    if epoch >= total {
                        self.next_epoch_due = None;
                        self.finish_training(due, log);
                    } else {
                        self.next_epoch_due = Some(due + dur);
                    }
                }
                _ => break,
            }
        }
    }

    /// Feeds one KPM batch into the spectral-efficiency monitor. At each
    /// minute boundary the minute's bits per used PRB join the series and
    /// drift is re-evaluated.
    pub fn observe_kpm(&mut self, t: f64, batch: &[KpmRecord], log: &mut EventLog) {
        for r in batch {
            self.minute_bits += r.dl_throughput * 1e6;
            self.minute_prbs += r.prb_used;
        }
        let second = t.round() as u64;
        if second == 0 || !second.is_multiple_of(60) {
            return;
        }
        let eff = if self.minute_prbs > 0 {
            self.minute_bits / self.minute_prbs as f64
        } else {
            0.0
        };
        self.minute_bits = 0.0;
        self.minute_prbs = 0;
        if eff > 0.0 {
            self.efficiency_series.push((t - 60.0, eff));
        }
        if self.drift.is_none() {
            if let Some(signal) =
                detect_drift(&self.efficiency_series, SeriesKind::Kpm, &self.drift_config)
            {
                log.push(
                    t,
                    EventKind::Governance,
                    None,
                    json!({"event": "drift", "source": signal.source, "magnitude": signal.magnitude, "window": signal.window}),
                );
                self.drift = Some(DriftEvidence {
                    model_id: self
                        .catalog
                        .deployed_for_task(INTERFERENCE_TASK)
                        .map_or_else(wpfm, |e| e.model_id.clone()),
                    task_tag: INTERFERENCE_TASK.into(),
                    signal,
                });
            }
        }
    }

    /// Executes a model-level corrective directive from the strategic tier.
    /// Returns the model decision taken, if any.
    pub fn apply_directive(
        &mut self,
        payload: &DirectivePayload,
        t: f64,
        log: &mut EventLog,
    ) -> Option<ModelDecision> {
        match payload {
            DirectivePayload::FinetuneModel { model_id } => {
                let idle = self
                    .lifecycle
                    .as_ref()
                    .is_some_and(|s| s.stage == Stage::Initial);
                if idle {
                    self.announce(t, &format!("fine-tuning of {model_id} requested"), log);
                }
                self.drift = None;
                Some(ModelDecision {
                    action: ModelAction::Finetune {
                        model_id: model_id.clone(),
                    },
                    interim: None,
                    reason: if idle {
                        "fine-tuning started".into()
                    } else {
                        "fine-tuning already in progress".into()
                    },
                })
            }
            DirectivePayload::RetrainModel { task_tag, .. } => {
                let mut signal = self
                    .drift
                    .take()
                    .map(|d| d.signal)
                    .unwrap_or_else(|| DriftSignal::announcement(t));
                signal.explanation_checked = true;
                let ctx = ActionContext::for_task(&self.catalog, task_tag);
                let decision = decide_model_action(&signal, &self.catalog, &ctx).ok()?;
                if let ModelAction::Retrain { task_tag } = &decision.action {
                    let version = self.catalog.latest_version(WPFM_MODEL).unwrap_or(0) + 1;
                    let entry = ModelCatalogEntry::new(
                        WPFM_MODEL,
                        ModelKind::Wpfm,
                        version,
                        task_tag,
                        &[],
                    )
                    .with_config(
                        json!({"checkpoint": format!("{WPFM_MODEL}-v{version}"), "task": task_tag}),
                    );
                    self.catalog.register(entry, t).ok();
                }
                log.push(
                    t,
                    EventKind::Governance,
                    None,
                    json!({"event": "model_action", "action": decision.action, "interim": decision.interim, "reason": decision.reason}),
                );
                Some(decision)
            }
            DirectivePayload::RollbackModel { model_id } => {
                let outcome = self.catalog.rollback(model_id, t);
                log.push(
                    t,
                    EventKind::Governance,
                    None,
                    json!({"event": "rollback", "outcome": outcome}),
                );
                if matches!(outcome, RollbackOutcome::Redeployed { .. })
                    && self
                        .lifecycle
                        .as_ref()
                        .is_some_and(|s| s.stage == Stage::Redeployed)
                {
                    self.step(LifecycleEvent::Rollback, t, log);
                }
                self.drift = None;
                Some(match outcome {
                    RollbackOutcome::Redeployed { .. } => ModelDecision {
                        action: ModelAction::Rollback {
                            model_id: model_id.clone(),
                        },
                        interim: None,
                        reason: "prior validated version restored".into(),
                    },
                    RollbackOutcome::FallbackLegacy { .. } => ModelDecision {
                        action: ModelAction::FallbackLegacy,
                        interim: None,
                        reason: "no prior validated version".into(),
                    },
                })
            }
            _ => None,
        }
    }
}

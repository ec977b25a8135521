use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::anomalies::{AnomalyFlag, AnomalyReport, Evidence};
use crate::domain::{PolicyObject, SliceId};
use crate::governance::{DriftSignal, DriftSource};
use crate::tactical::{XappRegistry, LEGACY_CONTROLLER};

/// Corrective actions, least disruptive first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rung {
    AdjustPolicy,
    SwitchXapp,
    FinetuneModel,
    RetrainModel,
    Rollback,
}

impl Rung {
    pub fn level(self) -> u8 {
        self as u8 + 1
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Rung::AdjustPolicy => "adjust_policy",
            Rung::SwitchXapp => "switch_xapp",
            Rung::FinetuneModel => "finetune_model",
            Rung::RetrainModel => "retrain_model",
            Rung::Rollback => "rollback",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum DirectivePayload {
    RaiseFloor { slice_id: SliceId, by: u32 },
    ReduceMaxStep { to: u32 },
    SwitchXapp { to: String },
    FinetuneModel { model_id: String },
    RetrainModel { model_id: String, task_tag: String },
    RollbackPolicy { to_version: u64 },
    RollbackModel { model_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectiveDirective {
    pub rung: Rung,
    pub flag: AnomalyFlag,
    pub slice_id: SliceId,
    pub payload: DirectivePayload,
    pub justification: String,
}

impl CorrectiveDirective {
    pub fn describe(&self) -> String {
        format!(
            "{}:{}:{}",
            self.rung.as_str(),
            self.flag.as_str(),
            self.slice_id
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subject", rename_all = "snake_case")]
pub enum ChangeSubject {
    Policy { from_version: u64, to_version: u64 },
    Model { model_id: String, version: u32 },
}

/// A configuration change made by the control plane itself. Operator
/// intents and rollbacks are recorded with `revertible = false`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeRecord {
    pub t: f64,
    pub subject: ChangeSubject,
    pub revertible: bool,
}

impl ChangeRecord {
    pub fn minute(&self) -> u64 {
        (self.t / 60.0).floor().max(0.0) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderConfig {
    /// PRBs added to a floor per adjustment.
    pub floor_step: u32,
    /// Policy adjustments tried before switching xApp.
    pub escalate_after: u32,
    /// Minutes between a change and an anomaly onset that count as
    /// coincident.
    pub coincidence_minutes: u64,
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self {
            floor_step: 5,
            escalate_after: 2,
            coincidence_minutes: 1,
        }
    }
}

/// Model drift the governance engine has attributed to a deployed model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftEvidence {
    pub model_id: String,
    pub task_tag: String,
    pub signal: DriftSignal,
}

pub struct LadderContext<'a> {
    pub policy: &'a PolicyObject,
    pub registry: &'a XappRegistry,
    pub changes: &'a [ChangeRecord],
    pub drift: Option<&'a DriftEvidence>,
    pub total_prb: u32,
    pub config: LadderConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct KeyMemory {
    adjustments: u32,
    rung: Option<Rung>,
    last: Option<DirectivePayload>,
}

/// Per-(flag, slice) escalation state; an entry is forgotten as soon as its
/// anomaly clears.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LadderMemory {
    keys: BTreeMap<(AnomalyFlag, SliceId), KeyMemory>,
}

impl LadderMemory {
    pub fn rung(&self, flag: AnomalyFlag, slice_id: SliceId) -> Option<Rung> {
        self.keys.get(&(flag, slice_id)).and_then(|k| k.rung)
    }
}

fn adjustment(
    flag: AnomalyFlag,
    slice_id: SliceId,
    ctx: &LadderContext,
) -> Option<DirectivePayload> {
    let p = ctx.policy;
    match flag {
        AnomalyFlag::Starvation | AnomalyFlag::LatencyViolation => {
            let s = p.slice(slice_id)?;
            let by = ctx.config.floor_step;
            let floor_sum: u32 = p.slices.iter().map(|x| x.floor_prb).sum();
            (s.floor_prb + by <= s.ceiling_prb && floor_sum + by <= ctx.total_prb)
                .then_some(DirectivePayload::RaiseFloor { slice_id, by })
        }
        AnomalyFlag::Oscillation => (p.max_step_prb > 1).then(|| DirectivePayload::ReduceMaxStep {
            to: (p.max_step_prb / 2).max(1),
        }),
    }
}

fn coincident_change<'a>(e: &Evidence, ctx: &LadderContext<'a>) -> Option<&'a ChangeRecord> {
    let onset = e.onset_minute();
    ctx.changes
        .iter()
        .rev()
        .find(|c| c.revertible && c.minute().abs_diff(onset) <= ctx.config.coincidence_minutes)
}

fn choose(e: &Evidence, mem: &KeyMemory, ctx: &LadderContext) -> (Rung, DirectivePayload, String) {
    if let Some(change) = coincident_change(e, ctx) {
        let why = format!(
            "onset in minute {} coincides with a change at t={}s",
            e.onset_minute(),
            change.t
        );
        return match &change.subject {
            ChangeSubject::Policy { from_version, .. } => (
                Rung::Rollback,
                DirectivePayload::RollbackPolicy {
                    to_version: *from_version,
                },
                why,
            ),
            ChangeSubject::Model { model_id, .. } => (
                Rung::Rollback,
                DirectivePayload::RollbackModel {
                    model_id: model_id.clone(),
                },
                why,
            ),
        };
    }
    if mem.adjustments < ctx.config.escalate_after {
        if let Some(p) = adjustment(e.flag, e.slice_id, ctx) {
            let why = format!(
                "adjustment {} of {}",
                mem.adjustments + 1,
                ctx.config.escalate_after
            );
            return (Rung::AdjustPolicy, p, why);
        }
    }
    if ctx.registry.owner().controller_id != LEGACY_CONTROLLER {
        let why = if mem.adjustments >= ctx.config.escalate_after {
            format!("persisted through {} policy adjustments", mem.adjustments)
        } else {
            "no policy parameter can address the flag".to_string()
        };
        return (
            Rung::SwitchXapp,
            DirectivePayload::SwitchXapp {
                to: LEGACY_CONTROLLER.into(),
            },
            why,
        );
    }
    if let Some(d) = ctx.drift {
        let why = format!(
            "governance drift {:?} of magnitude {:.3}",
            d.signal.source, d.signal.magnitude
        );
        return if d.signal.source == DriftSource::Announcement {
            (
                Rung::FinetuneModel,
                DirectivePayload::FinetuneModel {
                    model_id: d.model_id.clone(),
                },
                why,
            )
        } else {
            (
                Rung::RetrainModel,
                DirectivePayload::RetrainModel {
                    model_id: d.model_id.clone(),
                    task_tag: d.task_tag.clone(),
                },
                why,
            )
        };
    }
    (
        Rung::SwitchXapp,
        DirectivePayload::SwitchXapp {
            to: LEGACY_CONTROLLER.into(),
        },
        "legacy fallback already in place".into(),
    )
}

/// One directive per flagged (flag, slice), choosing the least disruptive
/// applicable rung. A change coinciding with the anomaly onset selects
/// rollback directly. For a persisting anomaly the rung never decreases.
pub fn corrective_ladder(
    anomalies: &AnomalyReport,
    ctx: &LadderContext,
    memory: &mut LadderMemory,
) -> Vec<CorrectiveDirective> {
    memory
        .keys
        .retain(|(flag, id), _| anomalies.flagged(*flag).contains(id));
    let mut evidence: Vec<&Evidence> = anomalies.evidence.iter().collect();
    evidence.sort_by_key(|e| (e.flag, e.slice_id));
    let mut out = Vec::new();
    for e in evidence {
        let mem = memory.keys.entry((e.flag, e.slice_id)).or_default();
        let (mut rung, mut payload, mut why) = choose(e, mem, ctx);
        if let (Some(prev), Some(prev_payload)) = (mem.rung, &mem.last) {
            if rung < prev {
                rung = prev;
                payload = prev_payload.clone();
                why = format!("holding rung {} while the anomaly persists", prev.as_str());
            }
        }
        if rung == Rung::AdjustPolicy {
            mem.adjustments += 1;
        }
        mem.rung = Some(rung);
        mem.last = Some(payload.clone());
        out.push(CorrectiveDirective {
            rung,
            flag: e.flag,
            slice_id: e.slice_id,
            payload,
            justification: format!(
                "{} on slice {} in minutes {:?} (values {:?}, threshold {}): {why}",
                e.flag.as_str(),
                e.slice_id,
                e.minutes,
                e.values,
                e.threshold
            ),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{SliceClass, SliceSpec};
    use crate::governance::DriftSignal;
    use crate::tactical::OrchestrationDirective;

    fn policy() -> PolicyObject {
        let slices: Vec<SliceSpec> = (1..=3)
            .map(|id| SliceSpec {
                slice_id: id,
                class: SliceClass::Regular,
                latency_target: None,
                display_name: String::new(),
            })
            .collect();
        let mut p = PolicyObject::permissive(&slices, 100);
        p.max_step_prb = 10;
        p
    }

    fn starving(slice_id: SliceId, minutes: &[u64]) -> AnomalyReport {
        let mut r = AnomalyReport::default();
        r.starvation.insert(slice_id);
        r.evidence.push(Evidence {
            flag: AnomalyFlag::Starvation,
            slice_id,
            minutes: minutes.to_vec(),
            values: vec![0.9; minutes.len()],
            threshold: 0.5,
        });
        r
    }

    fn run(
        report: &AnomalyReport,
        policy: &PolicyObject,
        registry: &XappRegistry,
        changes: &[ChangeRecord],
        drift: Option<&DriftEvidence>,
        mem: &mut LadderMemory,
    ) -> Vec<CorrectiveDirective> {
        let ctx = LadderContext {
            policy,
            registry,
            changes,
            drift,
            total_prb: 100,
            config: LadderConfig::default(),
        };
        corrective_ladder(report, &ctx, mem)
    }

    #[test]
    fn persistent_starvation_escalates() {
        let p = policy();
        let mut registry = XappRegistry::default();
        let mut mem = LadderMemory::default();
        let first = run(&starving(2, &[3, 4]), &p, &registry, &[], None, &mut mem);
        assert_eq!(first.len(), 1);
        assert_eq!(first[0].rung, Rung::AdjustPolicy);
        assert_eq!(
            first[0].payload,
            DirectivePayload::RaiseFloor { slice_id: 2, by: 5 }
        );
        assert!(first[0].justification.contains("starvation on slice 2"));
        let second = run(&starving(2, &[3, 4, 5]), &p, &registry, &[], None, &mut mem);
        assert_eq!(second[0].rung, Rung::AdjustPolicy);
        let third = run(
            &starving(2, &[3, 4, 5, 6]),
            &p,
            &registry,
            &[],
            None,
            &mut mem,
        );
        assert_eq!(third[0].rung, Rung::SwitchXapp);
        assert_eq!(
            third[0].payload,
            DirectivePayload::SwitchXapp {
                to: LEGACY_CONTROLLER.into()
            }
        );

        crate::tactical::orchestrate(&mut registry, &OrchestrationDirective::FallbackToHeuristic)
            .unwrap();
        let drift = DriftEvidence {
            model_id: "wpfm".into(),
            task_tag: "interference_detection".into(),
            signal: DriftSignal {
                source: DriftSource::KpmDegradation,
                magnitude: 0.3,
                window: (300.0, 420.0),
                explanation_checked: false,
            },
        };
        let fourth = run(
            &starving(2, &[3, 4, 5, 6, 7]),
            &p,
            &registry,
            &[],
            Some(&drift),
            &mut mem,
        );
        assert_eq!(fourth[0].rung, Rung::RetrainModel);
        let held = run(
            &starving(2, &[3, 4, 5, 6, 7, 8]),
            &p,
            &registry,
            &[],
            None,
            &mut mem,
        );
        assert_eq!(held[0].rung, Rung::RetrainModel);
    }

    #[test]
    fn cleared_anomaly_resets_escalation() {
        let p = policy();
        let registry = XappRegistry::default();
        let mut mem = LadderMemory::default();
        run(&starving(2, &[1, 2]), &p, &registry, &[], None, &mut mem);
        run(&starving(2, &[1, 2, 3]), &p, &registry, &[], None, &mut mem);
        assert!(run(
            &AnomalyReport::default(),
            &p,
            &registry,
            &[],
            None,
            &mut mem
        )
        .is_empty());
        assert_eq!(mem.rung(AnomalyFlag::Starvation, 2), None);
        let again = run(&starving(2, &[5, 6]), &p, &registry, &[], None, &mut mem);
        assert_eq!(again[0].rung, Rung::AdjustPolicy);
    }

    #[test]
    fn coincident_change_rolls_back() {
        let p = policy();
        let registry = XappRegistry::default();
        let mut mem = LadderMemory::default();
        let changes = vec![ChangeRecord {
            t: 185.0,
            subject: ChangeSubject::Policy {
                from_version: 4,
                to_version: 5,
            },
            revertible: true,
        }];
        let d = run(
            &starving(1, &[3, 4]),
            &p,
            &registry,
            &changes,
            None,
            &mut mem,
        );
        assert_eq!(d[0].rung, Rung::Rollback);
        assert_eq!(
            d[0].payload,
            DirectivePayload::RollbackPolicy { to_version: 4 }
        );

        let operator = vec![ChangeRecord {
            revertible: false,
            ..changes[0].clone()
        }];
        let d = run(
            &starving(1, &[3, 4]),
            &p,
            &registry,
            &operator,
            None,
            &mut LadderMemory::default(),
        );
        assert_eq!(d[0].rung, Rung::AdjustPolicy);

        let distant = vec![ChangeRecord {
            t: 30.0,
            ..changes[0].clone()
        }];
        let d = run(
            &starving(1, &[3, 4]),
            &p,
            &registry,
            &distant,
            None,
            &mut LadderMemory::default(),
        );
        assert_eq!(d[0].rung, Rung::AdjustPolicy);
    }

    #[test]
    fn oscillation_halves_step() {
        let p = policy();
        let mut r = AnomalyReport::default();
        r.oscillation.insert(1);
        r.evidence.push(Evidence {
            flag: AnomalyFlag::Oscillation,
            slice_id: 1,
            minutes: vec![2, 3, 4],
            values: vec![8.0, -8.0, 8.0],
            threshold: 5.0,
        });
        let d = run(
            &r,
            &p,
            &XappRegistry::default(),
            &[],
            None,
            &mut LadderMemory::default(),
        );
        assert_eq!(d[0].payload, DirectivePayload::ReduceMaxStep { to: 5 });
    }
}

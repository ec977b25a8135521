use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::trajectory::{accuracy_at, TrajectorySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Initial,
    Announcement,
    FineTuning,
    Redeployed,
}

impl Stage {
    pub const ALL: [Stage; 4] = [
        Stage::Initial,
        Stage::Announcement,
        Stage::FineTuning,
        Stage::Redeployed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Initial => "initial",
            Stage::Announcement => "announcement",
            Stage::FineTuning => "fine_tuning",
            Stage::Redeployed => "redeployed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LifecycleEvent {
    Announce,
    EpochComplete,
    ValidationPass,
    ValidationFail,
    Rollback,
}

impl LifecycleEvent {
    pub const ALL: [LifecycleEvent; 5] = [
        LifecycleEvent::Announce,
        LifecycleEvent::EpochComplete,
        LifecycleEvent::ValidationPass,
        LifecycleEvent::ValidationFail,
        LifecycleEvent::Rollback,
    ];
}

/// Fine-tuning progress of one deployed model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifecycleState {
    pub stage: Stage,
    pub epoch: u32,
    pub current_accuracy: f64,
    /// Time the current stage sequence began.
    pub started_at: f64,
    /// Version serving inference.
    pub model_version: u32,
}

impl LifecycleState {
    pub fn initial(traj: &TrajectorySpec, model_version: u32) -> Self {
        Self {
            stage: Stage::Initial,
            epoch: 0,
            current_accuracy: traj.pre_announcement_accuracy,
            started_at: 0.0,
            model_version,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("illegal lifecycle event {event:?} in stage {stage:?}")]
pub struct TransitionFault {
    pub stage: Stage,
    pub event: LifecycleEvent,
}

/// Advances the lifecycle by one event at time `t`.
pub fn lifecycle_step(
    state: &LifecycleState,
    event: LifecycleEvent,
    traj: &TrajectorySpec,
    t: f64,
) -> Result<LifecycleState, TransitionFault> {
    let fault = Err(TransitionFault {
        stage: state.stage,
        event,
    });
    let mut next = state.clone();
    match (state.stage, event) {
        (Stage::Initial, LifecycleEvent::Announce) => {
            next.stage = Stage::Announcement;
            next.epoch = 0;
            next.current_accuracy = accuracy_at(traj, 0);
            next.started_at = t;
        }
        (Stage::Announcement | Stage::FineTuning, LifecycleEvent::EpochComplete) => {
            next.stage = Stage::FineTuning;
            next.epoch = state.epoch + 1;
            next.current_accuracy = accuracy_at(traj, next.epoch);
        }
        (Stage::FineTuning, LifecycleEvent::ValidationPass) if state.epoch >= traj.total_epochs => {
            next.stage = Stage::Redeployed;
            next.current_accuracy = accuracy_at(traj, state.epoch);
            next.model_version = state.model_version + 1;
        }
        (Stage::FineTuning, LifecycleEvent::ValidationFail) => {}
        (Stage::Redeployed, LifecycleEvent::Rollback) => {
            next.stage = Stage::Initial;
            next.epoch = 0;
            next.current_accuracy = traj.pre_announcement_accuracy;
            next.started_at = t;
            next.model_version = state.model_version.saturating_sub(1).max(1);
        }
        _ => return fault,
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj() -> TrajectorySpec {
        TrajectorySpec::scenario_a()
    }

    #[test]
    fn full_cycle() {
        let tr = traj();
        let mut s = LifecycleState::initial(&tr, 1);
        s = lifecycle_step(&s, LifecycleEvent::Announce, &tr, 100.0).unwrap();
        assert_eq!(s.stage, Stage::Announcement);
        assert_eq!(s.current_accuracy, tr.post_announcement());
        for k in 1..=20 {
            s = lifecycle_step(
                &s,
                LifecycleEvent::EpochComplete,
                &tr,
                100.0 + 17.0 * f64::from(k),
            )
            .unwrap();
            if k == 1 {
                assert_eq!(s.current_accuracy, 0.5892);
            }
        }
        s = lifecycle_step(&s, LifecycleEvent::ValidationPass, &tr, 440.0).unwrap();
        assert_eq!(s.stage, Stage::Redeployed);
        assert_eq!(s.current_accuracy, tr.final_accuracy);
        assert_eq!(s.model_version, 2);
        s = lifecycle_step(&s, LifecycleEvent::Rollback, &tr, 500.0).unwrap();
        assert_eq!((s.stage, s.model_version), (Stage::Initial, 1));
    }

    #[test]
    fn early_validation_and_failures() {
        let tr = traj();
        let s = LifecycleState::initial(&tr, 1);
        let s = lifecycle_step(&s, LifecycleEvent::Announce, &tr, 0.0).unwrap();
        let s = lifecycle_step(&s, LifecycleEvent::EpochComplete, &tr, 17.0).unwrap();
        assert!(lifecycle_step(&s, LifecycleEvent::ValidationPass, &tr, 18.0).is_err());
        let same = lifecycle_step(&s, LifecycleEvent::ValidationFail, &tr, 18.0).unwrap();
        assert_eq!(same, s);
    }

    #[test]
    fn epoch_in_initial_faults() {
        let tr = traj();
        let s = LifecycleState::initial(&tr, 1);
        let err = lifecycle_step(&s, LifecycleEvent::EpochComplete, &tr, 0.0).unwrap_err();
        assert_eq!(err.stage, Stage::Initial);
    }

    #[test]
    fn only_graph_edges_are_legal() {
        let tr = traj();
        let allowed = [
            (
                Stage::Initial,
                LifecycleEvent::Announce,
                Stage::Announcement,
            ),
            (
                Stage::Announcement,
                LifecycleEvent::EpochComplete,
                Stage::FineTuning,
            ),
            (
                Stage::FineTuning,
                LifecycleEvent::EpochComplete,
                Stage::FineTuning,
            ),
            (
                Stage::FineTuning,
                LifecycleEvent::ValidationPass,
                Stage::Redeployed,
            ),
            (
                Stage::FineTuning,
                LifecycleEvent::ValidationFail,
                Stage::FineTuning,
            ),
            (Stage::Redeployed, LifecycleEvent::Rollback, Stage::Initial),
        ];
        for stage in Stage::ALL {
            for event in LifecycleEvent::ALL {
                let s = LifecycleState {
                    stage,
                    epoch: tr.total_epochs,
                    current_accuracy: 0.5,
                    started_at: 0.0,
                    model_version: 2,
                };
                let expected = allowed
                    .iter()
                    .find(|(a, e, _)| *a == stage && *e == event)
                    .map(|x| x.2);
                let got = lifecycle_step(&s, event, &tr, 1.0).ok().map(|n| n.stage);
                assert_eq!(got, expected, "{stage:?} + {event:?}");
            }
        }
    }
}

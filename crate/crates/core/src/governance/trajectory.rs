use serde::{Deserialize, Serialize};

use crate::domain::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryShape {
    ExponentialSaturation,
    Linear,
}

/// Share of the gap between the first-epoch and final accuracy still open
/// one epoch before the end of an exponential trajectory.
pub const SATURATION_RESIDUAL: f64 = 0.01;

/// Accuracy of a fine-tuned model as a function of completed epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub pre_announcement_accuracy: f64,
    pub first_epoch_accuracy: f64,
    pub final_accuracy: f64,
    /// Seconds per epoch.
    pub epoch_duration: f64,
    pub total_epochs: u32,
    pub shape: TrajectoryShape,
    /// Explicit accuracy right after the announcement. When absent it is
    /// derived from the class counts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_announcement_accuracy: Option<f64>,
    #[serde(default = "three")]
    pub old_classes: u32,
    #[serde(default = "five")]
    pub new_classes: u32,
}

fn three() -> u32 {
    3
}

fn five() -> u32 {
    5
}

impl TrajectorySpec {
    /// Technology recognition extended from three to five classes.
    pub fn scenario_a() -> Self {
        Self {
            pre_announcement_accuracy: 0.95,
            first_epoch_accuracy: 0.5892,
            final_accuracy: 0.95,
            epoch_duration: 17.0,
            total_epochs: 20,
            shape: TrajectoryShape::ExponentialSaturation,
            post_announcement_accuracy: None,
            old_classes: 3,
            new_classes: 5,
        }
    }

    /// Second class-extension scenario with a higher first-epoch accuracy.
    pub fn scenario_b() -> Self {
        Self {
            pre_announcement_accuracy: 0.98,
            first_epoch_accuracy: 0.8228,
            final_accuracy: 0.98,
            epoch_duration: 17.0,
            total_epochs: 20,
            shape: TrajectoryShape::ExponentialSaturation,
            post_announcement_accuracy: None,
            old_classes: 4,
            new_classes: 5,
        }
    }

    /// Accuracy immediately after a class-extension announcement: samples
    /// of the unknown classes are scored wrong.
    pub fn post_announcement(&self) -> f64 {
        self.post_announcement_accuracy.unwrap_or_else(|| {
            self.pre_announcement_accuracy * f64::from(self.old_classes)
                / f64::from(self.new_classes.max(1))
        })
    }

    /// Seconds from the announcement until the last epoch completes.
    pub fn total_duration(&self) -> f64 {
        self.epoch_duration * f64::from(self.total_epochs)
    }

    pub fn validate(&self, field: &str) -> Result<(), ConfigError> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(ConfigError::new(
                    "accuracy_out_of_range",
                    format!("{field}.{name}"),
                    format!("{v} is not in [0, 1]"),
                ))
            }
        };
        unit("pre_announcement_accuracy", self.pre_announcement_accuracy)?;
        unit("first_epoch_accuracy", self.first_epoch_accuracy)?;
        unit("final_accuracy", self.final_accuracy)?;
        unit("post_announcement_accuracy", self.post_announcement())?;
        if self.first_epoch_accuracy > self.final_accuracy {
            return Err(ConfigError::new(
                "trajectory_decreasing",
                format!("{field}.first_epoch_accuracy"),
                "first-epoch accuracy exceeds final accuracy",
            ));
        }
        if !(self.epoch_duration.is_finite() && self.epoch_duration > 0.0) {
            return Err(ConfigError::new(
                "invalid_epoch_duration",
                format!("{field}.epoch_duration"),
                "must be positive",
            ));
        }
        if self.total_epochs < 1 {
            return Err(ConfigError::new(
                "invalid_total_epochs",
                format!("{field}.total_epochs"),
                "need at least one epoch",
            ));
        }
        if self.new_classes < self.old_classes || self.old_classes == 0 {
            return Err(ConfigError::new(
                "invalid_class_counts",
                format!("{field}.new_classes"),
                "class extension needs 0 < old_classes <= new_classes",
            ));
        }
        Ok(())
    }
}

/// Accuracy after `epoch` completed epochs: the post-announcement level at
/// 0, `first_epoch_accuracy` at 1 and `final_accuracy` from `total_epochs`
/// on. Between those the curve follows the configured shape; the
/// exponential closes all but [`SATURATION_RESIDUAL`] of the gap by the
/// second-to-last epoch.
pub fn accuracy_at(traj: &TrajectorySpec, epoch: u32) -> f64 {
    if epoch == 0 {
        return traj.post_announcement();
    }
    if epoch >= traj.total_epochs {
        return traj.final_accuracy;
    }
    if epoch == 1 {
        return traj.first_epoch_accuracy;
    }
    let (first, last) = (traj.first_epoch_accuracy, traj.final_accuracy);
    let k = f64::from(epoch - 1);
    let span = f64::from(traj.total_epochs - 1);
    let v = match traj.shape {
        TrajectoryShape::Linear => first + (last - first) * k / span,
        TrajectoryShape::ExponentialSaturation => {
            let steps = f64::from(traj.total_epochs.saturating_sub(2).max(1));
            let r = SATURATION_RESIDUAL.powf(1.0 / steps);
            last - (last - first) * r.powf(k)
        }
    };
    v.clamp(first, last)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scenario_endpoints() {
        let a = TrajectorySpec::scenario_a();
        assert_eq!(accuracy_at(&a, 1), 0.5892);
        assert_eq!(accuracy_at(&a, 20), a.final_accuracy);
        assert_eq!(accuracy_at(&a, 25), a.final_accuracy);
        assert!((accuracy_at(&a, 0) - 0.57).abs() < 1e-12);
        assert_eq!(a.total_duration(), 340.0);
        let b = TrajectorySpec::scenario_b();
        assert_eq!(accuracy_at(&b, 1), 0.8228);
        assert!(accuracy_at(&b, 0) < accuracy_at(&b, 1));
    }

    #[test]
    fn exponential_closes_most_of_gap() {
        let a = TrajectorySpec::scenario_a();
        let gap = a.final_accuracy - a.first_epoch_accuracy;
        let at19 = accuracy_at(&a, 19);
        assert!((a.final_accuracy - at19 - gap * SATURATION_RESIDUAL).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        let mut t = TrajectorySpec::scenario_a();
        assert!(t.validate("t").is_ok());
        t.first_epoch_accuracy = 0.99;
        assert_eq!(t.validate("t").unwrap_err().code, "trajectory_decreasing");
        let mut t = TrajectorySpec::scenario_a();
        t.epoch_duration = 0.0;
        assert!(t.validate("t").is_err());
    }

    proptest! {
        #[test]
        fn monotone_and_exact_at_ends(
            first in 0.0f64..1.0,
            extra in 0.0f64..1.0,
            total in 1u32..60,
            linear in any::<bool>(),
        ) {
            let final_accuracy = first + (1.0 - first) * extra;
            let t = TrajectorySpec {
                pre_announcement_accuracy: 0.9,
                first_epoch_accuracy: first,
                final_accuracy,
                epoch_duration: 17.0,
                total_epochs: total,
                shape: if linear { TrajectoryShape::Linear } else { TrajectoryShape::ExponentialSaturation },
                post_announcement_accuracy: None,
                old_classes: 3,
                new_classes: 5,
            };
            if total > 1 {
                prop_assert_eq!(accuracy_at(&t, 1), first);
            }
            prop_assert_eq!(accuracy_at(&t, total), final_accuracy);
            for e in 1..total + 3 {
                prop_assert!(accuracy_at(&t, e + 1) >= accuracy_at(&t, e));
            }
        }
    }
}

//! Model governance: an append-only catalog of model variants, the
//! four-stage fine-tuning lifecycle with configurable accuracy
//! trajectories, drift detection, and the deploy / fallback / rollback
//! decisions that act on them.

mod actions;
mod catalog;
mod drift;
mod engine;
mod lifecycle;
mod trajectory;

pub use actions::{decide_model_action, ActionContext, ActionRefusal, ModelAction, ModelDecision};
pub use catalog::{
    CatalogError, CatalogEvent, DeploymentRecord, ModelCatalog, ModelCatalogEntry, ModelKind,
    RollbackOutcome, ValidationStatus,
};
pub use drift::{detect_drift, DriftConfig, DriftSignal, DriftSource, SeriesKind};
pub use engine::{
    Announcement, GovernanceEngine, GovernanceScenario, GovernanceView, StageRecord,
    INTERFERENCE_TASK, RECOGNITION_TASK, WPFM_MODEL,
};
pub use lifecycle::{lifecycle_step, LifecycleEvent, LifecycleState, Stage, TransitionFault};
pub use trajectory::{accuracy_at, TrajectoryShape, TrajectorySpec, SATURATION_RESIDUAL};

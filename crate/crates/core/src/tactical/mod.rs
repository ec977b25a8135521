//! Near-RT tactical agent: a 5 s KPM window, policy-constrained cap
//! computation, stability guards, arbitration, and the xApp registry.

mod agent;
mod arbitration;
mod caps;
mod guard;
mod registry;
mod window;

use serde::{Deserialize, Serialize};

pub use self::agent::{TacticalAgent, TacticalConfig, TacticalOutput};
pub use self::arbitration::{arbitrate, Arbitration};
pub use self::caps::{
    compute_caps, estimate_demand, estimate_demands, project_caps, projected_proposal, reachable,
    step_bounds, target_caps, CapProposal, DemandModel, Infeasible,
};
pub use self::guard::{guard_decision, GuardConfig, GuardState, GuardVerdict};
pub use self::registry::{
    orchestrate, OrchestrationDirective, RegistryError, RegistryTransition, XappEntry, XappKind,
    XappRegistry, XappState, LEGACY_CONTROLLER, ML_CONTROLLER, SLM_CONTROLLER,
};
pub use self::window::{
    update_window, KpmWindow, SliceAggregate, WindowError, WINDOW_SLOTS, WINDOW_SPAN_S,
};
use crate::domain::{KpmRecord, PolicyObject, SliceId};

/// Window and guard memory, enough to resume the pipeline elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TacticalSnapshot {
    pub window: KpmWindow,
    pub guard: GuardState,
}

/// Outcome of one pass through window → caps → guard.
#[derive(Debug, Clone, PartialEq)]
pub enum PipelineStep {
    Accepted(CapProposal),
    Deferred {
        proposal: CapProposal,
        reason: String,
    },
    Infeasible(Infeasible),
}

impl PipelineStep {
    pub fn caps(&self) -> Option<&[u32]> {
        match self {
            PipelineStep::Accepted(p) => Some(&p.cap_prb),
            _ => None,
        }
    }
}

/// The SLM allocator's decision path, shared by the live agent and by the
/// digital-twin replay.
#[derive(Debug, Clone, PartialEq)]
pub struct TacticalPipeline {
    pub window: KpmWindow,
    pub guard: GuardState,
    pub model: DemandModel,
    pub controller_id: String,
}

impl TacticalPipeline {
    pub fn new(slice_ids: &[SliceId], model: DemandModel, guard: GuardState) -> Self {
        Self {
            window: KpmWindow::new(slice_ids),
            guard,
            model,
            controller_id: SLM_CONTROLLER.into(),
        }
    }

    pub fn from_snapshot(snapshot: &TacticalSnapshot, model: DemandModel) -> Self {
        Self {
            window: snapshot.window.clone(),
            guard: snapshot.guard.clone(),
            model,
            controller_id: SLM_CONTROLLER.into(),
        }
    }

    pub fn snapshot(&self) -> TacticalSnapshot {
        TacticalSnapshot {
            window: self.window.clone(),
            guard: self.guard.clone(),
        }
    }

    pub fn observe(&mut self, batch: &[KpmRecord]) -> Result<(), WindowError> {
        self.window.update(batch)
    }

    pub fn propose(&self, t: f64, policy: &PolicyObject) -> Result<CapProposal, Infeasible> {
        compute_caps(
            &self.window,
            policy,
            &self.guard,
            &self.model,
            &self.controller_id,
            t,
        )
    }

    /// Proposes and, if the guards allow it, commits new caps.
    pub fn step(&mut self, t: f64, policy: &PolicyObject) -> PipelineStep {
        match self.propose(t, policy) {
            Err(e) => PipelineStep::Infeasible(e),
            Ok(p) => self.commit(p, policy),
        }
    }

    pub fn commit(&mut self, proposal: CapProposal, policy: &PolicyObject) -> PipelineStep {
        match guard_decision(&proposal, &mut self.guard, policy) {
            GuardVerdict::Accept => PipelineStep::Accepted(proposal),
            GuardVerdict::Defer { reason } => PipelineStep::Deferred { proposal, reason },
        }
    }
}

//! Desk-scale model of an agentic O-RAN control plane over a sliced downlink.
//!
//! The crate is organised by control tier:
//!
//! - [`domain`]: policy schema, guardrails, telemetry records, and the shared
//!   invariants every tier is checked against.
//! - [`sim`]: deterministic TTI-level simulator of per-slice queues and a
//!   capped PRB scheduler that emits 1 Hz KPM batches.
//! - [`tactical`]: the near-RT agent (sliding KPM window, policy-constrained
//!   cap computation, stability guards, arbitration, xApp orchestration).
//! - [`strategic`]: the non-RT agent (minute summaries, anomaly detection,
//!   intent parsing, corrective ladder, policy synthesis, twin pre-check).
//! - [`governance`]: model catalog, fine-tuning lifecycle, drift handling and
//!   rollback.
//! - [`baselines`]: static, heuristic and reactive comparison controllers.
//! - [`bridge`]: JSON wire protocol for external reasoning agents with
//!   deterministic fallback.
//! - [`harness`]: scenario files, run/compare drivers and metrics.

pub mod apportion;
pub mod baselines;
pub mod bridge;
pub mod domain;
pub mod governance;
pub mod harness;
pub mod sim;
pub mod strategic;
pub mod tactical;

pub use domain::{SliceClass, SliceId, SliceSpec};

//! Non-RT tier: minute summaries, anomaly detection, the operator intent
//! grammar, the corrective ladder, policy synthesis and the twin pre-check.

mod agent;
mod anomalies;
mod grammar;
mod ladder;
mod summary;
mod synthesis;
mod twin;

pub use agent::{IntentAck, IntentError, MinuteOutcome, StrategicAgent, StrategicConfig};
pub use anomalies::{detect_anomalies, AnomalyConfig, AnomalyFlag, AnomalyReport, Evidence};
pub use grammar::{parse_intent, render_intent, GrammarRejection, INTENT_GRAMMAR};
pub use ladder::{
    corrective_ladder, ChangeRecord, ChangeSubject, CorrectiveDirective, DirectivePayload,
    DriftEvidence, LadderConfig, LadderContext, LadderMemory, Rung,
};
pub use summary::{
    attach_mean_caps, nearest_rank, summarize_minute, KpmSummary, SliceSummary, SummaryConfig,
    MINUTE_SAMPLES,
};
pub use synthesis::{synthesize_policy, Refusal, Synthesis};
pub use twin::{
    replay, twin_precheck, PrecheckReport, PrecheckStatus, PrecheckViolations, ReplayOutcome,
    ReplayStep, SliceDelta, TelemetryTrace, MIN_TRACE_SECONDS,
};

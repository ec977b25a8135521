use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::baselines::ControllerKind;
use crate::bridge::{STRATEGIC_DEADLINE_MS, TACTICAL_DEADLINE_MS};
use crate::domain::{
    validate_policy, validate_slices, ConfigError, GuardrailSet, PolicyObject, SliceClass,
    SliceSpec,
};
use crate::governance::{DriftConfig, GovernanceScenario};
use crate::sim::{FlowSpec, RadioModel, SimOptions, SimSetup};
use crate::strategic::{parse_intent, StrategicConfig};
use crate::tactical::TacticalConfig;

pub const SCENARIO_SCHEMA: &str = "scenario/v1";

/// The bundled four-slice reference scenario.
pub const REFERENCE_SCENARIO: &str = include_str!("reference.toml");

/// A scripted operator utterance delivered at simulated time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentLine {
    pub t: f64,
    pub utterance: String,
}

/// A named traffic phase `[start, end)` used for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpec {
    pub name: String,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeConfig {
    /// Base URL of the external agent service; the `SLICELAB_BRIDGE_URL`
    /// environment variable takes precedence.
    #[serde(default)]
    pub url: Option<String>,
    #[serde(default = "strategic_deadline")]
    pub strategic_deadline_ms: u64,
    #[serde(default = "tactical_deadline")]
    pub tactical_deadline_ms: u64,
    /// Also consult the service for tactical cap proposals.
    #[serde(default)]
    pub tactical: bool,
}

fn strategic_deadline() -> u64 {
    STRATEGIC_DEADLINE_MS
}

fn tactical_deadline() -> u64 {
    TACTICAL_DEADLINE_MS
}

fn schema() -> String {
    SCENARIO_SCHEMA.into()
}

/// A complete run description, stored as TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default = "schema")]
    pub schema: String,
    pub name: String,
    pub seed: u64,
    pub duration_s: u64,
    pub controller: ControllerKind,
    pub radio: RadioModel,
    #[serde(default)]
    pub options: SimOptions,
    pub slices: Vec<SliceSpec>,
    pub flows: Vec<FlowSpec>,
    #[serde(default)]
    pub phases: Vec<PhaseSpec>,
    /// Initial policy; a permissive one is derived when absent.
    #[serde(default)]
    pub policy: Option<PolicyObject>,
    #[serde(default)]
    pub guardrails: Option<GuardrailSet>,
    #[serde(default)]
    pub intents: Vec<IntentLine>,
    #[serde(default)]
    pub governance: Option<GovernanceScenario>,
    #[serde(default)]
    pub drift: DriftConfig,
    #[serde(default)]
    pub bridge: Option<BridgeConfig>,
    #[serde(default)]
    pub tactical: TacticalConfig,
    #[serde(default)]
    pub strategic: StrategicConfig,
    /// Simulated seconds per wall-clock second in `serve`; 0 runs as fast
    /// as possible.
    #[serde(default)]
    pub time_dilation: Option<f64>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn reference() -> Self {
        Self::from_toml(REFERENCE_SCENARIO).expect("bundled reference scenario is valid")
    }

    pub fn guardrail_set(&self) -> GuardrailSet {
        self.guardrails
            .clone()
            .unwrap_or_else(|| GuardrailSet::new(self.radio.total_prb))
    }

    /// The configured policy, or floors at the guardrail minimum for
    /// latency slices and nothing else reserved.
    pub fn initial_policy(&self) -> PolicyObject {
        if let Some(p) = &self.policy {
            return p.clone();
        }
        let guard = self.guardrail_set();
        let mut p = PolicyObject::permissive(&self.slices, self.radio.total_prb);
        for s in &mut p.slices {
            if s.class == SliceClass::LatencySensitive {
                s.floor_prb = guard.min_floor_latency_slice;
            }
        }
        p
    }

    /// Phases as configured, or a single phase covering the run.
    pub fn phase_list(&self) -> Vec<PhaseSpec> {
        if self.phases.is_empty() {
            vec![PhaseSpec {
                name: "run".into(),
                start: 0.0,
                end: self.duration_s as f64,
            }]
        } else {
            self.phases.clone()
        }
    }

    /// The same scenario cut or extended to `duration_s`; phases are
    /// clipped so they still tile the run, and a shortened run drops the
    /// utterances scheduled after its end.
    pub fn with_duration(mut self, duration_s: u64) -> Self {
        let end = duration_s as f64;
        self.duration_s = duration_s;
        self.phases.retain(|p| p.start < end);
        if let Some(last) = self.phases.last_mut() {
            last.end = end;
        }
        self.intents.retain(|i| i.t <= end);
        self
    }

    pub fn sim_setup(&self) -> SimSetup {
        SimSetup {
            seed: self.seed,
            slices: self.slices.clone(),
            flows: self.flows.clone(),
            radio: self.radio.clone(),
            options: self.options.clone(),
            initial_caps: None,
        }
    }

    /// Checks structure and referential integrity; the first problem is
    /// reported with its field path.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema != SCENARIO_SCHEMA {
            return Err(ConfigError::new(
                "unsupported_schema",
                "schema",
                format!("expected {SCENARIO_SCHEMA:?}, got {:?}", self.schema),
            ));
        }
        if self.duration_s == 0 {
            return Err(ConfigError::new(
                "invalid_duration",
                "duration_s",
                "duration must be positive",
            ));
        }
        validate_slices(&self.slices)?;
        self.radio.validate()?;
        let known = |id| self.slices.iter().any(|s| s.slice_id == id);
        for (i, f) in self.flows.iter().enumerate() {
            let field = format!("flows[{i}]");
            f.validate(&field)?;
            if !known(f.slice_id) {
                return Err(ConfigError::new(
                    "unknown_slice",
                    format!("{field}.slice_id"),
                    format!("no slice {}", f.slice_id),
                ));
            }
        }
        let duration = self.duration_s as f64;
        if !self.phases.is_empty() {
            let mut at = 0.0;
            for (i, p) in self.phases.iter().enumerate() {
                if p.start != at || p.end <= p.start {
                    return Err(ConfigError::new(
                        "phase_gap",
                        format!("phases[{i}]"),
                        format!("phases must tile [0, {duration}) in order; expected start {at}"),
                    ));
                }
                at = p.end;
            }
            if at != duration {
                return Err(ConfigError::new(
                    "phase_gap",
                    "phases",
                    format!("phases end at {at}, run ends at {duration}"),
                ));
            }
        }
        let guard = self.guardrail_set();
        if guard.total_prb != self.radio.total_prb {
            return Err(ConfigError::new(
                "total_mismatch",
                "guardrails.total_prb",
                "must equal radio.total_prb",
            ));
        }
        let policy = self.initial_policy();
        let ids: Vec<_> = self.slices.iter().map(|s| s.slice_id).collect();
        let policy_ids: Vec<_> = policy.slices.iter().map(|s| s.slice_id).collect();
        if ids != policy_ids {
            return Err(ConfigError::new(
                "policy_slices",
                "policy.slices",
                "policy must list the scenario slices in order",
            ));
        }
        let report = validate_policy(&policy, &guard);
        if let Some(v) = report.violations.first() {
            return Err(ConfigError::new(
                "invalid_policy",
                format!("policy.{}", v.offending_field),
                v.message.clone(),
            ));
        }
        for (i, line) in self.intents.iter().enumerate() {
            let field = format!("intents[{i}]");
            if !(line.t.is_finite() && line.t >= 0.0) {
                return Err(ConfigError::new(
                    "invalid_time",
                    format!("{field}.t"),
                    "intent time must be non-negative",
                ));
            }
            match parse_intent(&line.utterance) {
                Ok(intent) if !known(intent.target_slice) => {
                    return Err(ConfigError::new(
                        "unknown_slice",
                        format!("{field}.utterance"),
                        format!("no slice {}", intent.target_slice),
                    ));
                }
                Ok(_) => {}
                Err(_) if self.bridge.is_some() => {}
                Err(r) => {
                    return Err(ConfigError::new(
                        "grammar",
                        format!("{field}.utterance"),
                        r.message,
                    ))
                }
            }
        }
        if let Some(g) = &self.governance {
            g.validate()?;
        }
        if let Some(b) = &self.bridge {
            if b.strategic_deadline_ms == 0 || b.tactical_deadline_ms == 0 {
                return Err(ConfigError::new(
                    "invalid_deadline",
                    "bridge",
                    "deadlines must be positive",
                ));
            }
        }
        if let Some(d) = self.time_dilation {
            if !(d.is_finite() && d >= 0.0) {
                return Err(ConfigError::new(
                    "invalid_dilation",
                    "time_dilation",
                    "must be a non-negative number",
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_is_valid_and_round_trips() {
        let r = ScenarioConfig::reference();
        assert_eq!(r.slices.len(), 4);
        assert_eq!(r.seed, 42);
        assert_eq!(r.phase_list().len(), 3);
        let again = ScenarioConfig::from_toml(&r.to_toml()).unwrap();
        assert_eq!(again, r);
    }

    #[test]
    fn zero_duration_is_rejected() {
        let mut r = ScenarioConfig::reference();
        r.duration_s = 0;
        assert_eq!(r.validate().unwrap_err().field, "duration_s");
    }

    #[test]
    fn dangling_references_are_rejected() {
        let mut r = ScenarioConfig::reference();
        r.flows[0].slice_id = 9;
        assert_eq!(r.validate().unwrap_err().code, "unknown_slice");
        let mut r = ScenarioConfig::reference();
        r.intents.push(IntentLine {
            t: 10.0,
            utterance: "promote slice 7 to VIP".into(),
        });
        assert_eq!(r.validate().unwrap_err().code, "unknown_slice");
        let mut r = ScenarioConfig::reference();
        r.intents.push(IntentLine {
            t: 10.0,
            utterance: "make it fast".into(),
        });
        assert_eq!(r.validate().unwrap_err().code, "grammar");
    }

    #[test]
    fn phases_must_tile_the_run() {
        let mut r = ScenarioConfig::reference();
        r.phases[1].start += 1.0;
        assert_eq!(r.validate().unwrap_err().code, "phase_gap");
        let mut r = ScenarioConfig::reference();
        r.duration_s += 10;
        assert_eq!(r.validate().unwrap_err().code, "phase_gap");
    }

    #[test]
    fn duration_override_keeps_phases_tiled() {
        let r = ScenarioConfig::reference().with_duration(100);
        assert_eq!(r.phases.len(), 2);
        assert_eq!(r.phases[1].end, 100.0);
        assert!(r.intents.is_empty());
        r.validate().unwrap();
        let r = ScenarioConfig::reference().with_duration(600);
        assert_eq!(r.phases[2].end, 600.0);
        r.validate().unwrap();
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let text = REFERENCE_SCENARIO.replace("scenario/v1", "scenario/v9");
        assert!(
            matches!(ScenarioConfig::from_toml(&text), Err(HarnessError::Config(e)) if e.code == "unsupported_schema")
        );
    }
}

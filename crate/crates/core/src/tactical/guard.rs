use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::caps::CapProposal;
use crate::domain::PolicyObject;

/// Stability-guard memory of the tactical agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuardState {
    pub last_decision_t: Option<f64>,
    pub last_caps: Option<Vec<u32>>,
    /// Signs (+1/-1) of recent nonzero cap changes, per slice.
    pub sign_history: Vec<VecDeque<i8>>,
    pub decisions_in_current_minute: u32,
    pub current_minute: i64,
    pub config: GuardConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuardConfig {
    /// Changes smaller than this are damped once a slice oscillates.
    pub hysteresis_prb: u32,
    /// Sign alternations within the inspected decisions that count as
    /// oscillation.
    pub oscillation_alternations: usize,
    /// Decisions inspected for alternations, including the proposed one.
    pub oscillation_span: usize,
    pub history_len: usize,
}

impl Default for GuardConfig {
    fn default() -> Self {
        Self {
            hysteresis_prb: 2,
            oscillation_alternations: 3,
            oscillation_span: 5,
            history_len: 10,
        }
    }
}

impl Default for GuardState {
    fn default() -> Self {
        Self::new(GuardConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum GuardVerdict {
    Accept,
    Defer { reason: String },
}

impl GuardVerdict {
    pub fn accepted(&self) -> bool {
        matches!(self, GuardVerdict::Accept)
    }
}

impl GuardState {
    pub fn new(config: GuardConfig) -> Self {
        Self {
            last_decision_t: None,
            last_caps: None,
            sign_history: Vec::new(),
            decisions_in_current_minute: 0,
            current_minute: -1,
            config,
        }
    }

    /// Starts from caps that are already in force.
    pub fn with_caps(config: GuardConfig, caps: Vec<u32>) -> Self {
        let mut g = Self::new(config);
        g.sign_history = vec![VecDeque::new(); caps.len()];
        g.last_caps = Some(caps);
        g
    }

    fn oscillating_slice(&self, caps: &[u32]) -> Option<usize> {
        let last = self.last_caps.as_ref()?;
        let cfg = &self.config;
        (0..caps.len()).find(|&i| {
            let delta = i64::from(caps[i]) - i64::from(last[i]);
            if delta == 0 || delta.unsigned_abs() >= u64::from(cfg.hysteresis_prb) {
                return false;
            }
            let hist = self.sign_history.get(i);
            let mut seq: Vec<i8> = hist
                .map(|h| {
                    h.iter()
                        .rev()
                        .take(cfg.oscillation_span - 1)
                        .rev()
                        .copied()
                        .collect()
                })
                .unwrap_or_default();
            seq.push(delta.signum() as i8);
            let alternations = seq.windows(2).filter(|w| w[0] != w[1]).count();
            alternations >= cfg.oscillation_alternations
        })
    }

    fn record(&mut self, t: f64, caps: &[u32]) {
        if self.sign_history.len() != caps.len() {
            self.sign_history = vec![VecDeque::new(); caps.len()];
        }
        if let Some(last) = &self.last_caps {
            for (i, h) in self.sign_history.iter_mut().enumerate() {
                let delta = i64::from(caps[i]) - i64::from(last[i]);
                if delta != 0 {
                    h.push_back(delta.signum() as i8);
                    while h.len() > self.config.history_len {
                        h.pop_front();
                    }
                }
            }
        }
        let minute = (t / 60.0).floor() as i64;
        if minute != self.current_minute {
            self.current_minute = minute;
            self.decisions_in_current_minute = 0;
        }
        self.decisions_in_current_minute += 1;
        self.last_decision_t = Some(t);
        self.last_caps = Some(caps.to_vec());
    }
}

/// Rate limit and oscillation damping. An accepted proposal is recorded
/// in `guard`; a deferred one leaves it untouched.
pub fn guard_decision(
    proposal: &CapProposal,
    guard: &mut GuardState,
    policy: &PolicyObject,
) -> GuardVerdict {
    if let Some(last_t) = guard.last_decision_t {
        if proposal.t - last_t < policy.min_decision_interval - 1e-9 {
            return GuardVerdict::Defer {
                reason: format!(
                    "rate_limit: {:.3}s since last decision, minimum {}s",
                    proposal.t - last_t,
                    policy.min_decision_interval
                ),
            };
        }
    }
    // Damping never holds caps that the current policy no longer admits.
    let admitted = guard.last_caps.as_ref().is_none_or(|last| {
        last.len() == policy.slices.len()
            && last
                .iter()
                .zip(&policy.slices)
                .all(|(&c, s)| c >= s.floor_prb && c <= s.ceiling_prb)
    });
    if let Some(i) = guard
        .oscillating_slice(&proposal.cap_prb)
        .filter(|_| admitted)
    {
        return GuardVerdict::Defer {
            reason: format!("oscillation: slice index {i} alternating below hysteresis"),
        };
    }
    guard.record(proposal.t, &proposal.cap_prb);
    GuardVerdict::Accept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn proposal(t: f64, caps: Vec<u32>) -> CapProposal {
        CapProposal {
            proposal_id: format!("p{t}"),
            controller_id: "slm".into(),
            t,
            cap_prb: caps,
            priority: 1.0,
            confidence: 1.0,
            expected_impact: 0.0,
        }
    }

    fn policy() -> PolicyObject {
        let specs: Vec<crate::SliceSpec> = (1..=2)
            .map(|id| crate::SliceSpec {
                slice_id: id,
                class: crate::SliceClass::Regular,
                latency_target: None,
                display_name: String::new(),
            })
            .collect();
        PolicyObject::permissive(&specs, 100)
    }

    #[test]
    fn first_proposal_is_accepted() {
        let mut g = GuardState::default();
        assert!(guard_decision(&proposal(0.0, vec![50, 50]), &mut g, &policy()).accepted());
        assert_eq!(g.last_caps, Some(vec![50, 50]));
    }

    #[test]
    fn proposals_too_close_are_deferred() {
        let mut g = GuardState::default();
        guard_decision(&proposal(1.0, vec![50, 50]), &mut g, &policy());
        let v = guard_decision(&proposal(1.4, vec![60, 40]), &mut g, &policy());
        assert!(matches!(v, GuardVerdict::Defer { reason } if reason.starts_with("rate_limit")));
        assert_eq!(g.last_caps, Some(vec![50, 50]));
    }

    #[test]
    fn alternating_small_steps_are_damped() {
        let mut g = GuardState::default();
        let p = policy();
        for (k, c) in [50, 51, 50, 51].iter().enumerate() {
            assert!(guard_decision(&proposal(k as f64, vec![*c, 100 - c]), &mut g, &p).accepted());
        }
        // +1 -1 +1 recorded; a further -1 is the third alternation.
        let v = guard_decision(&proposal(4.0, vec![50, 50]), &mut g, &p);
        assert!(matches!(v, GuardVerdict::Defer { reason } if reason.starts_with("oscillation")));
        assert_eq!(g.last_caps, Some(vec![51, 49]));
        // A large move is never damped.
        assert!(guard_decision(&proposal(4.0, vec![60, 40]), &mut g, &p).accepted());
    }

    #[test]
    fn history_is_bounded() {
        let mut g = GuardState::default();
        let p = policy();
        for k in 0..40 {
            let c = if k % 2 == 0 { 40 } else { 60 };
            guard_decision(&proposal(f64::from(k), vec![c, 100 - c]), &mut g, &p);
        }
        assert!(g.sign_history.iter().all(|h| h.len() <= 10));
        assert_eq!(g.decisions_in_current_minute, 40);
    }
}

use proptest::prelude::*;

use slicelab::baselines::ControllerKind;
use slicelab::domain::{decision_violations, AllocationDecision, PolicyObject};
use slicelab::harness::{BaselineController, IntentLine, ScenarioConfig, Session};
use slicelab::sim::{EventKind, EventLog, SimState};

const UTTERANCES: [&str; 5] = [
    "promote slice 4 to VIP",
    "demote slice 4",
    "set weight of slice 1 to 2",
    "set latency target of slice 3 to 20 ms",
    "set weight of slice 3 to 0",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn baselines_conserve_bytes(seed in 0u64..1_000, duration in 5u64..40, kind in 0usize..3) {
        let mut cfg = ScenarioConfig::reference().with_duration(duration);
        cfg.seed = seed;
        let kind = ControllerKind::ALL[kind];
        let mut sim = SimState::new(&cfg.sim_setup()).unwrap();
        let mut controller = BaselineController::new(kind, &cfg);
        let mut log = EventLog::new(Default::default());
        sim.run_until(duration, &mut controller, &mut log).unwrap();
        prop_assert!(sim.conserves_bytes());
        prop_assert_eq!(log.of_kind(EventKind::Kpm).count() as u64, 4 * duration);
    }

    #[test]
    fn agentic_decisions_respect_the_policy_in_force(
        seed in 0u64..1_000,
        intents in prop::collection::vec((1u64..120, 0usize..UTTERANCES.len()), 0..4),
    ) {
        let mut cfg = ScenarioConfig::reference().with_duration(120);
        cfg.seed = seed;
        cfg.intents = Vec::new();
        let mut session = Session::new(cfg.clone()).unwrap();
        for (t, u) in intents {
            session.schedule_intent(IntentLine { t: t as f64, utterance: UTTERANCES[u].into() }).unwrap();
        }
        session.run_to_end().unwrap();

        let mut policies = vec![cfg.initial_policy()];
        let mut prev: Option<Vec<u32>> = Some(slicelab::baselines::static_alloc(4, 100));
        for e in session.log().events() {
            match e.kind {
                EventKind::Policy => {
                    let body = e.payload.get("policy").unwrap_or(&e.payload);
                    policies.push(serde_json::from_value::<PolicyObject>(body.clone()).unwrap());
                }
                EventKind::Allocation => {
                    let d: AllocationDecision = serde_json::from_value(e.payload.clone()).unwrap();
                    let policy = policies.iter().rev().find(|p| p.version == d.policy_version).unwrap();
                    let bad = decision_violations(&d.cap_prb, prev.as_deref(), policy, 100);
                    prop_assert!(bad.is_empty(), "t={}: {:?}", e.t, bad);
                    prev = Some(d.cap_prb);
                }
                _ => {}
            }
        }
    }
}

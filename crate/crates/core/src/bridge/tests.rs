use proptest::prelude::*;

use super::*;
use crate::domain::{IntentKind, SliceClass, SliceSpec};
use crate::strategic::parse_intent;

fn slices() -> Vec<SliceSpec> {
    vec![
        SliceSpec {
            slice_id: 1,
            class: SliceClass::Bandwidth,
            latency_target: None,
            display_name: "embb".into(),
        },
        SliceSpec {
            slice_id: 2,
            class: SliceClass::LatencySensitive,
            latency_target: Some(30.0),
            display_name: "urllc".into(),
        },
        SliceSpec {
            slice_id: 3,
            class: SliceClass::Regular,
            latency_target: None,
            display_name: "be".into(),
        },
    ]
}

fn strategic_request(utterances: &[&str]) -> BridgeRequest {
    let policy = PolicyObject::permissive(&slices(), 100);
    BridgeRequest::strategic(
        StrategicContext {
            summaries: Vec::new(),
            policy,
            anomalies: AnomalyReport::default(),
            pending_intents: utterances
                .iter()
                .map(|u| PendingIntent {
                    utterance: u.to_string(),
                    intent: parse_intent(u).ok(),
                })
                .collect(),
            guardrails: GuardrailSet::new(100),
        },
        STRATEGIC_DEADLINE_MS,
    )
}

fn tactical_request() -> BridgeRequest {
    let mut policy = PolicyObject::permissive(&slices(), 100);
    policy.max_step_prb = 10;
    BridgeRequest::tactical(
        TacticalContext {
            t: 7.0,
            aggregates: vec![None, None, None],
            demands: vec![50, 10, 60],
            policy,
            last_caps: Some(vec![33, 33, 34]),
            guardrails: GuardrailSet::new(100),
        },
        TACTICAL_DEADLINE_MS,
    )
}

fn replying(
    body: String,
    elapsed_ms: f64,
) -> impl FnMut(&str) -> Result<(String, f64), TransportFailure> + Send {
    move |_| Ok((body.clone(), elapsed_ms))
}

#[test]
fn no_connector_falls_back_immediately() {
    let x = request_decision(&strategic_request(&[]), None);
    assert_eq!(
        x.outcome.fallback_reason(),
        Some(FallbackReason::NoConnector)
    );
    assert_eq!(x.elapsed_ms, 0.0);
}

#[test]
fn well_formed_reply_is_adopted() {
    let req = strategic_request(&["promote slice 3 to VIP"]);
    let body = serde_json::to_string(&reference_response(&req)).unwrap();
    let mut c = FnConnector(replying(body.clone(), 120.0));
    let x = request_decision(&req, Some(&mut c));
    let resp = x.outcome.adopted().expect("adopted");
    let p = resp.policy.as_ref().unwrap();
    assert_eq!(p.version, 2);
    assert_eq!(p.slice(3).unwrap().class, SliceClass::Vip);
    assert!(resp.rationale.contains("promote slice 3 to VIP"));
    assert_eq!(x.response.as_deref(), Some(body.as_str()));
}

#[test]
fn floor_overflow_is_a_guardrail_violation() {
    let req = strategic_request(&[]);
    let mut resp = reference_response(&req);
    for s in &mut resp.policy.as_mut().unwrap().slices {
        s.floor_prb = 40;
    }
    let mut c = FnConnector(replying(serde_json::to_string(&resp).unwrap(), 5.0));
    let x = request_decision(&req, Some(&mut c));
    assert_eq!(
        x.outcome.fallback_reason(),
        Some(FallbackReason::GuardrailViolation)
    );
}

#[test]
fn schema_and_timeout_failures() {
    let req = tactical_request();
    let mut garbage = FnConnector(replying("{\"hello\": 1}".into(), 5.0));
    assert_eq!(
        request_decision(&req, Some(&mut garbage))
            .outcome
            .fallback_reason(),
        Some(FallbackReason::Schema)
    );

    let mut wrong_role = reference_response(&strategic_request(&[]));
    wrong_role.confidence = 0.5;
    let mut c = FnConnector(replying(serde_json::to_string(&wrong_role).unwrap(), 5.0));
    assert_eq!(
        request_decision(&req, Some(&mut c))
            .outcome
            .fallback_reason(),
        Some(FallbackReason::Schema)
    );

    let body = serde_json::to_string(&reference_response(&req)).unwrap();
    let mut slow = FnConnector(replying(body.clone(), 900.0));
    let x = request_decision(&req, Some(&mut slow));
    assert_eq!(x.outcome.fallback_reason(), Some(FallbackReason::Timeout));

    let mut broken = FnConnector(|_: &str| {
        Err(TransportFailure::Transport {
            detail: "refused".into(),
            elapsed_ms: 1.0,
        })
    });
    assert_eq!(
        request_decision(&req, Some(&mut broken))
            .outcome
            .fallback_reason(),
        Some(FallbackReason::Transport)
    );

    let mut ok = FnConnector(replying(body, 10.0));
    let x = request_decision(&req, Some(&mut ok));
    let caps = &x
        .outcome
        .adopted()
        .unwrap()
        .proposal
        .as_ref()
        .unwrap()
        .cap_prb;
    assert_eq!(caps.iter().sum::<u32>(), 100);
}

#[test]
fn tactical_step_violation_rejected() {
    let req = tactical_request();
    let mut resp = reference_response(&req);
    resp.proposal.as_mut().unwrap().cap_prb = vec![80, 10, 10];
    let mut c = FnConnector(replying(serde_json::to_string(&resp).unwrap(), 1.0));
    assert_eq!(
        request_decision(&req, Some(&mut c))
            .outcome
            .fallback_reason(),
        Some(FallbackReason::GuardrailViolation)
    );
}

#[test]
fn prompt_rendering_is_stable() {
    let a = render_prompt_context(&strategic_request(&[]));
    let b = render_prompt_context(&strategic_request(&[]));
    assert_eq!(a, b);
    assert!(a.contains("anomalies: none\n"));
    let with_intent = render_prompt_context(&strategic_request(&["Promote  slice 3 to vip"]));
    assert!(with_intent.contains("intents:\n  Promote  slice 3 to vip\n"));
    let t = render_prompt_context(&tactical_request());
    assert!(t.contains("role: tactical"));
    assert!(t.contains("last_caps: [33, 33, 34]"));
}

#[test]
fn request_round_trips_as_json() {
    let req = strategic_request(&["demote slice 1"]);
    let text = serde_json::to_string(&req).unwrap();
    assert!(text.contains("\"role\":\"strategic\""));
    assert!(text.contains("\"schema_version\":\"bridge/v1\""));
    let back: BridgeRequest = serde_json::from_str(&text).unwrap();
    assert_eq!(back, req);
    match &back.context {
        BridgeContext::Strategic(c) => assert_eq!(
            c.pending_intents[0].intent.as_ref().unwrap().kind,
            IntentKind::DemoteSlice
        ),
        BridgeContext::Tactical(_) => panic!("wrong role"),
    }
}

#[test]
fn http_connector_reports_transport_errors() {
    let mut c = HttpConnector::new("http://127.0.0.1:9");
    let x = request_decision(&tactical_request(), Some(&mut c));
    assert_eq!(x.outcome.fallback_reason(), Some(FallbackReason::Transport));
    assert_eq!(c.url(), "http://127.0.0.1:9/v1/decide");
}

fn mutated_caps() -> impl Strategy<Value = (Vec<u32>, f64, bool)> {
    (
        prop::collection::vec(0u32..120, 0..5),
        -0.5f64..1.5,
        any::<bool>(),
    )
}

proptest! {
    #[test]
    fn adversarial_replies_never_breach_invariants((caps, confidence, drop_proposal) in mutated_caps(), noise in ".{0,20}") {
        let req = tactical_request();
        let mut resp = reference_response(&req);
        resp.confidence = confidence;
        if drop_proposal {
            resp.proposal = None;
        } else {
            resp.proposal.as_mut().unwrap().cap_prb = caps;
        }
        let body = format!("{}{}", serde_json::to_string(&resp).unwrap(), if noise.len() % 3 == 0 { "" } else { noise.as_str() });
        let mut c = FnConnector(replying(body, 3.0));
        let x = request_decision(&req, Some(&mut c));
        if let (Some(r), BridgeContext::Tactical(ctx)) = (x.outcome.adopted(), &req.context) {
            let p = r.proposal.as_ref().unwrap();
            prop_assert!(decision_violations(&p.cap_prb, ctx.last_caps.as_deref(), &ctx.policy, 100).is_empty());
            prop_assert!((0.0..=1.0).contains(&r.confidence));
        }
    }

    #[test]
    fn adversarial_policies_are_validated(floors in prop::collection::vec(0u32..80, 3), step in 0u32..150, weight in -1.0f64..4.0) {
        let req = strategic_request(&[]);
        let mut resp = reference_response(&req);
        let p = resp.policy.as_mut().unwrap();
        for (s, f) in p.slices.iter_mut().zip(&floors) {
            s.floor_prb = *f;
        }
        p.max_step_prb = step;
        p.slices[1].priority = weight;
        let mut c = FnConnector(replying(serde_json::to_string(&resp).unwrap(), 3.0));
        let x = request_decision(&req, Some(&mut c));
        if let Some(r) = x.outcome.adopted() {
            prop_assert!(validate_policy(r.policy.as_ref().unwrap(), &GuardrailSet::new(100)).ok);
        }
    }
}

use std::fmt::Write;

use super::{BridgeContext, BridgeRequest};
use crate::domain::PolicyObject;
use crate::strategic::AnomalyReport;

fn policy_section(out: &mut String, p: &PolicyObject) {
    let _ = writeln!(
        out,
        "policy: version={} max_step_prb={} min_decision_interval={} intent_tag={}",
        p.version, p.max_step_prb, p.min_decision_interval, p.intent_tag
    );
    for s in &p.slices {
        let _ = write!(
            out,
            "  slice {} class={} floor={} ceiling={} priority={}",
            s.slice_id,
            s.class.as_str(),
            s.floor_prb,
            s.ceiling_prb,
            s.priority
        );
        if let Some(t) = s.latency_target {
            let _ = write!(out, " latency_target_ms={t}");
        }
        out.push('\n');
    }
    for (id, w) in &p.controller_priority {
        let _ = writeln!(out, "  controller {id} priority={w}");
    }
}

fn anomaly_section(out: &mut String, a: &AnomalyReport) {
    if a.is_empty() {
        out.push_str("anomalies: none\n");
        return;
    }
    out.push_str("anomalies:\n");
    for e in &a.evidence {
        let _ = writeln!(
            out,
            "  {} slice {} minutes={:?} values={:?} threshold={}",
            e.flag.as_str(),
            e.slice_id,
            e.minutes,
            e.values,
            e.threshold
        );
    }
}

/// Deterministic plain-text rendering of a request's context, one section
/// per field in a fixed order.
pub fn render_prompt_context(req: &BridgeRequest) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "schema: {}", req.schema_version);
    match &req.context {
        BridgeContext::Strategic(ctx) => {
            out.push_str("role: strategic\n");
            let _ = writeln!(out, "deadline_ms: {}", req.deadline_ms);
            policy_section(&mut out, &ctx.policy);
            let g = &ctx.guardrails;
            let _ = writeln!(
                out,
                "guardrails: total_prb={} max_step_prb_limit={} min_floor_latency_slice={} max_policy_updates_per_minute={}",
                g.total_prb, g.max_step_prb_limit, g.min_floor_latency_slice, g.max_policy_updates_per_minute
            );
            if ctx.summaries.is_empty() {
                out.push_str("summaries: none\n");
            } else {
                out.push_str("summaries:\n");
                for m in &ctx.summaries {
                    for s in &m.slices {
                        let _ = writeln!(
                            out,
                            "  minute {} policy v{} slice {} mean_throughput_mbps={:.3} p95_delay_ms={:.3} efficiency={:.3} starvation={:.3}",
                            m.minute,
                            m.policy_version,
                            s.slice_id,
                            s.mean_throughput,
                            s.p95_delay,
                            s.mean_efficiency,
                            s.starvation_fraction
                        );
                    }
                }
            }
            anomaly_section(&mut out, &ctx.anomalies);
            if ctx.pending_intents.is_empty() {
                out.push_str("intents: none\n");
            } else {
                out.push_str("intents:\n");
                for p in &ctx.pending_intents {
                    let _ = writeln!(out, "  {}", p.utterance);
                }
            }
        }
        BridgeContext::Tactical(ctx) => {
            out.push_str("role: tactical\n");
            let _ = writeln!(out, "deadline_ms: {}", req.deadline_ms);
            let _ = writeln!(out, "t: {}", ctx.t);
            policy_section(&mut out, &ctx.policy);
            let _ = writeln!(out, "total_prb: {}", ctx.guardrails.total_prb);
            match &ctx.last_caps {
                Some(c) => {
                    let _ = writeln!(out, "last_caps: {c:?}");
                }
                None => out.push_str("last_caps: none\n"),
            }
            let _ = writeln!(out, "demands: {:?}", ctx.demands);
            out.push_str("window:\n");
            for (s, a) in ctx.policy.slices.iter().zip(&ctx.aggregates) {
                match a {
                    Some(a) => {
                        let _ = writeln!(
                            out,
                            "  slice {} samples={} mean_throughput_mbps={:.3} mean_delay_ms={:.3} backlog_bytes={} efficiency={:.3}",
                            s.slice_id, a.samples, a.mean_throughput, a.mean_delay, a.latest_backlog, a.efficiency
                        );
                    }
                    None => {
                        let _ = writeln!(out, "  slice {} empty", s.slice_id);
                    }
                }
            }
        }
    }
    out
}

use proptest::prelude::*;

use super::*;
use crate::domain::SliceClass;

fn slice(id: SliceId) -> SliceSpec {
    SliceSpec {
        slice_id: id,
        class: SliceClass::Regular,
        latency_target: None,
        display_name: format!("s{id}"),
    }
}

fn cbr(slice_id: SliceId, gap_s: f64, bytes: f64, start: f64, stop: f64) -> FlowSpec {
    FlowSpec {
        slice_id,
        start_t: start,
        stop_t: stop,
        inter_departure: Distribution::Constant { value: gap_s },
        packet_size: Distribution::Constant { value: bytes },
        label: format!("cbr{slice_id}"),
    }
}

fn setup(n: u32, flows: Vec<FlowSpec>, total: u32, bpp: u32) -> SimSetup {
    SimSetup {
        seed: 42,
        slices: (1..=n).map(slice).collect(),
        flows,
        radio: RadioModel {
            total_prb: total,
            bytes_per_prb_per_tti: bpp,
            ..RadioModel::default()
        },
        options: SimOptions::default(),
        initial_caps: None,
    }
}

struct Fixed {
    calls: usize,
    elapsed_ms: f64,
    caps: Option<Vec<u32>>,
}

impl Controller for Fixed {
    fn id(&self) -> &str {
        "fixed"
    }

    fn budget_ms(&self) -> f64 {
        100.0
    }

    fn decide(&mut self, t: f64, _log: &mut EventLog) -> ControlOutput {
        self.calls += 1;
        ControlOutput {
            decision: self.caps.clone().map(|cap_prb| AllocationDecision {
                t,
                cap_prb,
                policy_version: 1,
                controller_id: "fixed".into(),
                arbitration_trace: Vec::new(),
            }),
            elapsed_ms: self.elapsed_ms,
            weights: None,
        }
    }
}

fn fixed(caps: Option<Vec<u32>>) -> Fixed {
    Fixed {
        calls: 0,
        elapsed_ms: 1.0,
        caps,
    }
}

#[test]
fn single_tick_drains_small_arrival() {
    // One 1000 B packet at 0.5 ms; 10 PRB x 100 B serves it in the first TTI.
    let mut s = setup(1, vec![cbr(1, 0.0005, 1000.0, 0.0, 0.0009)], 10, 100);
    s.initial_caps = Some(vec![10]);
    let mut sim = SimState::new(&s).unwrap();
    let ev = sim.step_tti();
    assert!(ev.contains(&SimEvent::Arrival {
        flow: 0,
        slice_id: 1,
        bytes: 1000
    }));
    assert_eq!(sim.queue_state()[0].backlog, 0);
    assert_eq!(sim.queue_state()[0].served, 1000);
}

#[test]
fn spare_prbs_go_to_backlogged_slice() {
    // Slice A floods its queue, slice B idles; both capped at 5 of 10.
    let mut s = setup(2, vec![cbr(1, 0.0001, 10_000.0, 0.0, 1.0)], 10, 100);
    s.initial_caps = Some(vec![5, 5]);
    let mut sim = SimState::new(&s).unwrap();
    let ev = sim.step_tti();
    assert!(ev.contains(&SimEvent::Service {
        slice_id: 1,
        granted: 10,
        redistributed: 5,
        bytes: 1000
    }));

    s.options.redistribution = false;
    let mut sim = SimState::new(&s).unwrap();
    let ev = sim.step_tti();
    assert!(ev.contains(&SimEvent::Service {
        slice_id: 1,
        granted: 5,
        redistributed: 0,
        bytes: 500
    }));
}

#[test]
fn idle_tick_emits_no_service() {
    let mut sim = SimState::new(&setup(2, vec![], 10, 100)).unwrap();
    assert!(sim.step_tti().is_empty());
    assert!(sim.conserves_bytes());
}

#[test]
fn unknown_slice_is_config_error() {
    let s = setup(4, vec![cbr(9, 0.01, 100.0, 0.0, 1.0)], 100, 50);
    match SimState::new(&s) {
        Err(SimError::Config(e)) => {
            assert_eq!(e.code, "unknown_slice");
            assert_eq!(e.field, "flows[0].slice_id");
        }
        other => panic!("expected config error, got {other:?}"),
    }
}

#[test]
fn fresh_state_has_empty_queues_and_equal_caps() {
    let sim = SimState::new(&setup(4, vec![cbr(1, 0.01, 100.0, 0.0, 1.0)], 100, 50)).unwrap();
    assert_eq!(sim.now(), 0.0);
    assert_eq!(sim.caps(), &[25, 25, 25, 25]);
    assert!(sim
        .queue_state()
        .iter()
        .all(|q| q.backlog == 0 && q.arrived == 0));
    let again = SimState::new(&setup(4, vec![cbr(1, 0.01, 100.0, 0.0, 1.0)], 100, 50)).unwrap();
    assert_eq!(sim.digest(), again.digest());
}

#[test]
fn kpm_counts_and_units() {
    // 1 250 000 B/s offered, enough capacity: 10 Mbit/s served.
    let mut s = setup(2, vec![cbr(1, 0.001, 1250.0, 0.0, 5.0)], 100, 50);
    s.initial_caps = Some(vec![50, 50]);
    let mut sim = SimState::new(&s).unwrap();
    let mut log = EventLog::default();
    // Packets arrive on TTI boundaries and are served at the TTI end.
    sim.run_until(2, &mut fixed(None), &mut log).unwrap();
    let kpm: Vec<&Event> = log.of_kind(EventKind::Kpm).collect();
    assert_eq!(kpm.len(), 4);
    let second: KpmRecord = serde_json::from_value(kpm[2].payload.clone()).unwrap();
    assert_eq!(second.t, 2.0);
    assert!((second.dl_throughput - 10.0).abs() < 1e-9);
    assert_eq!(second.rlc_delay, 1.0);
    // 1250 B needs 25 PRBs per TTI under a cap of 50.
    assert_eq!(second.prb_used, 25_000);
    assert_eq!(second.prb_allocated, 50_000);
    let idle: KpmRecord = serde_json::from_value(kpm[3].payload.clone()).unwrap();
    assert_eq!(
        (idle.dl_throughput, idle.rlc_delay, idle.prb_used),
        (0.0, 0.0, 0)
    );
}

#[test]
fn ten_seconds_give_ten_batches() {
    let s = setup(
        4,
        vec![
            cbr(1, 0.01, 500.0, 0.0, 10.0),
            cbr(3, 0.002, 200.0, 1.0, 8.0),
        ],
        100,
        50,
    );
    let mut sim = SimState::new(&s).unwrap();
    let mut log = EventLog::default();
    let mut c = fixed(Some(vec![25; 4]));
    sim.run_until(10, &mut c, &mut log).unwrap();
    for id in 1..=4 {
        let times: Vec<f64> = log
            .of_kind(EventKind::Kpm)
            .filter(|e| e.slice_id == Some(id))
            .map(|e| e.t)
            .collect();
        assert_eq!(times, (1..=10).map(f64::from).collect::<Vec<_>>());
    }
    // decisions at 0..=10
    assert_eq!(c.calls, 11);
}

#[test]
fn split_runs_match_single_run() {
    let s = setup(2, vec![cbr(1, 0.003, 700.0, 0.0, 6.0)], 20, 50);
    let mut a = SimState::new(&s).unwrap();
    let mut la = EventLog::default();
    a.run_until(6, &mut fixed(Some(vec![12, 8])), &mut la)
        .unwrap();
    let mut b = SimState::new(&s).unwrap();
    let mut lb = EventLog::default();
    let mut c = fixed(Some(vec![12, 8]));
    b.run_until(2, &mut c, &mut lb).unwrap();
    b.run_until(6, &mut c, &mut lb).unwrap();
    assert_eq!(la.digest(), lb.digest());
    assert!(matches!(
        b.run_until(6, &mut c, &mut lb),
        Err(SimError::Horizon { .. })
    ));
}

#[test]
fn over_budget_decisions_are_discarded() {
    let s = setup(4, vec![cbr(2, 0.001, 400.0, 0.0, 5.0)], 100, 50);
    let mut sim = SimState::new(&s).unwrap();
    let mut log = EventLog::default();
    let mut slow = fixed(Some(vec![10, 70, 10, 10]));
    slow.elapsed_ms = 250.0;
    sim.run_until(5, &mut slow, &mut log).unwrap();
    assert_eq!(sim.caps(), &[25, 25, 25, 25]);
    assert_eq!(log.of_kind(EventKind::Allocation).count(), 0);
    assert_eq!(log.of_kind(EventKind::AllocationDiscarded).count(), 6);
    for e in log.of_kind(EventKind::Kpm) {
        assert!(e.payload["prb_allocated"].as_u64().unwrap() >= 25_000);
    }
}

#[test]
fn overflowing_caps_are_a_hard_fault() {
    let s = setup(2, vec![], 10, 50);
    let mut sim = SimState::new(&s).unwrap();
    let mut log = EventLog::default();
    let err = sim
        .run_until(1, &mut fixed(Some(vec![6, 6])), &mut log)
        .unwrap_err();
    assert_eq!(err, SimError::CapOverflow { sum: 12, total: 10 });
}

#[test]
fn queue_limit_drops_overflow() {
    let mut s = setup(1, vec![cbr(1, 0.0001, 1000.0, 0.0, 1.0)], 1, 10);
    s.options.queue_limit_bytes = Some(5_000);
    let mut sim = SimState::new(&s).unwrap();
    let mut log = EventLog::default();
    sim.run_until(1, &mut fixed(None), &mut log).unwrap();
    let q = &sim.queue_state()[0];
    assert!(q.dropped > 0);
    assert!(q.backlog <= 5_000);
    assert!(sim.conserves_bytes());
    assert_eq!(log.of_kind(EventKind::Drops).count(), 1);
}

#[test]
fn channel_factor_scales_service() {
    let mut s = setup(1, vec![cbr(1, 0.0001, 1000.0, 0.0, 3.0)], 10, 100);
    s.radio.channel.push(ChannelStep {
        t: 1.0,
        slice_id: None,
        factor: 0.5,
    });
    let mut sim = SimState::new(&s).unwrap();
    let mut log = EventLog::default();
    sim.run_until(2, &mut fixed(None), &mut log).unwrap();
    let thr: Vec<f64> = log
        .of_kind(EventKind::Kpm)
        .map(|e| e.payload["dl_throughput"].as_f64().unwrap())
        .collect();
    assert!((thr[0] - 8.0).abs() < 1e-9);
    assert!((thr[1] - 4.0).abs() < 1e-9);
}

#[test]
fn tti_detail_logs_every_slice_every_tti() {
    let mut s = setup(2, vec![cbr(1, 0.01, 100.0, 0.0, 1.0)], 10, 100);
    s.options.log_detail = LogDetail::Tti;
    let mut sim = SimState::new(&s).unwrap();
    let mut log = EventLog::new(LogDetail::Tti);
    sim.run_until(1, &mut fixed(None), &mut log).unwrap();
    assert_eq!(log.of_kind(EventKind::Tti).count(), 2000);
}

fn mixed_setup(seed: u64, scale: f64, redistribution: bool) -> SimSetup {
    let flows = vec![
        FlowSpec {
            slice_id: 1,
            start_t: 0.0,
            stop_t: 4.0,
            inter_departure: Distribution::Exponential {
                mean: 0.002 * scale,
            },
            packet_size: Distribution::Uniform {
                low: 200.0,
                high: 1400.0,
            },
            label: "a".into(),
        },
        FlowSpec {
            slice_id: 2,
            start_t: 0.5,
            stop_t: 3.0,
            inter_departure: Distribution::Constant {
                value: 0.001 * scale,
            },
            packet_size: Distribution::Constant { value: 900.0 },
            label: "b".into(),
        },
        FlowSpec {
            slice_id: 3,
            start_t: 1.0,
            stop_t: 4.0,
            inter_departure: Distribution::Uniform {
                low: 0.0005 * scale,
                high: 0.003 * scale,
            },
            packet_size: Distribution::Exponential { mean: 500.0 },
            label: "c".into(),
        },
    ];
    let mut s = setup(3, flows, 30, 50);
    s.seed = seed;
    s.options.redistribution = redistribution;
    s
}

fn buffer_integrals(s: &SimSetup, caps: &[u32]) -> Vec<u64> {
    let mut sim = SimState::new(s).unwrap();
    let mut log = EventLog::default();
    sim.run_until(4, &mut fixed(Some(caps.to_vec())), &mut log)
        .unwrap();
    let mut out = vec![0; s.slices.len()];
    for e in log.of_kind(EventKind::Kpm) {
        let i = s
            .slices
            .iter()
            .position(|x| Some(x.slice_id) == e.slice_id)
            .unwrap();
        out[i] += e.payload["buffer_occupancy"].as_u64().unwrap();
    }
    out
}

#[test]
fn identical_runs_produce_identical_logs() {
    let s = mixed_setup(42, 1.0, true);
    let run_once = || {
        let mut sim = SimState::new(&s).unwrap();
        let mut log = EventLog::default();
        sim.run_until(4, &mut fixed(Some(vec![10, 10, 10])), &mut log)
            .unwrap();
        (log.to_jsonl(), sim.digest())
    };
    assert_eq!(run_once(), run_once());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bytes_are_conserved_every_tick(seed in 0u64..1000, limit in prop::option::of(2_000u64..50_000), caps in prop::collection::vec(0u32..=10, 3)) {
        let mut s = mixed_setup(seed, 1.0, seed % 2 == 0);
        s.options.queue_limit_bytes = limit;
        let mut sim = SimState::new(&s).unwrap();
        sim.set_caps(&caps).unwrap();
        for _ in 0..3000 {
            let events = sim.step_tti();
            let granted: u32 = events.iter().map(|e| match e { SimEvent::Service { granted, .. } => *granted, _ => 0 }).sum();
            prop_assert!(granted <= 30);
            for e in &events {
                if let SimEvent::Service { slice_id, granted, redistributed, .. } = e {
                    let i = (*slice_id - 1) as usize;
                    prop_assert!(*granted <= caps[i] + redistributed);
                    if !s.options.redistribution {
                        prop_assert!(*granted <= caps[i]);
                    }
                }
            }
            prop_assert!(sim.conserves_bytes());
        }
    }

    #[test]
    fn doubling_load_never_shrinks_buffers(seed in 0u64..1000, caps in prop::collection::vec(1u32..10, 3)) {
        let base = buffer_integrals(&mixed_setup(seed, 1.0, false), &caps);
        let doubled = buffer_integrals(&mixed_setup(seed, 0.5, false), &caps);
        for (b, d) in base.iter().zip(&doubled) {
            prop_assert!(d >= b, "base {base:?} doubled {doubled:?}");
        }
    }
}

use super::*;
use crate::workload::presets;
use approx::assert_relative_eq;

fn secs(s: f64) -> Ticks {
    Ticks::from_secs(s)
}

/// Three flows on a unit-speed link (8 bit/s, so seconds equal bytes):
/// sizes 6, 3, 2 arriving at 0, 2, 4.
fn textbook_trace() -> Vec<Flow> {
    [(0u64, 0.0, 6.0), (1, 2.0, 3.0), (2, 4.0, 2.0)]
        .into_iter()
        .map(|(id, a, x)| Flow {
            id,
            arrival: secs(a),
            size: x,
            demand: secs(x),
        })
        .collect()
}

fn web_ctx(load: f64) -> crate::workload::TrafficContext {
    crate::workload::TrafficContext::new(presets::websearch_bp(), 1e10, load).unwrap()
}

#[test]
fn textbook_srpt_schedule() {
    let out = run(&textbook_trace(), &PolicyConfig::srpt_ideal()).unwrap();
    let completions: Vec<f64> = out.records.iter().map(|r| r.completion.as_secs()).collect();
    assert_eq!(completions, vec![11.0, 5.0, 7.0]);
    let fcts: Vec<f64> = out.records.iter().map(|r| r.fct().as_secs()).collect();
    assert_eq!(fcts, vec![11.0, 3.0, 3.0]);
    assert_eq!(afct(&out.records, ClassFilter::All).unwrap(), 17.0 / 3.0);
    let first: Vec<f64> = out
        .records
        .iter()
        .map(|r| r.first_service.as_secs())
        .collect();
    assert_eq!(first, vec![0.0, 2.0, 5.0]);
}

#[test]
fn textbook_delayed_schedule_is_shifted() {
    let cost = crate::analysis::CostModel::from_total(2.5).unwrap();
    let out = run(&textbook_trace(), &PolicyConfig::srpt_delayed(&cost)).unwrap();
    let completions: Vec<f64> = out.records.iter().map(|r| r.completion.as_secs()).collect();
    assert_eq!(completions, vec![13.5, 7.5, 9.5]);
    let first: Vec<f64> = out
        .records
        .iter()
        .map(|r| r.first_service.as_secs())
        .collect();
    assert_eq!(first, vec![2.5, 4.5, 7.5]);
    assert!(out
        .records
        .iter()
        .all(|r| r.class == FlowClass::Unclassified));
}

#[test]
fn textbook_fcfs_schedule() {
    let out = run(&textbook_trace(), &PolicyConfig::fcfs()).unwrap();
    let completions: Vec<f64> = out.records.iter().map(|r| r.completion.as_secs()).collect();
    assert_eq!(completions, vec![6.0, 9.0, 11.0]);
    assert_eq!(afct(&out.records, ClassFilter::All).unwrap(), 20.0 / 3.0);
}

#[test]
fn delayed_machine_equals_shifted_oracle_bitwise() {
    let ctx = web_ctx(0.7);
    for seed in [1u64, 2, 3] {
        for total in [0.0, 100e-6, 2.5e-3] {
            let cost = crate::analysis::CostModel::from_total(total).unwrap();
            let flows = generate_flows(&ctx, 1000, seed);
            let machine = run(&flows, &PolicyConfig::srpt_delayed(&cost)).unwrap();
            let oracle = shifted_ideal_oracle(&flows, &cost).unwrap();
            for (m, o) in machine.records.iter().zip(&oracle.records) {
                assert_eq!(m.flow.id, o.flow.id);
                assert_eq!(m.first_service, o.first_service, "seed {seed} cost {total}");
                assert_eq!(m.completion, o.completion, "seed {seed} cost {total}");
            }
            assert_eq!(machine.timeline, oracle.timeline);
        }
    }
}

#[test]
fn two_q_with_unreachable_threshold_degenerates_to_delayed_srpt() {
    let ctx = web_ctx(0.6);
    let cost = crate::analysis::CostModel::from_total(100e-6).unwrap();
    let flows = generate_flows(&ctx, 2000, 9);
    let h = ctx.dist().min_size();
    let two_q = run(&flows, &PolicyConfig::two_q_plus(&cost, h).unwrap()).unwrap();
    let srpt = run(&flows, &PolicyConfig::srpt_delayed(&cost)).unwrap();
    assert!(two_q.records.iter().all(|r| r.class == FlowClass::Second));
    for (a, b) in two_q.records.iter().zip(&srpt.records) {
        assert_eq!(a.first_service, b.first_service);
        assert_eq!(a.completion, b.completion);
    }
    let cmp = compare_2qplus_vs_srpt(&ctx, &cost, h, 2000, 9).unwrap();
    assert_eq!(cmp.n_first, 0);
    assert_eq!(cmp.ratio_first, 1.0);
    assert_eq!(cmp.ratio_second, 1.0);
    assert_eq!(cmp.ratio_all, 1.0);
}

#[test]
fn two_q_with_full_coverage_degenerates_to_fcfs() {
    let ctx = web_ctx(0.6);
    let cost = crate::analysis::CostModel::from_total(100e-6).unwrap();
    let flows = generate_flows(&ctx, 2000, 11);
    let h = ctx.dist().max_size() * 2.0;
    let two_q = run(&flows, &PolicyConfig::two_q_plus(&cost, h).unwrap()).unwrap();
    let fcfs = run(&flows, &PolicyConfig::fcfs()).unwrap();
    assert!(two_q.records.iter().all(|r| r.class == FlowClass::First));
    for (a, b) in two_q.records.iter().zip(&fcfs.records) {
        assert_eq!(a.first_service, b.first_service);
        assert_eq!(a.completion, b.completion);
    }
}

#[test]
fn bypass_flows_preempt_scheduled_service() {
    // Unit-speed link, 1 s lag, threshold 5 bytes. The 10-byte flow starts at
    // its eligibility, loses the link to each bypass arrival, and resumes
    // with no further lag.
    let flows = vec![
        Flow {
            id: 0,
            arrival: secs(0.0),
            size: 10.0,
            demand: secs(10.0),
        },
        Flow {
            id: 1,
            arrival: secs(2.0),
            size: 4.0,
            demand: secs(4.0),
        },
        Flow {
            id: 2,
            arrival: secs(3.0),
            size: 4.5,
            demand: secs(4.5),
        },
    ];
    let cost = crate::analysis::CostModel::from_total(1.0).unwrap();
    let out = run(&flows, &PolicyConfig::two_q_plus(&cost, 5.0).unwrap()).unwrap();
    assert_eq!(out.records[0].class, FlowClass::Second);
    assert_eq!(out.records[1].class, FlowClass::First);
    assert_eq!(out.records[2].class, FlowClass::First);
    let first: Vec<f64> = out
        .records
        .iter()
        .map(|r| r.first_service.as_secs())
        .collect();
    assert_eq!(first, vec![1.0, 2.0, 6.0]);
    let completions: Vec<f64> = out.records.iter().map(|r| r.completion.as_secs()).collect();
    assert_eq!(completions, vec![19.5, 6.0, 10.5]);
    assert!(out.timeline.is_contiguous());
}

#[test]
fn equal_remaining_ties_break_by_arrival_then_id() {
    let flows = vec![
        Flow {
            id: 0,
            arrival: secs(0.0),
            size: 5.0,
            demand: secs(5.0),
        },
        Flow {
            id: 1,
            arrival: secs(0.0),
            size: 5.0,
            demand: secs(5.0),
        },
    ];
    let out = run(&flows, &PolicyConfig::srpt_ideal()).unwrap();
    assert_eq!(out.records[0].completion.as_secs(), 5.0);
    assert_eq!(out.records[1].completion.as_secs(), 10.0);
    // The later arrival never interrupts an equal remainder.
    assert_eq!(out.timeline.segments().len(), 2);
}

#[test]
fn single_flow_pays_exactly_lag_plus_demand() {
    let ctx = web_ctx(0.5);
    let flows = generate_flows(&ctx, 1, 5);
    assert_eq!(flows.len(), 1);
    assert!(flows[0].arrival >= Ticks::ZERO);
    let cost = crate::analysis::CostModel::from_total(250e-6).unwrap();
    let out = run(&flows, &PolicyConfig::srpt_delayed(&cost)).unwrap();
    let want = secs(250e-6) + flows[0].demand;
    assert_eq!(out.records[0].fct(), want);
    let ideal = run(&flows, &PolicyConfig::srpt_ideal()).unwrap();
    assert_eq!(ideal.records[0].fct(), flows[0].demand);
}

#[test]
fn every_policy_conserves_work() {
    let ctx = web_ctx(0.8);
    let flows = generate_flows(&ctx, 500, 21);
    let cost = crate::analysis::CostModel::from_total(100e-6).unwrap();
    let h = 1e6;
    for cfg in [
        PolicyConfig::fcfs(),
        PolicyConfig::srpt_ideal(),
        PolicyConfig::srpt_delayed(&cost),
        PolicyConfig::two_q_plus(&cost, h).unwrap(),
    ] {
        let out = run(&flows, &cfg).unwrap();
        assert!(out.timeline.is_contiguous(), "{}", cfg.policy());
        let busy = out.timeline.busy_per_flow();
        for f in &flows {
            assert_eq!(busy[&f.id], f.demand, "{} flow {}", cfg.policy(), f.id);
        }
        for r in &out.records {
            assert!(r.first_service >= r.flow.arrival);
            assert!(r.completion >= r.first_service + Ticks(1));
            assert!(r.residence() >= r.flow.demand);
        }
    }
}

#[test]
fn scheduled_flows_wait_at_least_the_lag() {
    let ctx = web_ctx(0.5);
    let flows = generate_flows(&ctx, 300, 33);
    let cost = crate::analysis::CostModel::from_total(1e-3).unwrap();
    let lag = secs(1e-3);
    let out = run(&flows, &PolicyConfig::srpt_delayed(&cost)).unwrap();
    for r in &out.records {
        assert!(r.waiting() >= lag);
    }
    let h = 1e5;
    let out = run(&flows, &PolicyConfig::two_q_plus(&cost, h).unwrap()).unwrap();
    for r in &out.records {
        match r.class {
            FlowClass::Second => assert!(r.waiting() >= lag),
            _ => assert!(r.waiting() >= Ticks::ZERO),
        }
    }
}

#[test]
fn srpt_beats_fcfs_on_heavy_tails() {
    let ctx = web_ctx(0.8);
    let flows = generate_flows(&ctx, 20_000, 77);
    let srpt = run(&flows, &PolicyConfig::srpt_ideal()).unwrap();
    let fcfs = run(&flows, &PolicyConfig::fcfs()).unwrap();
    let a = afct(&srpt.records, ClassFilter::All).unwrap();
    let b = afct(&fcfs.records, ClassFilter::All).unwrap();
    assert!(a < b, "srpt {a} vs fcfs {b}");
}

#[test]
fn generation_is_deterministic_and_sorted() {
    let ctx = web_ctx(0.5);
    let a = generate_flows(&ctx, 5000, 123);
    let b = generate_flows(&ctx, 5000, 123);
    assert_eq!(a, b);
    let c = generate_flows(&ctx, 5000, 124);
    assert_ne!(a, c);
    assert!(a.windows(2).all(|w| (w[0].arrival, w[0].id) < (w[1].arrival, w[1].id)));
    assert!(a.iter().all(|f| f.demand >= Ticks(1)));
    let mean_gap = a.last().unwrap().arrival.as_secs() / 5000.0;
    assert_relative_eq!(mean_gap, 1.0 / ctx.arrival_rate(), max_relative = 0.05);
}

#[test]
fn rejects_malformed_traces() {
    let mut flows = textbook_trace();
    flows[1].demand = Ticks::ZERO;
    assert!(matches!(
        run(&flows, &PolicyConfig::fcfs()),
        Err(Error::InvalidFlows(_))
    ));
    let mut flows = textbook_trace();
    flows.swap(0, 2);
    assert!(run(&flows, &PolicyConfig::fcfs()).is_err());
    let mut flows = textbook_trace();
    flows[2].id = 0;
    flows[2].arrival = flows[1].arrival;
    assert!(run(&flows, &PolicyConfig::fcfs()).is_err());
}

#[test]
fn policy_config_validation() {
    let cost = crate::analysis::CostModel::from_total(1e-4).unwrap();
    assert!(PolicyConfig::new(Policy::Fcfs, Some(&cost), None).is_err());
    assert!(PolicyConfig::new(Policy::SrptIdeal, None, Some(1e6)).is_err());
    assert!(PolicyConfig::new(Policy::SrptDelayed, None, None).is_err());
    assert!(PolicyConfig::new(Policy::SrptDelayed, Some(&cost), Some(1e6)).is_err());
    assert!(PolicyConfig::new(Policy::TwoQPlus, Some(&cost), None).is_err());
    assert!(PolicyConfig::new(Policy::TwoQPlus, None, Some(1e6)).is_err());
    assert!(PolicyConfig::new(Policy::TwoQPlus, Some(&cost), Some(-1.0)).is_err());
    assert!(PolicyConfig::new(Policy::TwoQPlus, Some(&cost), Some(1e6)).is_ok());
    assert_eq!("two-q-plus".parse::<Policy>().unwrap(), Policy::TwoQPlus);
    assert!("round-robin".parse::<Policy>().is_err());
}

#[test]
fn afct_filters_by_class() {
    let ctx = web_ctx(0.5);
    let cost = crate::analysis::CostModel::from_total(1e-4).unwrap();
    let flows = generate_flows(&ctx, 500, 3);
    let out = run(&flows, &PolicyConfig::two_q_plus(&cost, 1e5).unwrap()).unwrap();
    let all = afct(&out.records, ClassFilter::All).unwrap();
    let first = afct(&out.records, ClassFilter::First).unwrap();
    let second = afct(&out.records, ClassFilter::Second).unwrap();
    assert!(first < second);
    assert!(all > 0.0);
    let ideal = run(&flows, &PolicyConfig::srpt_ideal()).unwrap();
    assert!(matches!(
        afct(&ideal.records, ClassFilter::First),
        Err(Error::EmptyFilter)
    ));
}

#[test]
fn records_csv_round_trips_through_trace_import() {
    let ctx = web_ctx(0.5);
    let flows = generate_flows(&ctx, 200, 8);
    let out = run(&flows, &PolicyConfig::srpt_ideal()).unwrap();
    let mut buf = Vec::new();
    write_records_csv(&mut buf, &out.records).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with(
        "flow_id,arrival_s,size_bytes,class,first_service_s,completion_s,fct_s\n"
    ));
    let back = parse_trace_csv(
        text.as_bytes(),
        Path::new("<test>"),
        ctx.link_rate(),
    )
    .unwrap();
    assert_eq!(back.len(), flows.len());
    for (a, b) in back.iter().zip(&flows) {
        assert_eq!(a.id, b.id);
        assert_eq!(a.arrival, b.arrival);
        assert_eq!(a.size.to_bits(), b.size.to_bits());
        assert_eq!(a.demand, b.demand);
    }
    let rerun = run(&back, &PolicyConfig::srpt_ideal()).unwrap();
    assert_eq!(rerun.records, out.records);
}

#[test]
fn trace_import_validates_input() {
    let p = Path::new("<test>");
    assert!(parse_trace_csv("".as_bytes(), p, 1e10).is_err());
    assert!(parse_trace_csv("id,start,size\n1,0,10\n".as_bytes(), p, 1e10).is_err());
    assert!(
        parse_trace_csv("flow_id,arrival_s,size_bytes\n1,0\n".as_bytes(), p, 1e10).is_err()
    );
    assert!(parse_trace_csv(
        "flow_id,arrival_s,size_bytes\n1,0,-4\n".as_bytes(),
        p,
        1e10
    )
    .is_err());
    assert!(parse_trace_csv(
        "flow_id,arrival_s,size_bytes\n1,-2,4\n".as_bytes(),
        p,
        1e10
    )
    .is_err());
    let flows = parse_trace_csv(
        "flow_id,arrival_s,size_bytes\n2,5.0,100\n1,1.0,200\n".as_bytes(),
        p,
        1e10,
    )
    .unwrap();
    assert_eq!(flows[0].id, 1);
    assert_eq!(flows[1].id, 2);
}

#[test]
fn compare_pairs_draws_across_policies() {
    let ctx = web_ctx(0.5);
    let cost = crate::analysis::CostModel::from_total(100e-6).unwrap();
    let h = 4.7e6;
    let a = compare_2qplus_vs_srpt(&ctx, &cost, h, 3000, 42).unwrap();
    let b = compare_2qplus_vs_srpt(&ctx, &cost, h, 3000, 42).unwrap();
    assert_eq!(a, b);
    assert!(a.n_first > 0 && a.n_second > 0);
    assert_eq!(a.n_first + a.n_second, 3000);
    // Small flows gain from the bypass queue; everyone else keeps most of it.
    assert!(a.ratio_first < 1.0);
    assert!(a.ratio_second > 0.9);
}

#[test]
fn timeline_shift_preserves_structure() {
    let out = run(&textbook_trace(), &PolicyConfig::srpt_ideal()).unwrap();
    let shifted = out.timeline.shifted(secs(2.5));
    assert_eq!(shifted.segments().len(), out.timeline.segments().len());
    for (a, b) in shifted.segments().iter().zip(out.timeline.segments()) {
        assert_eq!(a.start - b.start, secs(2.5));
        assert_eq!(a.flow, b.flow);
    }
}

#[test]
fn ticks_round_trip() {
    assert_eq!(secs(2.5).picos(), 2_500_000_000_000);
    assert_eq!(secs(100e-6).as_secs(), 100e-6);
    assert_eq!(Ticks::from_secs(0.0), Ticks::ZERO);
    assert_eq!(secs(1.0) + secs(2.0), secs(3.0));
    assert_eq!(secs(3.0) - secs(2.0), secs(1.0));
}

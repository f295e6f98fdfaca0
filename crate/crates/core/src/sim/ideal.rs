//! Reference engines without scheduling delay: non-preemptive FCFS and
//! preemptive shortest-remaining-first.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{Flow, FlowClass, FlowRecord, SchedulerTimeline, SimOutput, Ticks};

fn blank_records(flows: &[Flow]) -> Vec<FlowRecord> {
    flows
        .iter()
        .map(|&flow| FlowRecord {
            flow,
            class: FlowClass::Unclassified,
            first_service: Ticks::ZERO,
            completion: Ticks::ZERO,
        })
        .collect()
}

pub(super) fn run_fcfs(flows: &[Flow]) -> SimOutput {
    let mut records = blank_records(flows);
    let mut timeline = SchedulerTimeline::default();
    let mut clock = Ticks::ZERO;
    for (i, f) in flows.iter().enumerate() {
        let start = clock.max(f.arrival);
        let end = start + f.demand;
        timeline.record(start, end, f.id);
        records[i].first_service = start;
        records[i].completion = end;
        clock = end;
    }
    SimOutput { records, timeline }
}

/// Heap key: remaining service, then arrival, then id; `idx` rides along to
/// address per-flow state.
type Key = Reverse<(i64, Ticks, u64, usize)>;

fn key(rem: i64, f: &Flow, idx: usize) -> Key {
    Reverse((rem, f.arrival, f.id, idx))
}

pub(super) fn run_srpt_ideal(flows: &[Flow]) -> SimOutput {
    let n = flows.len();
    let mut records = blank_records(flows);
    let mut timeline = SchedulerTimeline::default();
    let mut started = vec![false; n];
    let mut heap: BinaryHeap<Key> = BinaryHeap::new();
    let mut next = 0usize;
    let mut now = Ticks::ZERO;

    loop {
        if heap.is_empty() {
            if next == n {
                break;
            }
            now = now.max(flows[next].arrival);
            while next < n && flows[next].arrival == now {
                heap.push(key(flows[next].demand.0, &flows[next], next));
                next += 1;
            }
            continue;
        }
        let &Reverse((rem, _, _, idx)) = heap.peek().unwrap();
        let fin = now + Ticks(rem);
        let horizon = if next < n {
            flows[next].arrival
        } else {
            Ticks(i64::MAX)
        };
        if fin <= horizon {
            timeline.record(now, fin, flows[idx].id);
            if !started[idx] {
                started[idx] = true;
                records[idx].first_service = now;
            }
            records[idx].completion = fin;
            heap.pop();
            now = fin;
        } else {
            if horizon > now {
                timeline.record(now, horizon, flows[idx].id);
                if !started[idx] {
                    started[idx] = true;
                    records[idx].first_service = now;
                }
                heap.pop();
                heap.push(key(rem - (horizon - now).0, &flows[idx], idx));
            }
            now = horizon;
            while next < n && flows[next].arrival == now {
                heap.push(key(flows[next].demand.0, &flows[next], next));
                next += 1;
            }
        }
    }
    SimOutput { records, timeline }
}

//! The delayed scheduling machine: flows routed through the scheduler become
//! eligible only after the round cost, while bypass (first-class) flows run
//! FCFS on arrival and preempt scheduled service.
//!
//! With no threshold this is plain delayed SRPT; the shifted-ideal oracle
//! must match it event for event. The machine re-validates its pick at every
//! boundary instead of shifting a precomputed schedule, so agreement with the
//! oracle is a property of the dynamics, not of shared code.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use super::{Flow, FlowClass, FlowRecord, SchedulerTimeline, SimOutput, Ticks};

type Key = Reverse<(i64, Ticks, u64, usize)>;

fn key(rem: i64, f: &Flow, idx: usize) -> Key {
    Reverse((rem, f.arrival, f.id, idx))
}

pub(super) fn run_pipeline(flows: &[Flow], lag: Ticks, h: Option<f64>) -> SimOutput {
    let n = flows.len();
    let is_first = |f: &Flow| h.is_some_and(|h| f.size < h);

    let mut records: Vec<FlowRecord> = flows
        .iter()
        .map(|&flow| FlowRecord {
            class: match h {
                Some(_) if is_first(&flow) => FlowClass::First,
                Some(_) => FlowClass::Second,
                None => FlowClass::Unclassified,
            },
            flow,
            first_service: Ticks::ZERO,
            completion: Ticks::ZERO,
        })
        .collect();

    // Both streams inherit the input (arrival, id) order; a uniform lag keeps
    // the scheduled stream sorted by eligibility.
    let bypass_stream: Vec<usize> = (0..n).filter(|&i| is_first(&flows[i])).collect();
    let sched_stream: Vec<usize> = (0..n).filter(|&i| !is_first(&flows[i])).collect();
    let eligible_at = |i: usize| flows[i].arrival + lag;

    let mut timeline = SchedulerTimeline::default();
    let mut rem: Vec<i64> = flows.iter().map(|f| f.demand.0).collect();
    let mut started = vec![false; n];
    let mut bypass_q: VecDeque<usize> = VecDeque::new();
    let mut sched_q: BinaryHeap<Key> = BinaryHeap::new();
    let (mut next_b, mut next_s) = (0usize, 0usize);
    let mut now = Ticks::ZERO;

    loop {
        while next_b < bypass_stream.len() && flows[bypass_stream[next_b]].arrival <= now {
            bypass_q.push_back(bypass_stream[next_b]);
            next_b += 1;
        }
        while next_s < sched_stream.len() && eligible_at(sched_stream[next_s]) <= now {
            let i = sched_stream[next_s];
            sched_q.push(key(rem[i], &flows[i], i));
            next_s += 1;
        }

        let from_bypass = !bypass_q.is_empty();
        let current = if from_bypass {
            Some(*bypass_q.front().unwrap())
        } else {
            sched_q.peek().map(|&Reverse((_, _, _, i))| i)
        };

        let next_event = match (
            bypass_stream.get(next_b).map(|&i| flows[i].arrival),
            sched_stream.get(next_s).map(|&i| eligible_at(i)),
        ) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (Some(a), None) => Some(a),
            (None, Some(b)) => Some(b),
            (None, None) => None,
        };

        let Some(idx) = current else {
            match next_event {
                Some(t) => {
                    now = t;
                    continue;
                }
                None => break,
            }
        };

        let fin = now + Ticks(rem[idx]);
        if next_event.is_none_or(|t| fin <= t) {
            timeline.record(now, fin, flows[idx].id);
            if !started[idx] {
                started[idx] = true;
                records[idx].first_service = now;
            }
            records[idx].completion = fin;
            rem[idx] = 0;
            if from_bypass {
                bypass_q.pop_front();
            } else {
                sched_q.pop();
            }
            now = fin;
        } else {
            let t = next_event.unwrap();
            if t > now {
                timeline.record(now, t, flows[idx].id);
                if !started[idx] {
                    started[idx] = true;
                    records[idx].first_service = now;
                }
                rem[idx] -= (t - now).0;
                if !from_bypass {
                    sched_q.pop();
                    sched_q.push(key(rem[idx], &flows[idx], idx));
                }
            }
            now = t;
        }
    }
    SimOutput { records, timeline }
}

//! Deterministic flow-level simulation of the scheduling policies.
//!
//! Time is integer picoseconds, so event ordering, tie breaking, and the
//! shift relation between ideal and delayed schedules are exact rather than
//! float-approximate. Ties at one instant resolve as completion, then
//! arrival, then eligibility; among runnable flows the key is (remaining,
//! arrival, id).

mod ideal;
mod pipeline;

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp};

use crate::analysis::CostModel;
use crate::workload::TrafficContext;
use crate::{Error, Result};

pub const PICOS_PER_SEC: f64 = 1e12;

/// Simulation timestamp or duration in picoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Ticks(pub i64);

impl Ticks {
    pub const ZERO: Ticks = Ticks(0);

    pub fn from_secs(s: f64) -> Self {
        debug_assert!(s.is_finite());
        Ticks((s * PICOS_PER_SEC).round() as i64)
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / PICOS_PER_SEC
    }

    pub fn picos(self) -> i64 {
        self.0
    }
}

impl std::ops::Add for Ticks {
    type Output = Ticks;
    fn add(self, rhs: Ticks) -> Ticks {
        Ticks(self.0 + rhs.0)
    }
}

impl std::ops::Sub for Ticks {
    type Output = Ticks;
    fn sub(self, rhs: Ticks) -> Ticks {
        Ticks(self.0 - rhs.0)
    }
}

impl std::ops::AddAssign for Ticks {
    fn add_assign(&mut self, rhs: Ticks) {
        self.0 += rhs.0;
    }
}

/// One flow offered to the link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flow {
    pub id: u64,
    pub arrival: Ticks,
    /// Bytes; retained for classification and export.
    pub size: f64,
    /// Link time the flow needs.
    pub demand: Ticks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowClass {
    First,
    Second,
    Unclassified,
}

impl fmt::Display for FlowClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::First => "first-class",
            Self::Second => "second-class",
            Self::Unclassified => "unclassified",
        })
    }
}

/// Outcome of one flow under a policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowRecord {
    pub flow: Flow,
    pub class: FlowClass,
    pub first_service: Ticks,
    pub completion: Ticks,
}

impl FlowRecord {
    pub fn fct(&self) -> Ticks {
        self.completion - self.flow.arrival
    }

    pub fn waiting(&self) -> Ticks {
        self.first_service - self.flow.arrival
    }

    pub fn residence(&self) -> Ticks {
        self.completion - self.first_service
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Fcfs,
    SrptIdeal,
    SrptDelayed,
    TwoQPlus,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fcfs => "fcfs",
            Self::SrptIdeal => "srpt-ideal",
            Self::SrptDelayed => "srpt-delayed",
            Self::TwoQPlus => "two-q-plus",
        })
    }
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fcfs" => Ok(Self::Fcfs),
            "srpt-ideal" => Ok(Self::SrptIdeal),
            "srpt-delayed" => Ok(Self::SrptDelayed),
            "two-q-plus" => Ok(Self::TwoQPlus),
            other => Err(Error::InvalidPolicy(format!("unknown policy {other:?}"))),
        }
    }
}

/// Validated policy plus its parameters.
///
/// The scheduling delay enters the machine as an eligibility lag: a scheduled
/// flow may not start service until its arrival plus the whole round cost, and
/// its completion stamps when the last byte leaves. First-class flows in
/// `two-q-plus` bypass the scheduler, so they are eligible on arrival and
/// preempt second-class service.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    policy: Policy,
    lag: Ticks,
    h_threshold: Option<f64>,
}

impl PolicyConfig {
    pub fn new(policy: Policy, cost: Option<&CostModel>, h_threshold: Option<f64>) -> Result<Self> {
        let needs_cost = matches!(policy, Policy::SrptDelayed | Policy::TwoQPlus);
        if needs_cost != cost.is_some() {
            return Err(Error::InvalidPolicy(format!(
                "policy {policy} {} a cost model",
                if needs_cost { "requires" } else { "does not take" }
            )));
        }
        let needs_h = matches!(policy, Policy::TwoQPlus);
        if needs_h != h_threshold.is_some() {
            return Err(Error::InvalidPolicy(format!(
                "policy {policy} {} h_threshold",
                if needs_h { "requires" } else { "does not take" }
            )));
        }
        if let Some(h) = h_threshold {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::InvalidPolicy(format!(
                    "h_threshold must be positive and finite, got {h}"
                )));
            }
        }
        let lag = cost.map_or(Ticks::ZERO, |c| Ticks::from_secs(c.total()));
        Ok(Self {
            policy,
            lag,
            h_threshold,
        })
    }

    pub fn fcfs() -> Self {
        Self::new(Policy::Fcfs, None, None).unwrap()
    }

    pub fn srpt_ideal() -> Self {
        Self::new(Policy::SrptIdeal, None, None).unwrap()
    }

    pub fn srpt_delayed(cost: &CostModel) -> Self {
        Self::new(Policy::SrptDelayed, Some(cost), None).unwrap()
    }

    pub fn two_q_plus(cost: &CostModel, h_threshold: f64) -> Result<Self> {
        Self::new(Policy::TwoQPlus, Some(cost), Some(h_threshold))
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn lag(&self) -> Ticks {
        self.lag
    }

    pub fn h_threshold(&self) -> Option<f64> {
        self.h_threshold
    }
}

/// A service interval; `flow: None` marks the link idle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start: Ticks,
    pub end: Ticks,
    pub flow: Option<u64>,
}

/// Gap-free account of what the link did, idle periods included.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SchedulerTimeline {
    segments: Vec<Segment>,
}

impl SchedulerTimeline {
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Appends a service interval, inserting an idle segment for any gap and
    /// merging contiguous service by the same flow.
    fn record(&mut self, start: Ticks, end: Ticks, flow: u64) {
        debug_assert!(end > start);
        if let Some(last) = self.segments.last_mut() {
            debug_assert!(start >= last.end);
            if start == last.end && last.flow == Some(flow) {
                last.end = end;
                return;
            }
            if start > last.end {
                let gap = Segment {
                    start: last.end,
                    end: start,
                    flow: None,
                };
                self.segments.push(gap);
            }
        }
        self.segments.push(Segment {
            start,
            end,
            flow: Some(flow),
        });
    }

    /// The same timeline displaced by `by`.
    pub fn shifted(&self, by: Ticks) -> Self {
        Self {
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    start: s.start + by,
                    end: s.end + by,
                    flow: s.flow,
                })
                .collect(),
        }
    }

    /// Total service each flow received.
    pub fn busy_per_flow(&self) -> std::collections::HashMap<u64, Ticks> {
        let mut out = std::collections::HashMap::new();
        for s in &self.segments {
            if let Some(id) = s.flow {
                let slot = out.entry(id).or_insert(Ticks::ZERO);
                *slot += s.end - s.start;
            }
        }
        out
    }

    /// Segments are non-empty, non-overlapping, and cover their span without
    /// gaps.
    pub fn is_contiguous(&self) -> bool {
        self.segments.iter().all(|s| s.end > s.start)
            && self.segments.windows(2).all(|w| w[0].end == w[1].start)
    }
}

/// Records plus the link timeline that produced them. Records follow the
/// input flow order.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub records: Vec<FlowRecord>,
    pub timeline: SchedulerTimeline,
}

/// Poisson arrivals with i.i.d. sizes from the context's distribution.
/// The first flow arrives after its own exponential gap.
pub fn generate_flows(ctx: &TrafficContext, n: usize, seed: u64) -> Vec<Flow> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let gaps = Exp::new(ctx.arrival_rate()).expect("arrival rate is positive");
    let mut t = Ticks::ZERO;
    (0..n as u64)
        .map(|id| {
            t += Ticks::from_secs(gaps.sample(&mut rng));
            let size = ctx.dist().sample_size(&mut rng);
            let demand = Ticks(Ticks::from_secs(ctx.service_time(size)).0.max(1));
            Flow {
                id,
                arrival: t,
                size,
                demand,
            }
        })
        .collect()
}

fn validate_flows(flows: &[Flow]) -> Result<()> {
    let mut ids = HashSet::with_capacity(flows.len());
    for (i, f) in flows.iter().enumerate() {
        if f.demand.0 <= 0 || f.size <= 0.0 {
            return Err(Error::InvalidFlows(format!(
                "flow {} has empty size or demand",
                f.id
            )));
        }
        if f.arrival.0 < 0 {
            return Err(Error::InvalidFlows(format!(
                "flow {} arrives before time zero",
                f.id
            )));
        }
        if !ids.insert(f.id) {
            return Err(Error::InvalidFlows(format!("duplicate flow id {}", f.id)));
        }
        if i > 0 {
            let prev = &flows[i - 1];
            if (f.arrival, f.id) <= (prev.arrival, prev.id) {
                return Err(Error::InvalidFlows(format!(
                    "flows not sorted by (arrival, id) at index {i}"
                )));
            }
        }
    }
    Ok(())
}

/// Runs one policy over a sorted trace.
pub fn run(flows: &[Flow], cfg: &PolicyConfig) -> Result<SimOutput> {
    validate_flows(flows)?;
    Ok(match cfg.policy() {
        Policy::Fcfs => ideal::run_fcfs(flows),
        Policy::SrptIdeal => ideal::run_srpt_ideal(flows),
        Policy::SrptDelayed => pipeline::run_pipeline(flows, cfg.lag(), None),
        Policy::TwoQPlus => pipeline::run_pipeline(flows, cfg.lag(), cfg.h_threshold()),
    })
}

/// The ideal-SRPT outcome displaced by the whole scheduling cost: the
/// reference the delayed machine must reproduce exactly.
pub fn shifted_ideal_oracle(flows: &[Flow], cost: &CostModel) -> Result<SimOutput> {
    validate_flows(flows)?;
    let lag = Ticks::from_secs(cost.total());
    let ideal = ideal::run_srpt_ideal(flows);
    Ok(SimOutput {
        records: ideal
            .records
            .into_iter()
            .map(|r| FlowRecord {
                first_service: r.first_service + lag,
                completion: r.completion + lag,
                ..r
            })
            .collect(),
        timeline: ideal.timeline.shifted(lag),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassFilter {
    All,
    First,
    Second,
}

/// Mean flow completion time in seconds over the selected class.
pub fn afct(records: &[FlowRecord], filter: ClassFilter) -> Result<f64> {
    let keep = |r: &&FlowRecord| match filter {
        ClassFilter::All => true,
        ClassFilter::First => r.class == FlowClass::First,
        ClassFilter::Second => r.class == FlowClass::Second,
    };
    mean_fct(records.iter().filter(keep)).ok_or(Error::EmptyFilter)
}

fn mean_fct<'a, I: Iterator<Item = &'a FlowRecord>>(records: I) -> Option<f64> {
    let mut sum: i128 = 0;
    let mut n: u64 = 0;
    for r in records {
        sum += r.fct().0 as i128;
        n += 1;
    }
    (n > 0).then(|| sum as f64 / (n as f64 * PICOS_PER_SEC))
}

/// Per-class AFCT of two-q-plus relative to delayed SRPT on one common trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareOutcome {
    pub ratio_first: f64,
    pub ratio_second: f64,
    pub ratio_all: f64,
    pub n_first: usize,
    pub n_second: usize,
}

/// Generates one trace and plays both policies on it, pairing the random
/// draws so the ratios measure only the policy difference. A class nobody
/// falls into compares equal (ratio 1).
pub fn compare_2qplus_vs_srpt(
    ctx: &TrafficContext,
    cost: &CostModel,
    h: f64,
    n: usize,
    seed: u64,
) -> Result<CompareOutcome> {
    let flows = generate_flows(ctx, n, seed);
    let two_q_cfg = PolicyConfig::two_q_plus(cost, h)?;
    let srpt_cfg = PolicyConfig::srpt_delayed(cost);

    #[cfg(feature = "parallel")]
    let (two_q, srpt) = rayon::join(|| run(&flows, &two_q_cfg), || run(&flows, &srpt_cfg));
    #[cfg(not(feature = "parallel"))]
    let (two_q, srpt) = (run(&flows, &two_q_cfg), run(&flows, &srpt_cfg));
    let (two_q, srpt) = (two_q?, srpt?);

    let first = |r: &&FlowRecord| r.flow.size < h;
    let second = |r: &&FlowRecord| r.flow.size >= h;
    let ratio_of = |num: Option<f64>, den: Option<f64>| match (num, den) {
        (Some(a), Some(b)) => a / b,
        _ => 1.0,
    };
    let n_first = two_q.records.iter().filter(|r| r.flow.size < h).count();
    Ok(CompareOutcome {
        ratio_first: ratio_of(
            mean_fct(two_q.records.iter().filter(first)),
            mean_fct(srpt.records.iter().filter(first)),
        ),
        ratio_second: ratio_of(
            mean_fct(two_q.records.iter().filter(second)),
            mean_fct(srpt.records.iter().filter(second)),
        ),
        ratio_all: ratio_of(
            mean_fct(two_q.records.iter()),
            mean_fct(srpt.records.iter()),
        ),
        n_first,
        n_second: two_q.records.len() - n_first,
    })
}

/// Writes records as
/// `flow_id,arrival_s,size_bytes,class,first_service_s,completion_s,fct_s`.
pub fn write_records_csv<W: Write>(w: &mut W, records: &[FlowRecord]) -> std::io::Result<()> {
    writeln!(
        w,
        "flow_id,arrival_s,size_bytes,class,first_service_s,completion_s,fct_s"
    )?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.flow.id,
            r.flow.arrival.as_secs(),
            r.flow.size,
            r.class,
            r.first_service.as_secs(),
            r.completion.as_secs(),
            r.fct().as_secs()
        )?;
    }
    Ok(())
}

/// Reads flows back from the first three columns of a records CSV (or a bare
/// `flow_id,arrival_s,size_bytes` trace), recomputing demands for the given
/// link rate. Rows are sorted into simulation order.
pub fn read_trace_csv(path: &Path, link_rate: f64) -> Result<Vec<Flow>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_trace_csv(BufReader::new(file), path, link_rate)
}

/// Reader-based form of [`read_trace_csv`]; `origin` labels error messages.
pub fn parse_trace_csv<R: BufRead>(reader: R, origin: &Path, link_rate: f64) -> Result<Vec<Flow>> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    if !(link_rate.is_finite() && link_rate > 0.0) {
        return Err(Error::InvalidParameter {
            name: "link_rate",
            value: link_rate,
            reason: "must be positive and finite",
        });
    }
    let mut flows = Vec::new();
    let mut saw_header = false;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|source| Error::Io {
            path: origin.to_path_buf(),
            source,
        })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if !(line == "flow_id,arrival_s,size_bytes"
                || line.starts_with("flow_id,arrival_s,size_bytes,"))
            {
                return Err(err(
                    lineno,
                    format!("expected a flow_id,arrival_s,size_bytes header, got {line:?}"),
                ));
            }
            saw_header = true;
            continue;
        }
        let mut parts = line.split(',');
        let (sid, sa, sx) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => return Err(err(lineno, "expected at least three fields".into())),
        };
        let id: u64 = sid
            .trim()
            .parse()
            .map_err(|e| err(lineno, format!("bad flow_id {sid:?}: {e}")))?;
        let arrival_s: f64 = sa
            .trim()
            .parse()
            .map_err(|e| err(lineno, format!("bad arrival_s {sa:?}: {e}")))?;
        let size: f64 = sx
            .trim()
            .parse()
            .map_err(|e| err(lineno, format!("bad size_bytes {sx:?}: {e}")))?;
        if !(arrival_s.is_finite() && arrival_s >= 0.0) {
            return Err(err(lineno, format!("arrival_s {arrival_s} must be nonnegative")));
        }
        if !(size.is_finite() && size > 0.0) {
            return Err(err(lineno, format!("size_bytes {size} must be positive")));
        }
        let demand = Ticks(Ticks::from_secs(8.0 * size / link_rate).0.max(1));
        flows.push(Flow {
            id,
            arrival: Ticks::from_secs(arrival_s),
            size,
            demand,
        });
    }
    if !saw_header {
        return Err(err(1, "missing flow_id,arrival_s,size_bytes header".into()));
    }
    flows.sort_by_key(|f| (f.arrival, f.id));
    Ok(flows)
}

#[cfg(test)]
mod tests;

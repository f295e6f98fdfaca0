//! Mean-value formulas for the M/G/1 link under preemptive
//! shortest-remaining-first (SRPT) and FCFS service.
//!
//! Completion time decomposes into waiting (arrival until first service) and
//! residence (first service until the last byte leaves). A fixed scheduling
//! delay shifts the waiting of every scheduled flow by the full round cost and
//! leaves residence untouched, so delayed-SRPT means are the ideal-SRPT means
//! plus the cost total. The class-1 helpers restrict the averages to flows
//! below a size threshold, which is what the threshold solvers search over.

use crate::numeric::{self, QuadratureConfig};
use crate::workload::TrafficContext;
use crate::{Error, Result};

/// Fixed per-flow scheduling delay, split into the phases before service
/// (gather, compute) and after the last byte is sent (respond).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    t_gather: f64,
    t_compute: f64,
    t_respond: f64,
}

impl CostModel {
    pub fn new(t_gather: f64, t_compute: f64, t_respond: f64) -> Result<Self> {
        for (name, v) in [
            ("t_gather", t_gather),
            ("t_compute", t_compute),
            ("t_respond", t_respond),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "delays must be nonnegative and finite",
                });
            }
        }
        Ok(Self {
            t_gather,
            t_compute,
            t_respond,
        })
    }

    pub fn zero() -> Self {
        Self {
            t_gather: 0.0,
            t_compute: 0.0,
            t_respond: 0.0,
        }
    }

    /// Puts the whole budget into the pre-service phase.
    pub fn from_total(total: f64) -> Result<Self> {
        Self::new(total, 0.0, 0.0)
    }

    pub fn t_gather(&self) -> f64 {
        self.t_gather
    }

    pub fn t_compute(&self) -> f64 {
        self.t_compute
    }

    pub fn t_respond(&self) -> f64 {
        self.t_respond
    }

    /// Delay between arrival and eligibility for service.
    pub fn dispatch_lag(&self) -> f64 {
        self.t_gather + self.t_compute
    }

    /// Delay between the last byte leaving and the flow counting as done.
    pub fn respond_lag(&self) -> f64 {
        self.t_respond
    }

    pub fn total(&self) -> f64 {
        self.dispatch_lag() + self.respond_lag()
    }
}

/// Mean waiting, residence, and their sum for one policy and flow size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanValue {
    pub waiting: f64,
    pub residence: f64,
    pub completion: f64,
}

impl MeanValue {
    pub fn new(waiting: f64, residence: f64) -> Self {
        Self {
            waiting,
            residence,
            completion: waiting + residence,
        }
    }
}

fn check_size(ctx: &TrafficContext, name: &'static str, x: f64) -> Result<()> {
    let (lo, hi) = (ctx.dist().min_size(), ctx.dist().max_size());
    if !(x >= lo && x <= hi) {
        return Err(Error::OutOfRange {
            name,
            value: x,
            lo,
            hi,
        });
    }
    Ok(())
}

/// Mean waiting of a size-`x` flow under ideal SRPT.
pub fn srpt_ideal_wait(ctx: &TrafficContext, x: f64) -> Result<f64> {
    check_size(ctx, "x", x)?;
    let lam = ctx.arrival_rate();
    let tx = ctx.service_time(x);
    let tail = 1.0 - ctx.dist().cdf(x);
    let denom = 1.0 - ctx.partial_load(x);
    Ok(lam * (ctx.m2_service(x) + tx * tx * tail) / (2.0 * denom * denom))
}

fn residence_breaks(ctx: &TrafficContext) -> Vec<f64> {
    ctx.dist()
        .density_breaks()
        .into_iter()
        .map(|x| ctx.service_time(x))
        .collect()
}

/// Mean residence of a size-`x` flow under SRPT, by direct quadrature of the
/// slowdown integral.
pub fn srpt_ideal_residence(ctx: &TrafficContext, x: f64, quad: &QuadratureConfig) -> Result<f64> {
    check_size(ctx, "x", x)?;
    let tk = ctx.min_service_time();
    let tx = ctx.service_time(x);
    if tx <= tk {
        return Ok(tx);
    }
    let breaks = residence_breaks(ctx);
    let inner = numeric::integrate_with_breaks(
        |s| 1.0 / (1.0 - ctx.partial_load(ctx.size_for_service(s))),
        tk,
        tx,
        &breaks,
        quad,
    )?;
    Ok(tk + inner)
}

/// Mean waiting, residence, and completion of a size-`x` flow under SRPT with
/// scheduling delay `cost`.
pub fn srpt_completion(
    ctx: &TrafficContext,
    x: f64,
    cost: &CostModel,
    quad: &QuadratureConfig,
) -> Result<MeanValue> {
    let wait = srpt_ideal_wait(ctx, x)? + cost.total();
    let res = srpt_ideal_residence(ctx, x, quad)?;
    Ok(MeanValue::new(wait, res))
}

/// Mean waiting, residence, and completion under FCFS, averaged over all
/// flows.
pub fn fcfs_mean(ctx: &TrafficContext) -> MeanValue {
    let hi = ctx.dist().max_size();
    let lam = ctx.arrival_rate();
    let waiting = lam * ctx.m2_service(hi) / (2.0 * (1.0 - ctx.load()));
    MeanValue::new(waiting, ctx.mean_service_time())
}

/// Mean completion of a size-`x` flow under FCFS.
pub fn fcfs_completion_for_size(ctx: &TrafficContext, x: f64) -> Result<f64> {
    check_size(ctx, "x", x)?;
    Ok(fcfs_mean(ctx).waiting + ctx.service_time(x))
}

/// Mean waiting of flows below `h` when only they share an FCFS queue.
pub fn class1_fcfs_wait(ctx: &TrafficContext, h: f64) -> Result<f64> {
    check_size(ctx, "h", h)?;
    let lam = ctx.arrival_rate();
    Ok(lam * ctx.m2_service(h) / (2.0 * (1.0 - ctx.partial_load(h))))
}

/// Mean waiting, residence, and completion of flows below `h` in their own
/// FCFS queue. Errors when no mass lies below `h`.
pub fn class1_fcfs_completion(ctx: &TrafficContext, h: f64) -> Result<MeanValue> {
    let waiting = class1_fcfs_wait(ctx, h)?;
    let mass = ctx.dist().cdf(h);
    if mass <= 0.0 {
        return Err(Error::EmptyClass(h));
    }
    Ok(MeanValue::new(waiting, ctx.m1_service(h) / mass))
}

/// SRPT mean values with a precomputed residence table.
///
/// Building the table integrates the slowdown `1 / (1 - partial_load)` once
/// over a log-spaced grid of service times; every later residence query only
/// pays for the remainder inside one grid panel. Sweeps and the class-1
/// completion integral query residence thousands of times, so this is the hot
/// path; [`srpt_ideal_residence`] stays available as the direct route for
/// cross-checking.
#[derive(Debug)]
pub struct SrptAnalysis<'a> {
    ctx: &'a TrafficContext,
    quad: QuadratureConfig,
    nodes: Vec<f64>,
    prefix: Vec<f64>,
}

impl<'a> SrptAnalysis<'a> {
    pub fn new(ctx: &'a TrafficContext, quad: QuadratureConfig) -> Result<Self> {
        let tk = ctx.min_service_time();
        let tp = ctx.max_service_time();
        let decades = (tp / tk).log10();
        let n = ((decades * 32.0).ceil() as usize).clamp(128, 2048);
        let mut nodes = numeric::log_grid(tk, tp, n + 1);
        let breaks = residence_breaks(ctx);
        if !breaks.is_empty() {
            nodes.extend(breaks.iter().copied().filter(|s| *s > tk && *s < tp));
            nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
            nodes.dedup();
        }
        let slowdown = |s: f64| 1.0 / (1.0 - ctx.partial_load(ctx.size_for_service(s)));
        let mut prefix = Vec::with_capacity(nodes.len());
        prefix.push(0.0);
        for w in nodes.windows(2) {
            let piece = numeric::integrate(&slowdown, w[0], w[1], &quad)?;
            prefix.push(prefix.last().unwrap() + piece);
        }
        Ok(Self {
            ctx,
            quad,
            nodes,
            prefix,
        })
    }

    pub fn ctx(&self) -> &TrafficContext {
        self.ctx
    }

    pub fn wait(&self, x: f64) -> Result<f64> {
        srpt_ideal_wait(self.ctx, x)
    }

    /// Table-assisted residence; agrees with [`srpt_ideal_residence`] to the
    /// quadrature tolerance.
    pub fn residence(&self, x: f64) -> Result<f64> {
        check_size(self.ctx, "x", x)?;
        let tk = self.nodes[0];
        let t = self.ctx.service_time(x);
        if t <= tk {
            return Ok(t);
        }
        let j = self.nodes.partition_point(|&s| s <= t) - 1;
        let slowdown =
            |s: f64| 1.0 / (1.0 - self.ctx.partial_load(self.ctx.size_for_service(s)));
        let rest = numeric::integrate(slowdown, self.nodes[j], t, &self.quad)?;
        Ok(tk + self.prefix[j] + rest)
    }

    pub fn completion(&self, x: f64, cost: &CostModel) -> Result<MeanValue> {
        let wait = self.wait(x)? + cost.total();
        let res = self.residence(x)?;
        Ok(MeanValue::new(wait, res))
    }

    /// Unnormalized integral of ideal completion against the size density up
    /// to `upper`.
    fn completion_mass(&self, upper: f64) -> Result<f64> {
        self.completion_mass_between(self.ctx.dist().min_size(), upper)
    }

    /// Same integral restricted to `[lo, upper]`, so scans can accumulate it
    /// panel by panel.
    pub(crate) fn completion_mass_between(&self, lo: f64, upper: f64) -> Result<f64> {
        let d = self.ctx.dist();
        let breaks: Vec<f64> = d
            .density_breaks()
            .into_iter()
            .filter(|x| *x > lo && *x < upper)
            .collect();
        let err = std::cell::RefCell::new(None);
        let note = |e: crate::Error| {
            err.borrow_mut().get_or_insert(e);
            0.0
        };
        let mass = numeric::integrate_with_breaks(
            |x| {
                let w = match self.wait(x) {
                    Ok(w) => w,
                    Err(e) => return note(e),
                };
                let r = match self.residence(x) {
                    Ok(r) => r,
                    Err(e) => return note(e),
                };
                (w + r) * d.pdf(x)
            },
            lo,
            upper,
            &breaks,
            &self.quad,
        );
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        mass
    }

    /// Mean completion over all flows under SRPT with scheduling delay.
    pub fn mean_completion(&self, cost: &CostModel) -> Result<f64> {
        let upper = self.ctx.dist().max_size();
        Ok(self.completion_mass(upper)? + cost.total())
    }

    /// Mean completion of flows below `h` under SRPT with scheduling delay.
    pub fn class1_completion(&self, h: f64, cost: &CostModel) -> Result<f64> {
        check_size(self.ctx, "h", h)?;
        let mass = self.ctx.dist().cdf(h);
        if mass <= 0.0 {
            return Err(Error::EmptyClass(h));
        }
        Ok(self.completion_mass(h)? / mass + cost.total())
    }

    /// Class-1 mean completion under a dedicated FCFS queue relative to
    /// staying in the delayed-SRPT queue. Below 1, the FCFS split wins.
    pub fn completion_ratio(&self, h: f64, cost: &CostModel) -> Result<f64> {
        let fcfs = class1_fcfs_completion(self.ctx, h)?;
        Ok(fcfs.completion / self.class1_completion(h, cost)?)
    }
}

/// Mean completion over all flows under SRPT with scheduling delay `cost`.
pub fn srpt_mean(ctx: &TrafficContext, cost: &CostModel, quad: &QuadratureConfig) -> Result<f64> {
    SrptAnalysis::new(ctx, *quad)?.mean_completion(cost)
}

/// One-shot form of [`SrptAnalysis::class1_completion`].
pub fn class1_srpt_completion(
    ctx: &TrafficContext,
    h: f64,
    cost: &CostModel,
    quad: &QuadratureConfig,
) -> Result<f64> {
    SrptAnalysis::new(ctx, *quad)?.class1_completion(h, cost)
}

/// One-shot form of [`SrptAnalysis::completion_ratio`].
pub fn completion_ratio(
    ctx: &TrafficContext,
    h: f64,
    cost: &CostModel,
    quad: &QuadratureConfig,
) -> Result<f64> {
    SrptAnalysis::new(ctx, *quad)?.completion_ratio(h, cost)
}

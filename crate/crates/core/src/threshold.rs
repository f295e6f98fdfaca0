//! Solvers for the two-class size threshold and parameter sweeps around them.
//!
//! Flows below the threshold bypass the scheduler into a plain FCFS queue;
//! everything else pays the scheduling delay and is served
//! shortest-remaining-first. Two criteria pick the threshold:
//!
//! * `sufficient-wait`: the largest H whose class-1 FCFS waiting stays within
//!   the scheduling delay. Below that point the bypass queue can only help,
//!   so this is a conservative guarantee.
//! * `exact-ratio`: the largest H at which the class-1 FCFS completion mean
//!   still matches delayed-SRPT, found by scanning the completion ratio for
//!   its last upward crossing of 1 and bisecting the bracket.

use std::fmt;
use std::io::Write;

use crate::analysis::{self, CostModel, SrptAnalysis};
use crate::numeric::{self, QuadratureConfig};
use crate::workload::{SizeDistribution, TrafficContext};
use crate::{Error, Result};

const SCAN_PANELS: usize = 256;
const REFINE_REL_WIDTH: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdCriterion {
    /// Class-1 FCFS waiting bounded by the scheduling delay.
    SufficientWait,
    /// Completion ratio pinned to 1.
    ExactRatio,
}

impl fmt::Display for ThresholdCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SufficientWait => "sufficient-wait",
            Self::ExactRatio => "exact-ratio",
        })
    }
}

impl std::str::FromStr for ThresholdCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sufficient-wait" | "sufficient" => Ok(Self::SufficientWait),
            "exact-ratio" | "exact" => Ok(Self::ExactRatio),
            other => Err(Error::InvalidSweep(format!(
                "unknown criterion {other:?} (expected sufficient-wait or exact-ratio)"
            ))),
        }
    }
}

/// A solved threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult {
    /// Threshold size in bytes.
    pub h: f64,
    /// Fraction of flows below the threshold.
    pub coverage: f64,
    pub criterion: ThresholdCriterion,
    /// The criterion holds all the way to the largest size.
    pub saturated: bool,
    /// Scan resolution behind an exact-ratio solve.
    pub scan_points: Option<u32>,
}

/// Largest threshold whose class-1 FCFS waiting stays within the total
/// scheduling delay.
pub fn sufficient_threshold(ctx: &TrafficContext, cost: &CostModel) -> Result<ThresholdResult> {
    let d = ctx.dist();
    let (k, p) = (d.min_size(), d.max_size());
    let target = cost.total();
    let done = |h: f64, saturated: bool| ThresholdResult {
        h,
        coverage: d.cdf(h),
        criterion: ThresholdCriterion::SufficientWait,
        saturated,
        scan_points: None,
    };
    if target <= 0.0 {
        return Ok(done(k, false));
    }
    if analysis::class1_fcfs_wait(ctx, p)? <= target {
        return Ok(done(p, true));
    }
    let h = numeric::bisect(
        |h| analysis::class1_fcfs_wait(ctx, h).unwrap_or(f64::INFINITY) - target,
        k,
        p,
        1e-12,
        200,
    )?;
    Ok(done(h, false))
}

/// Largest threshold at which bypassing still does not hurt the class-1 mean,
/// located on the completion ratio itself.
pub fn exact_hmax(
    ctx: &TrafficContext,
    cost: &CostModel,
    quad: &QuadratureConfig,
) -> Result<ThresholdResult> {
    let a = SrptAnalysis::new(ctx, *quad)?;
    let d = ctx.dist();
    let (k, p) = (d.min_size(), d.max_size());
    let grid = numeric::log_grid(k, p, SCAN_PANELS + 1);

    // Cumulative completion mass along the grid; each ratio then costs only
    // closed forms plus one narrow remainder integral.
    let mut mass = vec![0.0; grid.len()];
    for i in 1..grid.len() {
        mass[i] = mass[i - 1] + a.completion_mass_between(grid[i - 1], grid[i])?;
    }

    let total = cost.total();
    let ratio_from = |base_mass: f64, base_x: f64, h: f64| -> Result<f64> {
        let class_mass = d.cdf(h);
        let srpt = (base_mass + a.completion_mass_between(base_x, h)?) / class_mass + total;
        let fcfs = analysis::class1_fcfs_completion(ctx, h)?.completion;
        Ok(fcfs / srpt)
    };

    let mut ratios = vec![f64::NAN; grid.len()];
    for i in 1..grid.len() {
        ratios[i] = analysis::class1_fcfs_completion(ctx, grid[i])?.completion
            / (mass[i] / d.cdf(grid[i]) + total);
    }

    let done = |h: f64, saturated: bool| ThresholdResult {
        h,
        coverage: d.cdf(h),
        criterion: ThresholdCriterion::ExactRatio,
        saturated,
        scan_points: Some(SCAN_PANELS as u32),
    };

    if ratios[grid.len() - 1] <= 1.0 {
        return Ok(done(p, true));
    }
    let mut bracket = None;
    for i in 1..grid.len() - 1 {
        if ratios[i] <= 1.0 && ratios[i + 1] > 1.0 {
            bracket = Some(i);
        }
    }
    let Some(i) = bracket else {
        return Ok(done(k, false));
    };
    let h = numeric::bisect(
        |h| ratio_from(mass[i], grid[i], h).map(|r| r - 1.0).unwrap_or(f64::INFINITY),
        grid[i],
        grid[i + 1],
        REFINE_REL_WIDTH,
        80,
    )?;
    Ok(done(h, false))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Load,
    TCost,
    Alpha,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Load => "load",
            Self::TCost => "tcost",
            Self::Alpha => "alpha",
        })
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "load" => Ok(Self::Load),
            "tcost" => Ok(Self::TCost),
            "alpha" => Ok(Self::Alpha),
            other => Err(Error::InvalidSweep(format!(
                "unknown axis {other:?} (expected load, tcost, or alpha)"
            ))),
        }
    }
}

/// Workload family a sweep runs over. Alpha sweeps need the analytic form.
#[derive(Debug, Clone)]
pub enum WorkloadSpec {
    BoundedPareto { k: f64, p: f64, alpha: f64 },
    Empirical(SizeDistribution),
}

impl WorkloadSpec {
    pub fn build(&self) -> Result<SizeDistribution> {
        match self {
            Self::BoundedPareto { k, p, alpha } => SizeDistribution::bounded_pareto(*k, *p, *alpha),
            Self::Empirical(d) => Ok(d.clone()),
        }
    }

    fn build_with_alpha(&self, alpha: f64) -> Result<SizeDistribution> {
        match self {
            Self::BoundedPareto { k, p, .. } => SizeDistribution::bounded_pareto(*k, *p, alpha),
            Self::Empirical(_) => Err(Error::InvalidSweep(
                "alpha axis requires an analytic workload".into(),
            )),
        }
    }
}

/// One-dimensional threshold sweep: vary an axis, hold the rest fixed.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub workload: WorkloadSpec,
    pub link_rate: f64,
    pub load: f64,
    pub cost: CostModel,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn new(
        workload: WorkloadSpec,
        link_rate: f64,
        load: f64,
        cost: CostModel,
        axis: SweepAxis,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSweep("axis values must be non-empty".into()));
        }
        for &v in &values {
            let ok = match axis {
                SweepAxis::Load => v > 0.0 && v < 1.0,
                SweepAxis::TCost => v >= 0.0 && v.is_finite(),
                SweepAxis::Alpha => v > 0.0 && v < 1.0,
            };
            if !ok {
                return Err(Error::InvalidSweep(format!(
                    "value {v} out of range for {axis} axis"
                )));
            }
        }
        Ok(Self {
            workload,
            link_rate,
            load,
            cost,
            axis,
            values,
        })
    }
}

/// Outcome of one sweep point; failures are carried, not fatal.
#[derive(Debug)]
pub struct SweepRow {
    pub axis_value: f64,
    pub outcome: Result<ThresholdResult>,
}

fn sweep_row(
    spec: &SweepSpec,
    criterion: ThresholdCriterion,
    quad: &QuadratureConfig,
    value: f64,
) -> SweepRow {
    let outcome = (|| {
        let (dist, load, cost) = match spec.axis {
            SweepAxis::Load => (spec.workload.build()?, value, spec.cost),
            SweepAxis::TCost => (spec.workload.build()?, spec.load, CostModel::from_total(value)?),
            SweepAxis::Alpha => (spec.workload.build_with_alpha(value)?, spec.load, spec.cost),
        };
        let ctx = TrafficContext::new(dist, spec.link_rate, load)?;
        match criterion {
            ThresholdCriterion::SufficientWait => sufficient_threshold(&ctx, &cost),
            ThresholdCriterion::ExactRatio => exact_hmax(&ctx, &cost, quad),
        }
    })();
    SweepRow {
        axis_value: value,
        outcome,
    }
}

/// Solves every point of the sweep, in parallel when the `parallel` feature
/// is enabled. Row order always follows `spec.values`.
pub fn run_sweep(
    spec: &SweepSpec,
    criterion: ThresholdCriterion,
    quad: &QuadratureConfig,
) -> Vec<SweepRow> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        spec.values
            .par_iter()
            .map(|&v| sweep_row(spec, criterion, quad, v))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_sweep_sequential(spec, criterion, quad)
    }
}

/// Single-threaded fallback with identical results.
pub fn run_sweep_sequential(
    spec: &SweepSpec,
    criterion: ThresholdCriterion,
    quad: &QuadratureConfig,
) -> Vec<SweepRow> {
    spec.values
        .iter()
        .map(|&v| sweep_row(spec, criterion, quad, v))
        .collect()
}

/// Writes solved rows as `axis_value,h_bytes,coverage,criterion,saturated`.
/// Failed rows are skipped; the caller decides how loudly to fail.
pub fn write_sweep_csv<W: Write>(w: &mut W, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(w, "axis_value,h_bytes,coverage,criterion,saturated")?;
    for row in rows {
        if let Ok(r) = &row.outcome {
            writeln!(
                w,
                "{},{},{},{},{}",
                row.axis_value, r.h, r.coverage, r.criterion, r.saturated
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::presets;
    use approx::assert_relative_eq;

    fn quad() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn ctx(name: &str, load: f64) -> TrafficContext {
        let d = match name {
            "web" => presets::websearch_bp(),
            "data" => presets::datamining_bp(),
            _ => unreachable!(),
        };
        TrafficContext::new(d, 1e10, load).unwrap()
    }

    fn cost_us(us: f64) -> CostModel {
        CostModel::from_total(us * 1e-6).unwrap()
    }

    // Frozen from a 30-digit bisection of the class-1 FCFS wait.
    const SUFFICIENT_REFERENCE: &[(&str, f64, f64, f64)] = &[
        ("web", 0.1, 11_535_266.290_6, 0.942_785_9),
        ("web", 0.5, 4_730_875.336_86, 0.881_267_32),
        ("web", 0.9, 3_385_709.949_32, 0.856_348_91),
        ("data", 0.1, 51_301_247.832_3, 0.982_209_43),
        ("data", 0.5, 20_141_187.940_6, 0.973_054_55),
        ("data", 0.9, 14_271_954.947_6, 0.969_079_64),
    ];

    #[test]
    fn sufficient_matches_reference() {
        for &(name, load, want_h, want_cov) in SUFFICIENT_REFERENCE {
            let c = ctx(name, load);
            let r = sufficient_threshold(&c, &cost_us(100.0)).unwrap();
            assert_relative_eq!(r.h, want_h, max_relative = 1e-9);
            assert_relative_eq!(r.coverage, want_cov, max_relative = 1e-7);
            assert!(!r.saturated);
            assert_eq!(r.criterion, ThresholdCriterion::SufficientWait);
            assert_relative_eq!(
                analysis::class1_fcfs_wait(&c, r.h).unwrap(),
                100e-6,
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn sufficient_cost_axis_spot_values() {
        let c = ctx("web", 0.5);
        let r = sufficient_threshold(&c, &cost_us(2.4)).unwrap();
        assert_relative_eq!(r.h, 678_518.495_325, max_relative = 1e-9);
        let r = sufficient_threshold(&c, &cost_us(1000.0)).unwrap();
        assert_relative_eq!(r.h, 14_458_229.046_3, max_relative = 1e-9);
    }

    #[test]
    fn sufficient_saturates_for_huge_cost() {
        let c = ctx("web", 0.5);
        let r = sufficient_threshold(&c, &CostModel::from_total(10.0).unwrap()).unwrap();
        assert!(r.saturated);
        assert_eq!(r.h, c.dist().max_size());
        assert_eq!(r.coverage, 1.0);
    }

    #[test]
    fn sufficient_degenerates_at_zero_cost() {
        let c = ctx("web", 0.5);
        let r = sufficient_threshold(&c, &CostModel::zero()).unwrap();
        assert_eq!(r.h, c.dist().min_size());
        assert_eq!(r.coverage, 0.0);
        assert!(!r.saturated);
    }

    #[test]
    fn exact_sits_on_unit_ratio() {
        for (name, load) in [("web", 0.1), ("web", 0.5), ("web", 0.9), ("data", 0.5)] {
            let c = ctx(name, load);
            let r = exact_hmax(&c, &cost_us(100.0), &quad()).unwrap();
            assert!(!r.saturated);
            assert_eq!(r.scan_points, Some(256));
            let ratio = analysis::completion_ratio(&c, r.h, &cost_us(100.0), &quad()).unwrap();
            assert_relative_eq!(ratio, 1.0, max_relative = 1e-3);
        }
    }

    #[test]
    fn exact_dominates_sufficient() {
        for (name, load) in [("web", 0.1), ("web", 0.9), ("data", 0.5)] {
            let c = ctx(name, load);
            let s = sufficient_threshold(&c, &cost_us(100.0)).unwrap();
            let e = exact_hmax(&c, &cost_us(100.0), &quad()).unwrap();
            assert!(
                e.h >= s.h,
                "{name} load {load}: exact {} below sufficient {}",
                e.h,
                s.h
            );
        }
    }

    #[test]
    fn thresholds_shrink_with_load_and_grow_with_cost() {
        let mut prev = f64::INFINITY;
        for load in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let h = sufficient_threshold(&ctx("data", load), &cost_us(100.0))
                .unwrap()
                .h;
            assert!(h < prev);
            prev = h;
        }
        let c = ctx("data", 0.5);
        let mut prev = 0.0;
        for us in [2.4, 20.0, 100.0, 1000.0] {
            let h = sufficient_threshold(&c, &cost_us(us)).unwrap().h;
            assert!(h > prev);
            prev = h;
        }
    }

    fn web_spec(axis: SweepAxis, values: Vec<f64>) -> SweepSpec {
        SweepSpec::new(
            WorkloadSpec::BoundedPareto {
                k: 3.0e3,
                p: 29.2e6,
                alpha: 0.125,
            },
            1e10,
            0.5,
            cost_us(100.0),
            axis,
            values,
        )
        .unwrap()
    }

    #[test]
    fn sweep_solves_every_row_in_order() {
        let values = vec![0.1, 0.3, 0.5, 0.7, 0.9];
        let spec = web_spec(SweepAxis::Load, values.clone());
        let rows = run_sweep(&spec, ThresholdCriterion::SufficientWait, &quad());
        assert_eq!(rows.len(), values.len());
        for (row, v) in rows.iter().zip(&values) {
            assert_eq!(row.axis_value, *v);
            assert!(row.outcome.is_ok());
        }
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let spec = web_spec(SweepAxis::TCost, vec![2.4e-6, 50e-6, 100e-6, 1e-3]);
        let par = run_sweep(&spec, ThresholdCriterion::ExactRatio, &quad());
        let seq = run_sweep_sequential(&spec, ThresholdCriterion::ExactRatio, &quad());
        for (a, b) in par.iter().zip(&seq) {
            let (ra, rb) = (a.outcome.as_ref().unwrap(), b.outcome.as_ref().unwrap());
            assert_eq!(ra.h.to_bits(), rb.h.to_bits());
            assert_eq!(ra.coverage.to_bits(), rb.coverage.to_bits());
        }
    }

    #[test]
    fn sweep_validation_rejects_bad_values() {
        assert!(SweepSpec::new(
            WorkloadSpec::BoundedPareto {
                k: 3.0e3,
                p: 29.2e6,
                alpha: 0.125
            },
            1e10,
            0.5,
            cost_us(100.0),
            SweepAxis::Load,
            vec![0.5, 1.2],
        )
        .is_err());
        assert!(web_spec(SweepAxis::Alpha, vec![0.5]).workload.build().is_ok());
    }

    #[test]
    fn sweep_carries_row_failures() {
        let emp = SizeDistribution::empirical_from_points(vec![
            (1e3, 0.0),
            (1e5, 0.7),
            (1e7, 1.0),
        ])
        .unwrap();
        let spec = SweepSpec::new(
            WorkloadSpec::Empirical(emp),
            1e10,
            0.5,
            cost_us(100.0),
            SweepAxis::Alpha,
            vec![0.2, 0.4],
        )
        .unwrap();
        let rows = run_sweep(&spec, ThresholdCriterion::SufficientWait, &quad());
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.outcome.is_err()));
    }

    #[test]
    fn csv_writer_emits_solved_rows() {
        let spec = web_spec(SweepAxis::Load, vec![0.5]);
        let rows = run_sweep(&spec, ThresholdCriterion::SufficientWait, &quad());
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("axis_value,h_bytes,coverage,criterion,saturated")
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("0.5,"), "{row}");
        assert!(row.contains("sufficient-wait"));
        assert!(row.ends_with(",false"));
    }
}

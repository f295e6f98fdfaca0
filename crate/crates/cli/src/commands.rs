use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use flowsched::analysis::{self, CostModel};
use flowsched::numeric::{self, QuadratureConfig};
use flowsched::sim::{self, ClassFilter, Policy, PolicyConfig};
use flowsched::threshold::{
    self, SweepAxis, SweepRow, SweepSpec, ThresholdCriterion, WorkloadSpec,
};
use flowsched::workload::{presets, TrafficContext};

use crate::config::Settings;

const LOAD_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
const COST_GRID_S: [f64; 6] = [2.4e-6, 20e-6, 50e-6, 100e-6, 200e-6, 1000e-6];
const WEB_ALPHA_GRID: [f64; 5] = [0.01, 0.125, 0.3, 0.6, 0.9];
const DATA_ALPHA_GRID: [f64; 5] = [0.01, 0.1, 0.26, 0.6, 0.9];
const GRID_LOAD: f64 = 0.5;
const GRID_TCOST: f64 = 100e-6;

/// Size grid resolution of `analyze` output.
const ANALYZE_ROWS: usize = 200;

/// Simulated threshold scan: points per load, geometric span around the
/// analytic solution.
const SCAN_POINTS: usize = 13;
const SCAN_LO: f64 = 0.6;
const SCAN_HI: f64 = 2.0;

pub fn analyze(s: &Settings) -> Result<()> {
    let ctx = s.ctx()?;
    s.prepare_out()?;
    let quad = QuadratureConfig::default();
    let path = s.out.join("analyze.csv");
    let mut w = csv_writer(&path)?;
    writeln!(
        w,
        "x_bytes,srpt_wait_s,srpt_residence_s,srpt_completion_s,fcfs_completion_s"
    )?;
    let grid = numeric::log_grid(ctx.dist().min_size(), ctx.dist().max_size(), ANALYZE_ROWS);
    for x in grid {
        let srpt = analysis::srpt_completion(&ctx, x, &s.cost, &quad)?;
        let fcfs = analysis::fcfs_completion_for_size(&ctx, x)?;
        writeln!(
            w,
            "{x},{},{},{},{fcfs}",
            srpt.waiting, srpt.residence, srpt.completion
        )?;
    }
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn threshold(s: &Settings) -> Result<()> {
    let values = s.axis_values();
    let spec = SweepSpec::new(
        s.workload.sweep_workload()?,
        s.link_rate,
        s.load,
        s.cost,
        s.axis,
        values.clone(),
    )?;
    let mut effective = s.clone();
    effective.values = Some(values);
    effective.prepare_out()?;

    let rows = threshold::run_sweep(&spec, s.criterion, &QuadratureConfig::default());
    let path = s.out.join("threshold.csv");
    let mut w = csv_writer(&path)?;
    threshold::write_sweep_csv(&mut w, &rows)?;
    w.flush()?;
    println!("wrote {}", path.display());

    let failed = report_row_errors(&rows, s.axis);
    if failed > 0 {
        bail!("{failed} of {} sweep rows failed", rows.len());
    }
    Ok(())
}

pub fn simulate(s: &Settings) -> Result<()> {
    let ctx = s.ctx()?;
    s.prepare_out()?;
    let flows = match &s.trace {
        Some(path) => sim::read_trace_csv(path, s.link_rate)?,
        None => sim::generate_flows(&ctx, s.n, s.seed),
    };
    let needs_cost = matches!(s.policy, Policy::SrptDelayed | Policy::TwoQPlus);
    let h = matches!(s.policy, Policy::TwoQPlus)
        .then_some(s.h_bytes)
        .flatten();
    let cfg = PolicyConfig::new(s.policy, needs_cost.then_some(&s.cost), h)?;
    let out = sim::run(&flows, &cfg)?;

    let records_path = s.out.join("records.csv");
    let mut w = csv_writer(&records_path)?;
    sim::write_records_csv(&mut w, &out.records)?;
    w.flush()?;

    let afct_or_nan = |filter| match sim::afct(&out.records, filter) {
        Ok(v) => Ok(v),
        Err(flowsched::Error::EmptyFilter) => Ok(f64::NAN),
        Err(e) => Err(e),
    };
    let summary = format!(
        "afct_all_s,afct_first_s,afct_second_s\n{},{},{}\n",
        afct_or_nan(ClassFilter::All)?,
        afct_or_nan(ClassFilter::First)?,
        afct_or_nan(ClassFilter::Second)?,
    );
    let summary_path = s.out.join("summary.csv");
    std::fs::write(&summary_path, &summary)
        .with_context(|| format!("cannot write {}", summary_path.display()))?;
    println!("wrote {}", records_path.display());
    println!("wrote {}", summary_path.display());
    print!("{summary}");
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
}

impl FromStr for Figure {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig4" => Ok(Self::Fig4),
            "fig5" => Ok(Self::Fig5),
            "fig6" => Ok(Self::Fig6),
            "fig7" => Ok(Self::Fig7),
            "fig8" => Ok(Self::Fig8),
            "fig9" => Ok(Self::Fig9),
            other => Err(anyhow!("unknown figure {other:?} (expected fig4..fig9)")),
        }
    }
}

impl Figure {
    fn name(self) -> &'static str {
        match self {
            Self::Fig4 => "fig4",
            Self::Fig5 => "fig5",
            Self::Fig6 => "fig6",
            Self::Fig7 => "fig7",
            Self::Fig8 => "fig8",
            Self::Fig9 => "fig9",
        }
    }
}

/// Rebuilds one bundled experiment grid for both presets. The grids are
/// fixed (10 Gb/s, t_cost 100 us unless the axis varies it); only `n`,
/// `seed`, and the output directory follow the configuration.
pub fn reproduce(figure: Figure, s: &Settings) -> Result<()> {
    s.prepare_out()?;
    let mut written = Vec::new();
    for preset in presets::names() {
        let stem = preset.trim_end_matches("-bp");
        let path = s
            .out
            .join(format!("{}_{stem}.csv", figure.name()));
        match figure {
            Figure::Fig4 => analytic_grid(
                &path,
                preset,
                SweepAxis::Load,
                &LOAD_GRID,
                ThresholdCriterion::SufficientWait,
                "rho",
            )?,
            Figure::Fig5 => analytic_grid(
                &path,
                preset,
                SweepAxis::Load,
                &LOAD_GRID,
                ThresholdCriterion::ExactRatio,
                "rho",
            )?,
            Figure::Fig6 => analytic_grid(
                &path,
                preset,
                SweepAxis::TCost,
                &COST_GRID_S,
                ThresholdCriterion::ExactRatio,
                "t_cost",
            )?,
            Figure::Fig7 => {
                let grid = if preset == presets::WEBSEARCH {
                    &WEB_ALPHA_GRID
                } else {
                    &DATA_ALPHA_GRID
                };
                analytic_grid(
                    &path,
                    preset,
                    SweepAxis::Alpha,
                    grid,
                    ThresholdCriterion::ExactRatio,
                    "alpha",
                )?
            }
            Figure::Fig8 => simulated_threshold_grid(&path, preset, s)?,
            Figure::Fig9 => split_ratio_grid(&path, preset, s)?,
        }
        println!("wrote {}", path.display());
        written.push(path);
    }
    write_plot_script(figure, s, &written)?;
    Ok(())
}

fn analytic_grid(
    path: &PathBuf,
    preset: &str,
    axis: SweepAxis,
    values: &[f64],
    criterion: ThresholdCriterion,
    axis_header: &str,
) -> Result<()> {
    let (k, p, alpha) = presets::params(preset).unwrap();
    let spec = SweepSpec::new(
        WorkloadSpec::BoundedPareto { k, p, alpha },
        crate::config::DEFAULT_LINK_RATE,
        GRID_LOAD,
        CostModel::from_total(GRID_TCOST)?,
        axis,
        values.to_vec(),
    )?;
    let rows = threshold::run_sweep(&spec, criterion, &QuadratureConfig::default());
    let mut w = csv_writer(path)?;
    writeln!(w, "{axis_header},h_max_bytes,coverage")?;
    for row in &rows {
        if let Ok(res) = &row.outcome {
            writeln!(w, "{},{},{}", row.axis_value, res.h, res.coverage)?;
        }
    }
    w.flush()?;
    let failed = report_row_errors(&rows, axis);
    if failed > 0 {
        bail!("{failed} of {} rows failed for {preset}", rows.len());
    }
    Ok(())
}

/// Scans flow-level simulations for the largest boundary where first-class
/// flows still gain from the split, one row per load.
fn simulated_threshold_grid(path: &PathBuf, preset: &str, s: &Settings) -> Result<()> {
    let cost = CostModel::from_total(GRID_TCOST)?;
    let quad = QuadratureConfig::default();
    let mut w = csv_writer(path)?;
    writeln!(w, "rho,h_max_bytes,coverage")?;
    for load in LOAD_GRID {
        let ctx = context_for(preset, load)?;
        let center = threshold::exact_hmax(&ctx, &cost, &quad)?.h;
        let scan = numeric::log_grid(center * SCAN_LO, center * SCAN_HI, SCAN_POINTS);
        let mut best = None;
        for h in scan {
            let outcome = sim::compare_2qplus_vs_srpt(&ctx, &cost, h, s.n, s.seed)?;
            if outcome.ratio_first <= 1.0 {
                best = Some(h);
            }
        }
        let h = best.ok_or_else(|| {
            anyhow!("{preset} load {load}: no scanned boundary kept first-class flows ahead")
        })?;
        writeln!(w, "{load},{h},{}", ctx.dist().cdf(h))?;
    }
    w.flush()?;
    Ok(())
}

/// First/second/all AFCT ratios of the split against delayed SRPT at the
/// guaranteed-safe boundary, one row per load.
fn split_ratio_grid(path: &PathBuf, preset: &str, s: &Settings) -> Result<()> {
    let cost = CostModel::from_total(GRID_TCOST)?;
    let mut w = csv_writer(path)?;
    writeln!(w, "rho,ratio_first,ratio_second,ratio_all")?;
    for load in LOAD_GRID {
        let ctx = context_for(preset, load)?;
        let h = threshold::sufficient_threshold(&ctx, &cost)?.h;
        let out = sim::compare_2qplus_vs_srpt(&ctx, &cost, h, s.n, s.seed)?;
        writeln!(
            w,
            "{load},{},{},{}",
            out.ratio_first, out.ratio_second, out.ratio_all
        )?;
    }
    w.flush()?;
    Ok(())
}

fn context_for(preset: &str, load: f64) -> Result<TrafficContext> {
    Ok(TrafficContext::new(
        presets::by_name(preset).unwrap(),
        crate::config::DEFAULT_LINK_RATE,
        load,
    )?)
}

fn write_plot_script(figure: Figure, s: &Settings, files: &[PathBuf]) -> Result<()> {
    let path = s.out.join(format!("{}.gp", figure.name()));
    let names: Vec<String> = files
        .iter()
        .map(|f| f.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    let mut script = String::from("set datafile separator \",\"\nset key autotitle columnhead\n");
    match figure {
        Figure::Fig9 => {
            script.push_str("set yrange [0.5:1.5]\nplot ");
            let mut parts = Vec::new();
            for name in &names {
                for col in 2..=4 {
                    parts.push(format!("\"{name}\" using 1:{col} with linespoints"));
                }
            }
            script.push_str(&parts.join(", \\\n     "));
        }
        _ => {
            script.push_str("set logscale y\nplot ");
            let parts: Vec<String> = names
                .iter()
                .map(|name| format!("\"{name}\" using 1:2 with linespoints"))
                .collect();
            script.push_str(&parts.join(", \\\n     "));
        }
    }
    script.push('\n');
    std::fs::write(&path, script)
        .with_context(|| format!("cannot write {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn report_row_errors(rows: &[SweepRow], axis: SweepAxis) -> usize {
    let mut failed = 0;
    for row in rows {
        if let Err(e) = &row.outcome {
            eprintln!("{axis} {}: {e}", row.axis_value);
            failed += 1;
        }
    }
    failed
}

fn csv_writer(path: &PathBuf) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("cannot write {}", path.display())
    })?))
}

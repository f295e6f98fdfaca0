use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use flowsched::analysis::CostModel;
use flowsched::sim::Policy;
use flowsched::threshold::{SweepAxis, ThresholdCriterion, WorkloadSpec};
use flowsched::workload::{self, presets, SizeDistribution, TrafficContext};

pub const DEFAULT_LINK_RATE: f64 = 10e9;
pub const DEFAULT_TCOST_S: f64 = 100e-6;
pub const DEFAULT_LOAD: f64 = 0.5;
pub const DEFAULT_N: usize = 40_000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_OUT: &str = "out";

const KNOWN_KEYS: [&str; 18] = [
    "workload",
    "bp_k",
    "bp_p",
    "bp_alpha",
    "link_rate",
    "load",
    "tcost_us",
    "tgather_s",
    "tcompute_s",
    "trespond_s",
    "policy",
    "h_bytes",
    "n",
    "seed",
    "criterion",
    "axis",
    "values",
    "trace",
];

/// Flags shared by every subcommand. Each flag overrides the matching
/// config-file key; whatever remains unset falls back to the documented
/// default.
#[derive(Debug, clap::Args)]
pub struct Overrides {
    /// Config file of flat `key=value` lines; `#` starts a comment.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Workload preset (websearch-bp, datamining-bp) or an empirical CSV path.
    #[arg(long, global = true, value_name = "NAME|PATH")]
    pub workload: Option<String>,
    /// Link utilization in (0, 1) [default: 0.5].
    #[arg(long, global = true)]
    pub load: Option<f64>,
    /// Whole scheduling cost in microseconds [default: 100].
    #[arg(long = "tcost-us", global = true, value_name = "US")]
    pub tcost_us: Option<f64>,
    /// First-class size boundary in bytes (two-q-plus policy).
    #[arg(long = "h-bytes", global = true, value_name = "BYTES")]
    pub h_bytes: Option<f64>,
    /// Flows per generated trace [default: 40000].
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Trace RNG seed [default: 1].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Policy: fcfs, srpt-ideal, srpt-delayed, two-q-plus [default: srpt-ideal].
    #[arg(long, global = true)]
    pub policy: Option<String>,
    /// Threshold criterion: sufficient-wait or exact-ratio [default: sufficient-wait].
    #[arg(long, global = true)]
    pub criterion: Option<String>,
    /// Sweep axis: load, tcost, or alpha [default: load].
    #[arg(long, global = true)]
    pub axis: Option<String>,
    /// Comma-separated axis grid (load fraction, t_cost seconds, or alpha).
    #[arg(long, global = true)]
    pub values: Option<String>,
    /// Replay this trace CSV instead of generating flows.
    #[arg(long, global = true, value_name = "PATH")]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub enum Workload {
    Preset(&'static str),
    Params { k: f64, p: f64, alpha: f64 },
    File(PathBuf),
}

/// Effective configuration after merging defaults, the config file, and
/// command-line flags, in rising precedence.
#[derive(Debug, Clone)]
pub struct Settings {
    pub workload: Workload,
    pub link_rate: f64,
    pub load: f64,
    pub cost: CostModel,
    pub policy: Policy,
    pub h_bytes: Option<f64>,
    pub n: usize,
    pub seed: u64,
    pub criterion: ThresholdCriterion,
    pub axis: SweepAxis,
    pub values: Option<Vec<f64>>,
    pub trace: Option<PathBuf>,
    pub out: PathBuf,
}

struct FileCfg {
    path: PathBuf,
    entries: HashMap<&'static str, (usize, String)>,
}

impl FileCfg {
    fn empty() -> Self {
        Self {
            path: PathBuf::new(),
            entries: HashMap::new(),
        }
    }

    fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut entries = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let (key, value) = s
                .split_once('=')
                .ok_or_else(|| anyhow!("{}:{line}: expected key=value", path.display()))?;
            let key = key.trim();
            let Some(known) = KNOWN_KEYS.iter().find(|k| **k == key) else {
                bail!("{}:{line}: unknown key {key:?}", path.display());
            };
            if let Some((first, _)) = entries.insert(*known, (line, value.trim().to_string())) {
                bail!(
                    "{}:{line}: duplicate key {key:?} (first set on line {first})",
                    path.display()
                );
            }
        }
        Ok(Self {
            path: path.to_path_buf(),
            entries,
        })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        let Some((line, value)) = self.entries.get(key) else {
            return Ok(None);
        };
        value.parse().map(Some).map_err(|e| {
            anyhow!(
                "{}:{line}: invalid {key} value {value:?}: {e}",
                self.path.display()
            )
        })
    }

    fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }
}

fn parse_flag<T: FromStr>(value: &Option<String>, flag: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match value {
        None => Ok(None),
        Some(s) => s
            .parse()
            .map(Some)
            .map_err(|e| anyhow!("--{flag}: invalid value {s:?}: {e}")),
    }
}

fn parse_values(s: &str, origin: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|part| {
            let part = part.trim();
            part.parse()
                .map_err(|e| anyhow!("{origin}: invalid grid value {part:?}: {e}"))
        })
        .collect()
}

fn workload_by_name(name: &str) -> Workload {
    match presets::names().iter().find(|p| **p == name) {
        Some(preset) => Workload::Preset(preset),
        None => Workload::File(PathBuf::from(name)),
    }
}

pub fn resolve(o: &Overrides) -> Result<Settings> {
    let file = match &o.config {
        Some(path) => FileCfg::load(path)?,
        None => FileCfg::empty(),
    };

    let workload = if let Some(name) = &o.workload {
        workload_by_name(name)
    } else if file.has("workload") {
        if file.has("bp_k") || file.has("bp_p") || file.has("bp_alpha") {
            bail!(
                "{}: workload conflicts with bp_k/bp_p/bp_alpha; give exactly one",
                file.path.display()
            );
        }
        workload_by_name(&file.get::<String>("workload")?.unwrap())
    } else if file.has("bp_k") || file.has("bp_p") || file.has("bp_alpha") {
        let missing = ["bp_k", "bp_p", "bp_alpha"]
            .into_iter()
            .find(|k| !file.has(k));
        if let Some(key) = missing {
            bail!("{}: bp parameters need {key} as well", file.path.display());
        }
        Workload::Params {
            k: file.get("bp_k")?.unwrap(),
            p: file.get("bp_p")?.unwrap(),
            alpha: file.get("bp_alpha")?.unwrap(),
        }
    } else {
        Workload::Preset(presets::WEBSEARCH)
    };

    let cost = if let Some(us) = o.tcost_us {
        CostModel::from_total(us * 1e-6)?
    } else {
        let triple = ["tgather_s", "tcompute_s", "trespond_s"];
        if file.has("tcost_us") {
            if let Some(key) = triple.into_iter().find(|k| file.has(k)) {
                bail!(
                    "{}: tcost_us conflicts with {key}; give the scalar or the triple",
                    file.path.display()
                );
            }
            CostModel::from_total(file.get::<f64>("tcost_us")?.unwrap() * 1e-6)?
        } else if triple.into_iter().any(|k| file.has(k)) {
            CostModel::new(
                file.get("tgather_s")?.unwrap_or(0.0),
                file.get("tcompute_s")?.unwrap_or(0.0),
                file.get("trespond_s")?.unwrap_or(0.0),
            )?
        } else {
            CostModel::from_total(DEFAULT_TCOST_S)?
        }
    };

    let policy = match parse_flag::<Policy>(&o.policy, "policy")? {
        Some(p) => p,
        None => file.get("policy")?.unwrap_or(Policy::SrptIdeal),
    };
    let criterion = match parse_flag::<ThresholdCriterion>(&o.criterion, "criterion")? {
        Some(c) => c,
        None => file
            .get("criterion")?
            .unwrap_or(ThresholdCriterion::SufficientWait),
    };
    let axis = match parse_flag::<SweepAxis>(&o.axis, "axis")? {
        Some(a) => a,
        None => file.get("axis")?.unwrap_or(SweepAxis::Load),
    };

    let values = if let Some(s) = &o.values {
        Some(parse_values(s, "--values")?)
    } else if let Some((line, raw)) = file.entries.get("values") {
        Some(parse_values(
            raw,
            &format!("{}:{line}", file.path.display()),
        )?)
    } else {
        None
    };

    let trace = o
        .trace
        .clone()
        .or_else(|| file.entries.get("trace").map(|(_, v)| PathBuf::from(v)));

    Ok(Settings {
        workload,
        link_rate: file.get("link_rate")?.unwrap_or(DEFAULT_LINK_RATE),
        load: o.load.or(file.get("load")?).unwrap_or(DEFAULT_LOAD),
        cost,
        policy,
        h_bytes: o.h_bytes.or(file.get("h_bytes")?),
        n: o.n.or(file.get("n")?).unwrap_or(DEFAULT_N),
        seed: o.seed.or(file.get("seed")?).unwrap_or(DEFAULT_SEED),
        criterion,
        axis,
        values,
        trace,
        out: o
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
    })
}

impl Workload {
    pub fn dist(&self) -> Result<SizeDistribution> {
        Ok(match self {
            Self::Preset(name) => presets::by_name(name).unwrap(),
            Self::Params { k, p, alpha } => SizeDistribution::bounded_pareto(*k, *p, *alpha)?,
            Self::File(path) => workload::read_empirical_csv(path)?,
        })
    }

    pub fn sweep_workload(&self) -> Result<WorkloadSpec> {
        Ok(match self {
            Self::Preset(name) => {
                let (k, p, alpha) = presets::params(name).unwrap();
                WorkloadSpec::BoundedPareto { k, p, alpha }
            }
            Self::Params { k, p, alpha } => WorkloadSpec::BoundedPareto {
                k: *k,
                p: *p,
                alpha: *alpha,
            },
            Self::File(path) => WorkloadSpec::Empirical(workload::read_empirical_csv(path)?),
        })
    }
}

impl Settings {
    pub fn ctx(&self) -> Result<TrafficContext> {
        Ok(TrafficContext::new(
            self.workload.dist()?,
            self.link_rate,
            self.load,
        )?)
    }

    pub fn axis_values(&self) -> Vec<f64> {
        if let Some(v) = &self.values {
            return v.clone();
        }
        match self.axis {
            SweepAxis::Load => vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            SweepAxis::TCost => vec![2.4e-6, 20e-6, 50e-6, 100e-6, 200e-6, 1000e-6],
            SweepAxis::Alpha => vec![0.1, 0.3, 0.5, 0.7, 0.9],
        }
    }

    /// Creates the output directory and echoes the effective configuration
    /// into `config.resolved`; running the same command from that echo
    /// reproduces the outputs byte for byte.
    pub fn prepare_out(&self) -> Result<()> {
        fs::create_dir_all(&self.out)
            .with_context(|| format!("cannot create output directory {}", self.out.display()))?;
        let path = self.out.join("config.resolved");
        let mut buf = String::from("# flowsched effective configuration\n");
        use std::fmt::Write as _;
        match &self.workload {
            Workload::Preset(name) => writeln!(buf, "workload={name}").unwrap(),
            Workload::File(p) => writeln!(buf, "workload={}", p.display()).unwrap(),
            Workload::Params { k, p, alpha } => {
                writeln!(buf, "bp_k={k}\nbp_p={p}\nbp_alpha={alpha}").unwrap()
            }
        }
        writeln!(buf, "link_rate={}", self.link_rate).unwrap();
        writeln!(buf, "load={}", self.load).unwrap();
        writeln!(buf, "tgather_s={}", self.cost.t_gather()).unwrap();
        writeln!(buf, "tcompute_s={}", self.cost.t_compute()).unwrap();
        writeln!(buf, "trespond_s={}", self.cost.t_respond()).unwrap();
        writeln!(buf, "policy={}", self.policy).unwrap();
        if let Some(h) = self.h_bytes {
            writeln!(buf, "h_bytes={h}").unwrap();
        }
        writeln!(buf, "n={}", self.n).unwrap();
        writeln!(buf, "seed={}", self.seed).unwrap();
        writeln!(buf, "criterion={}", self.criterion).unwrap();
        writeln!(buf, "axis={}", self.axis).unwrap();
        if let Some(values) = &self.values {
            let joined: Vec<String> = values.iter().map(|v| v.to_string()).collect();
            writeln!(buf, "values={}", joined.join(",")).unwrap();
        }
        if let Some(trace) = &self.trace {
            writeln!(buf, "trace={}", trace.display()).unwrap();
        }
        let mut f = fs::File::create(&path)
            .with_context(|| format!("cannot write {}", path.display()))?;
        f.write_all(buf.as_bytes())?;
        Ok(())
    }
}

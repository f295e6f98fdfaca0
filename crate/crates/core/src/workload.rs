//! Flow-size distributions and the traffic context that ties a size
//! distribution to a link rate and offered load.
//!
//! Sizes are in bytes, times in seconds, link rates in bits per second. A flow
//! of `x` bytes occupies the link for `8 x / link_rate` seconds.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::{Error, Result};

/// Bounded Pareto on `[k, p]` with shape `alpha` in (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedPareto {
    k: f64,
    p: f64,
    alpha: f64,
    /// 1 - (k/p)^alpha, the truncation mass factor.
    norm: f64,
}

impl BoundedPareto {
    pub fn new(k: f64, p: f64, alpha: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidParameter {
                name: "k",
                value: k,
                reason: "minimum size must be positive and finite",
            });
        }
        if !(p.is_finite() && p > k) {
            return Err(Error::InvalidParameter {
                name: "p",
                value: p,
                reason: "maximum size must be finite and exceed k",
            });
        }
        if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: alpha,
                reason: "shape must lie strictly in (0, 1)",
            });
        }
        let norm = 1.0 - (k / p).powf(alpha);
        Ok(Self { k, p, alpha, norm })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn coeff(&self) -> f64 {
        self.alpha * self.k.powf(self.alpha) / self.norm
    }

    fn pdf(&self, x: f64) -> f64 {
        if x < self.k || x > self.p {
            0.0
        } else {
            self.coeff() * x.powf(-self.alpha - 1.0)
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= self.k {
            0.0
        } else if x >= self.p {
            1.0
        } else {
            (1.0 - (self.k / x).powf(self.alpha)) / self.norm
        }
    }

    fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return self.k;
        }
        if u >= 1.0 {
            return self.p;
        }
        (self.k * (1.0 - u * self.norm).powf(-1.0 / self.alpha)).clamp(self.k, self.p)
    }

    fn partial_moment(&self, x: f64, order: u32) -> f64 {
        let r = order as f64;
        let x = x.clamp(self.k, self.p);
        self.coeff() * (x.powf(r - self.alpha) - self.k.powf(r - self.alpha)) / (r - self.alpha)
    }
}

/// Piecewise-linear CDF through `(size, cdf)` points; the density is
/// piecewise constant between nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    points: Vec<(f64, f64)>,
    prefix_m1: Vec<f64>,
    prefix_m2: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidEmpirical(
                "need at least two (size, cdf) points".into(),
            ));
        }
        for (i, &(x, c)) in points.iter().enumerate() {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::InvalidEmpirical(format!(
                    "point {i}: size {x} must be positive and finite"
                )));
            }
            if !(c.is_finite() && (0.0..=1.0).contains(&c)) {
                return Err(Error::InvalidEmpirical(format!(
                    "point {i}: cdf {c} must lie in [0, 1]"
                )));
            }
            if i > 0 {
                let (px, pc) = points[i - 1];
                if x <= px {
                    return Err(Error::InvalidEmpirical(format!(
                        "point {i}: sizes must be strictly increasing ({px} then {x})"
                    )));
                }
                if c < pc {
                    return Err(Error::InvalidEmpirical(format!(
                        "point {i}: cdf must be non-decreasing ({pc} then {c})"
                    )));
                }
            }
        }
        if points[0].1.abs() > 1e-12 {
            return Err(Error::InvalidEmpirical(format!(
                "cdf must start at 0, got {}",
                points[0].1
            )));
        }
        let last = points.len() - 1;
        if (points[last].1 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidEmpirical(format!(
                "cdf must end at 1, got {}",
                points[last].1
            )));
        }
        points[0].1 = 0.0;
        points[last].1 = 1.0;

        let mut prefix_m1 = Vec::with_capacity(points.len());
        let mut prefix_m2 = Vec::with_capacity(points.len());
        prefix_m1.push(0.0);
        prefix_m2.push(0.0);
        for w in points.windows(2) {
            let ((x0, c0), (x1, c1)) = (w[0], w[1]);
            let slope = (c1 - c0) / (x1 - x0);
            prefix_m1.push(prefix_m1.last().unwrap() + slope * (x1 * x1 - x0 * x0) / 2.0);
            prefix_m2.push(prefix_m2.last().unwrap() + slope * (x1 * x1 * x1 - x0 * x0 * x0) / 3.0);
        }
        Ok(Self {
            points,
            prefix_m1,
            prefix_m2,
        })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    fn min(&self) -> f64 {
        self.points[0].0
    }

    fn max(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    /// Index of the segment `[x_i, x_{i+1}]` containing `x`, assuming
    /// `min() <= x <= max()`.
    fn segment(&self, x: f64) -> usize {
        let n = self.points.len();
        let i = self.points.partition_point(|&(px, _)| px <= x);
        i.clamp(1, n - 1) - 1
    }

    fn pdf(&self, x: f64) -> f64 {
        if x < self.min() || x > self.max() {
            return 0.0;
        }
        let i = self.segment(x);
        let ((x0, c0), (x1, c1)) = (self.points[i], self.points[i + 1]);
        (c1 - c0) / (x1 - x0)
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= self.min() {
            return 0.0;
        }
        if x >= self.max() {
            return 1.0;
        }
        let i = self.segment(x);
        let ((x0, c0), (x1, c1)) = (self.points[i], self.points[i + 1]);
        c0 + (c1 - c0) * (x - x0) / (x1 - x0)
    }

    fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return self.min();
        }
        if u >= 1.0 {
            return self.max();
        }
        let j = self.points.partition_point(|&(_, c)| c < u);
        let j = j.clamp(1, self.points.len() - 1);
        let ((x0, c0), (x1, c1)) = (self.points[j - 1], self.points[j]);
        if c1 == c0 {
            return x0;
        }
        x0 + (x1 - x0) * (u - c0) / (c1 - c0)
    }

    fn partial_moment(&self, x: f64, order: u32) -> f64 {
        let x = x.clamp(self.min(), self.max());
        let i = self.segment(x);
        let ((x0, c0), (x1, c1)) = (self.points[i], self.points[i + 1]);
        let slope = (c1 - c0) / (x1 - x0);
        let (prefix, tail) = match order {
            1 => (self.prefix_m1[i], slope * (x * x - x0 * x0) / 2.0),
            2 => (self.prefix_m2[i], slope * (x * x * x - x0 * x0 * x0) / 3.0),
            _ => unreachable!("partial moments supported for orders 1 and 2"),
        };
        prefix + tail
    }
}

/// A flow-size distribution: analytic bounded Pareto or tabulated empirical.
#[derive(Debug, Clone, PartialEq)]
pub enum SizeDistribution {
    BoundedPareto(BoundedPareto),
    Empirical(EmpiricalDistribution),
}

impl SizeDistribution {
    pub fn bounded_pareto(k: f64, p: f64, alpha: f64) -> Result<Self> {
        BoundedPareto::new(k, p, alpha).map(Self::BoundedPareto)
    }

    pub fn empirical_from_points(points: Vec<(f64, f64)>) -> Result<Self> {
        EmpiricalDistribution::new(points).map(Self::Empirical)
    }

    /// Smallest possible size in bytes.
    pub fn min_size(&self) -> f64 {
        match self {
            Self::BoundedPareto(d) => d.k,
            Self::Empirical(d) => d.min(),
        }
    }

    /// Largest possible size in bytes.
    pub fn max_size(&self) -> f64 {
        match self {
            Self::BoundedPareto(d) => d.p,
            Self::Empirical(d) => d.max(),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Self::BoundedPareto(d) => d.pdf(x),
            Self::Empirical(d) => d.pdf(x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::BoundedPareto(d) => d.cdf(x),
            Self::Empirical(d) => d.cdf(x),
        }
    }

    /// Inverse CDF; `quantile(0) = min_size`, `quantile(1) = max_size`.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            Self::BoundedPareto(d) => d.quantile(u),
            Self::Empirical(d) => d.quantile(u),
        }
    }

    /// `E[X^order ; X <= x]` in bytes^order, for `order` 1 or 2.
    pub fn partial_moment(&self, x: f64, order: u32) -> f64 {
        assert!(order == 1 || order == 2, "order must be 1 or 2");
        match self {
            Self::BoundedPareto(d) => d.partial_moment(x, order),
            Self::Empirical(d) => d.partial_moment(x, order),
        }
    }

    pub fn m1(&self, x: f64) -> f64 {
        self.partial_moment(x, 1)
    }

    pub fn m2(&self, x: f64) -> f64 {
        self.partial_moment(x, 2)
    }

    pub fn mean(&self) -> f64 {
        self.partial_moment(self.max_size(), 1)
    }

    /// Interior sizes where the density is allowed to jump. Empty for the
    /// analytic family.
    pub fn density_breaks(&self) -> Vec<f64> {
        match self {
            Self::BoundedPareto(_) => Vec::new(),
            Self::Empirical(d) => {
                let n = d.points.len();
                d.points[1..n - 1].iter().map(|&(x, _)| x).collect()
            }
        }
    }

    /// Draws one size by inverting the CDF at a uniform variate.
    pub fn sample_size<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

pub mod presets {
    use super::SizeDistribution;

    pub const WEBSEARCH: &str = "websearch-bp";
    pub const DATAMINING: &str = "datamining-bp";

    pub fn names() -> [&'static str; 2] {
        [WEBSEARCH, DATAMINING]
    }

    /// Web-search style sizes: 3 KB to 29.2 MB, shape 0.125.
    pub fn websearch_bp() -> SizeDistribution {
        SizeDistribution::bounded_pareto(3.0e3, 29.2e6, 0.125).unwrap()
    }

    /// Data-mining style sizes: 100 B to 973.34 MB, shape 0.26.
    pub fn datamining_bp() -> SizeDistribution {
        SizeDistribution::bounded_pareto(100.0, 973.34e6, 0.26).unwrap()
    }

    /// `(k, p, alpha)` for a named preset.
    pub fn params(name: &str) -> Option<(f64, f64, f64)> {
        match name {
            WEBSEARCH => Some((3.0e3, 29.2e6, 0.125)),
            DATAMINING => Some((100.0, 973.34e6, 0.26)),
            _ => None,
        }
    }

    pub fn by_name(name: &str) -> Option<SizeDistribution> {
        params(name).map(|(k, p, a)| SizeDistribution::bounded_pareto(k, p, a).unwrap())
    }
}

/// A size distribution offered to a link at a fixed utilization.
///
/// The Poisson arrival rate is derived from the load: a fraction `load` of the
/// link is busy on average, so `arrival_rate = load / E[service time]`.
#[derive(Debug, Clone)]
pub struct TrafficContext {
    dist: SizeDistribution,
    link_rate: f64,
    load: f64,
    arrival_rate: f64,
}

impl TrafficContext {
    pub fn new(dist: SizeDistribution, link_rate: f64, load: f64) -> Result<Self> {
        if !(link_rate.is_finite() && link_rate > 0.0) {
            return Err(Error::InvalidParameter {
                name: "link_rate",
                value: link_rate,
                reason: "must be positive and finite",
            });
        }
        if !(load.is_finite() && load > 0.0 && load < 1.0) {
            return Err(Error::InvalidLoad(load));
        }
        let mean_service = 8.0 * dist.mean() / link_rate;
        let arrival_rate = load / mean_service;
        Ok(Self {
            dist,
            link_rate,
            load,
            arrival_rate,
        })
    }

    pub fn dist(&self) -> &SizeDistribution {
        &self.dist
    }

    pub fn link_rate(&self) -> f64 {
        self.link_rate
    }

    pub fn load(&self) -> f64 {
        self.load
    }

    /// Poisson arrival rate in flows per second.
    pub fn arrival_rate(&self) -> f64 {
        self.arrival_rate
    }

    /// Seconds the link needs to push `x` bytes.
    pub fn service_time(&self, x: f64) -> f64 {
        8.0 * x / self.link_rate
    }

    /// Inverse of [`service_time`](Self::service_time).
    pub fn size_for_service(&self, s: f64) -> f64 {
        s * self.link_rate / 8.0
    }

    pub fn mean_service_time(&self) -> f64 {
        8.0 * self.dist.mean() / self.link_rate
    }

    pub fn min_service_time(&self) -> f64 {
        self.service_time(self.dist.min_size())
    }

    pub fn max_service_time(&self) -> f64 {
        self.service_time(self.dist.max_size())
    }

    /// Utilization contributed by flows of size at most `x`.
    pub fn partial_load(&self, x: f64) -> f64 {
        self.arrival_rate * 8.0 * self.dist.m1(x) / self.link_rate
    }

    /// First partial moment of the service time, `E[S ; X <= x]`.
    pub fn m1_service(&self, x: f64) -> f64 {
        8.0 * self.dist.m1(x) / self.link_rate
    }

    /// Second partial moment of the service time, `E[S^2 ; X <= x]`.
    pub fn m2_service(&self, x: f64) -> f64 {
        let r = 8.0 / self.link_rate;
        r * r * self.dist.m2(x)
    }
}

/// Reads a `size_bytes,cdf` CSV into an empirical distribution.
pub fn read_empirical_csv(path: &Path) -> Result<SizeDistribution> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_empirical_csv(BufReader::new(file), path)
}

/// Parses the `size_bytes,cdf` CSV format from any reader; `origin` labels
/// error messages.
pub fn parse_empirical_csv<R: BufRead>(reader: R, origin: &Path) -> Result<SizeDistribution> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut points = Vec::new();
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
            if line != "size_bytes,cdf" {
                return Err(err(lineno, format!("expected header size_bytes,cdf, got {line:?}")));
            }
            saw_header = true;
            continue;
        }
        let mut parts = line.split(',');
        let (sx, sc) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => return Err(err(lineno, "expected exactly two comma-separated fields".into())),
        };
        let x: f64 = sx
            .trim()
            .parse()
            .map_err(|e| err(lineno, format!("bad size {sx:?}: {e}")))?;
        let c: f64 = sc
            .trim()
            .parse()
            .map_err(|e| err(lineno, format!("bad cdf {sc:?}: {e}")))?;
        points.push((x, c));
    }
    if !saw_header {
        return Err(err(1, "missing size_bytes,cdf header".into()));
    }
    SizeDistribution::empirical_from_points(points)
}

/// Writes the `size_bytes,cdf` CSV form of an empirical distribution.
pub fn write_empirical_csv<W: Write>(w: &mut W, dist: &EmpiricalDistribution) -> std::io::Result<()> {
    writeln!(w, "size_bytes,cdf")?;
    for &(x, c) in dist.points() {
        writeln!(w, "{x},{c}")?;
    }
    Ok(())
}

/// Convenience for error paths that need a path-less origin.
pub fn parse_empirical_csv_str(text: &str) -> Result<SizeDistribution> {
    parse_empirical_csv(text.as_bytes(), &PathBuf::from("<inline>"))
}

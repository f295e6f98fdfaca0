//! Adaptive quadrature and bracketed root finding.
//!
//! The integrands here span many decades in both argument and magnitude
//! (heavy-tailed size densities, waiting times that blow up near saturation),
//! so the integrator seeds adaptive Simpson refinement from log-spaced panels
//! instead of a uniform grid.

use crate::{Error, Result};

/// Controls accuracy and effort of the adaptive integrator.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureConfig {
    /// Target relative error for the whole integral.
    pub rel_tol: f64,
    /// Maximum bisection depth inside a single panel.
    pub max_depth: u32,
    /// Seed panels log-spaced when the interval allows it.
    pub log_spacing: bool,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            max_depth: 40,
            log_spacing: true,
        }
    }
}

impl QuadratureConfig {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "rel_tol",
                value: self.rel_tol,
                reason: "must be positive and finite",
            });
        }
        Ok(())
    }
}

/// Logarithmically spaced grid from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2, "log_grid wants 0 < lo < hi and n >= 2");
    let (la, lb) = (lo.ln(), hi.ln());
    let mut out = Vec::with_capacity(n);
    out.push(lo);
    for i in 1..n - 1 {
        out.push((la + (lb - la) * i as f64 / (n - 1) as f64).exp());
    }
    out.push(hi);
    out
}

fn panel_boundaries(a: f64, b: f64, cfg: &QuadratureConfig) -> Vec<f64> {
    if cfg.log_spacing && a > 0.0 {
        let decades = (b / a).log10();
        let n = ((decades * 8.0).ceil() as usize).clamp(8, 256);
        log_grid(a, b, n + 1)
    } else {
        let n = 16;
        (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
    }
}

struct Panel {
    a: f64,
    fa: f64,
    m: f64,
    fm: f64,
    b: f64,
    fb: f64,
    coarse: f64,
}

fn simpson(a: f64, fa: f64, fm: f64, b: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    fa: f64,
    m: f64,
    fm: f64,
    b: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    spill: &mut f64,
) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, fa, flm, m, fm);
    let right = simpson(m, fm, frm, b, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || (m - a) <= f64::EPSILON * m.abs() {
        return left + right + delta / 15.0;
    }
    if depth == 0 {
        *spill += delta.abs() / 15.0;
        return left + right + delta / 15.0;
    }
    refine(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1, spill)
        + refine(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1, spill)
}

/// Integrates `f` over `[a, b]` to the configured relative tolerance.
///
/// Errors when panel refinement bottoms out before the error budget is met.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64> {
    integrate_with_breaks(f, a, b, &[], cfg)
}

/// Same as [`integrate`] but forces panel edges at the interior `breaks`,
/// which keeps piecewise-defined integrands smooth within every panel.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    cfg: &QuadratureConfig,
) -> Result<f64> {
    cfg.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "interval",
            value: if a.is_finite() { b } else { a },
            reason: "bounds must be finite",
        });
    }
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return integrate_with_breaks(f, b, a, breaks, cfg).map(|v| -v);
    }

    let mut edges = panel_boundaries(a, b, cfg);
    if !breaks.is_empty() {
        edges.extend(breaks.iter().copied().filter(|x| *x > a && *x < b));
        edges.sort_by(|x, y| x.partial_cmp(y).unwrap());
        edges.dedup();
    }

    let mut panels = Vec::with_capacity(edges.len() - 1);
    let mut coarse_scale = 0.0;
    for w in edges.windows(2) {
        let (pa, pb) = (w[0], w[1]);
        let pm = 0.5 * (pa + pb);
        let (fa, fm, fb) = (f(pa), f(pm), f(pb));
        let coarse = simpson(pa, fa, fm, pb, fb);
        coarse_scale += coarse.abs();
        panels.push(Panel {
            a: pa,
            fa,
            m: pm,
            fm,
            b: pb,
            fb,
            coarse,
        });
    }

    let scale = coarse_scale.max(f64::MIN_POSITIVE);
    let panel_tol = cfg.rel_tol * scale / panels.len() as f64;
    let mut spill = 0.0;
    let mut total = 0.0;
    for p in &panels {
        total += refine(
            &f,
            p.a,
            p.fa,
            p.m,
            p.fm,
            p.b,
            p.fb,
            p.coarse,
            panel_tol,
            cfg.max_depth,
            &mut spill,
        );
    }

    let budget = cfg.rel_tol * total.abs().max(scale);
    if spill > 4.0 * budget {
        return Err(Error::QuadratureNonConvergence {
            achieved: spill / total.abs().max(f64::MIN_POSITIVE),
            requested: cfg.rel_tol,
        });
    }
    Ok(total)
}

/// Bisects for a root of `f` on `[lo, hi]`.
///
/// Requires a sign change over the bracket. Stops once the bracket width drops
/// below `rel_width` relative to the bracket magnitude and returns the
/// midpoint.
pub fn bisect<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    rel_width: f64,
    max_iter: u32,
) -> Result<f64> {
    let flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoBracket { lo, hi });
    }
    let rising = flo < 0.0;
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= rel_width * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE) {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == rising {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

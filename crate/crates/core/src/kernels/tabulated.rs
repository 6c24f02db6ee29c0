//! Kernels defined by a user-supplied radial profile.
//!
//! The cumulative mass `P_K` is tabulated on a log-spaced radius grid by adaptive
//! quadrature and interpolated with cubic Hermite segments in `u = ln r`. The slopes
//! are exact (`dP_K/du = 2 pi r^2 h_r(r)`) and pass through a Fritsch-Carlson limiter,
//! so the interpolant is monotone. Intervals whose midpoint misses the quadrature
//! value (kinks and jumps in `h_r`) are bisected locally. Outside the grid `P_K`
//! follows power laws matched to the end slopes.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::{self, AdaptiveConfig};

pub(crate) type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Grid and tolerance settings for [`TabulatedProfile::build`].
#[derive(Clone, Copy, Debug)]
pub struct TabulationConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub points_per_decade: usize,
    /// Absolute tolerance per grid interval for the cumulative-mass quadrature.
    pub abs_tol: f64,
    /// Mass deviation from 1 above which the profile is rescaled.
    pub mass_tol: f64,
    /// Radius at which the Green function is matched to `log(r) / (2 pi)`.
    pub r_match: f64,
}

impl Default for TabulationConfig {
    fn default() -> Self {
        TabulationConfig {
            r_min: 1e-6,
            r_max: 1e4,
            points_per_decade: 200,
            abs_tol: 1e-13,
            mass_tol: 1e-9,
            r_match: 100.0,
        }
    }
}

/// Tabulated `P_K` and `G_r` for a custom profile.
pub struct TabulatedProfile {
    h: RadialFn,
    scale: f64,
    u0: f64,
    du: f64,
    /// P_K at the nodes
    p: Vec<f64>,
    /// limited dP_K/du at the nodes
    dp: Vec<f64>,
    /// S(u) = int_{-inf}^u P_K du' at the nodes
    s: Vec<f64>,
    /// local nonuniform sub-grids for intervals the uniform grid resolves poorly
    refined: Vec<Option<Box<SubGrid>>>,
    head_exponent: f64,
    tail_exponent: f64,
    g0: f64,
    origin_singular: bool,
}

/// Nodes `(u, P, dP/du, S)` covering one interval of the uniform grid.
struct SubGrid {
    u: Vec<f64>,
    p: Vec<f64>,
    dp: Vec<f64>,
    s: Vec<f64>,
}

impl SubGrid {
    fn locate(&self, u: f64) -> (usize, f64, f64) {
        let i = self.u.partition_point(|&x| x <= u).clamp(1, self.u.len() - 1) - 1;
        let h = self.u[i + 1] - self.u[i];
        (i, ((u - self.u[i]) / h).clamp(0.0, 1.0), h)
    }
}

/// Midpoint mismatch above which an interval is bisected.
const REFINE_TOL: f64 = 1e-11;
const MAX_REFINE_DEPTH: u32 = 48;

fn hermite(y0: f64, y1: f64, m0: f64, m1: f64, h: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * h * m0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * m1
}

impl TabulatedProfile {
    pub(crate) fn build(h: RadialFn, cfg: TabulationConfig) -> Result<Self> {
        if !(cfg.r_min > 0.0 && cfg.r_max > cfg.r_min && cfg.points_per_decade >= 4) {
            return Err(Error::invalid("tabulation", "need 0 < r_min < r_max and >= 4 points per decade"));
        }
        let u0 = cfg.r_min.ln();
        let decades = (cfg.r_max / cfg.r_min).log10();
        let n = (decades * cfg.points_per_decade as f64).ceil() as usize;
        let du = (cfg.r_max.ln() - u0) / n as f64;
        let radii: Vec<f64> = (0..=n).map(|i| (u0 + du * i as f64).exp()).collect();

        let hv: Vec<f64> = radii.iter().map(|&r| h(r)).collect();
        if let Some((r, v)) = radii.iter().zip(&hv).find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::KernelRejected(format!(
                "profile must be finite and nonnegative, h({r}) = {v}"
            )));
        }

        let qcfg = AdaptiveConfig {
            abs_tol: cfg.abs_tol,
            rel_tol: 1e-13,
            max_panels: 4000,
        };
        let density = |s: f64| 2.0 * PI * s * h(s);
        let mut p = Vec::with_capacity(n + 1);
        let mut acc = quadrature::integrate(density, 0.0, radii[0], qcfg)?;
        p.push(acc);
        for w in radii.windows(2) {
            acc += quadrature::integrate(density, w[0], w[1], qcfg)?;
            p.push(acc);
        }

        // power-law tail h ~ r^-q beyond r_max
        let r_max = radii[n];
        let h_end = hv[n];
        let tail_mass = if h_end == 0.0 {
            0.0
        } else {
            let probe = r_max * (-0.1f64).exp();
            let q = (h(probe) / h_end).ln() / 0.1;
            if !(q > 2.05) {
                return Err(Error::KernelRejected(format!(
                    "cumulative mass diverges: h_r decays like r^-{q:.3} at r = {r_max}"
                )));
            }
            2.0 * PI * r_max * r_max * h_end / (q - 2.0)
        };
        let mass = acc + tail_mass;
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::KernelRejected(format!("profile has mass {mass}")));
        }
        let scale = if (mass - 1.0).abs() > cfg.mass_tol {
            1.0 / mass
        } else {
            1.0
        };
        for v in &mut p {
            *v *= scale;
        }
        let mut dp: Vec<f64> = radii
            .iter()
            .zip(&hv)
            .map(|(&r, &hr)| 2.0 * PI * r * r * hr * scale)
            .collect();
        limit_slopes(&p, &mut dp, du);

        let head_exponent = if p[0] > 0.0 { (dp[0] / p[0]).max(1e-3) } else { 2.0 };
        let tail_gap = (1.0 - p[n]).max(0.0);
        let tail_exponent = if tail_gap > 0.0 && dp[n] > 0.0 {
            dp[n] / tail_gap
        } else {
            f64::INFINITY
        };

        // bisect intervals whose Hermite midpoint disagrees with quadrature
        let node = |u: f64, pv: f64| (u, pv, 2.0 * PI * u.exp().powi(2) * h(u.exp()) * scale);
        let mut refined: Vec<Option<Box<SubGrid>>> = Vec::with_capacity(n);
        for i in 0..n {
            let (ua, ub) = (u0 + du * i as f64, u0 + du * (i + 1) as f64);
            let um = 0.5 * (ua + ub);
            let pm = p[i] + scale * quadrature::integrate(density, radii[i], um.exp(), qcfg)?;
            let guess = hermite(p[i], p[i + 1], dp[i], dp[i + 1], du, 0.5);
            if (guess - pm).abs() <= REFINE_TOL {
                refined.push(None);
                continue;
            }
            let mut nodes = vec![(ua, p[i], dp[i])];
            refine(&density, scale, qcfg, &node, (ua, p[i], dp[i]), (ub, p[i + 1], dp[i + 1]), MAX_REFINE_DEPTH, &mut nodes)?;
            let (u, mut pv, mut dv): (Vec<f64>, Vec<f64>, Vec<f64>) = (
                nodes.iter().map(|x| x.0).collect(),
                nodes.iter().map(|x| x.1).collect(),
                nodes.iter().map(|x| x.2).collect(),
            );
            pv[0] = p[i];
            *pv.last_mut().unwrap() = p[i + 1];
            let widths: Vec<f64> = u.windows(2).map(|w| w[1] - w[0]).collect();
            limit_slopes_nonuniform(&pv, &mut dv, &widths);
            refined.push(Some(Box::new(SubGrid { u, p: pv, dp: dv, s: Vec::new() })));
        }

        let mut s = Vec::with_capacity(n + 1);
        let mut acc_s = p[0] / head_exponent;
        s.push(acc_s);
        for i in 0..n {
            match refined[i].as_deref_mut() {
                None => acc_s += du * 0.5 * (p[i] + p[i + 1]) + du * du * (dp[i] - dp[i + 1]) / 12.0,
                Some(sub) => {
                    sub.s.push(acc_s);
                    for k in 0..sub.u.len() - 1 {
                        let w = sub.u[k + 1] - sub.u[k];
                        acc_s += w * 0.5 * (sub.p[k] + sub.p[k + 1]) + w * w * (sub.dp[k] - sub.dp[k + 1]) / 12.0;
                        sub.s.push(acc_s);
                    }
                }
            }
            s.push(acc_s);
        }

        let origin_singular = {
            let probe = h(2.0 * cfg.r_min);
            probe > 0.0 && (hv[0] / probe).ln() / std::f64::consts::LN_2 > 0.01
        };

        let mut profile = TabulatedProfile {
            h,
            scale,
            u0,
            du,
            p,
            dp,
            s,
            refined,
            head_exponent,
            tail_exponent,
            g0: 0.0,
            origin_singular,
        };
        let r_match = cfg.r_match.min(r_max);
        let u_match = r_match.ln();
        let u_end = r_max.ln();
        let tail_integral = if tail_exponent.is_finite() { tail_gap / tail_exponent } else { 0.0 };
        let t_match = (u_end - u_match) - (profile.s_at(u_end) - profile.s_at(u_match)) + tail_integral;
        profile.g0 = (u_match + t_match - profile.s_at(u_match)) / (2.0 * PI);
        Ok(profile)
    }

    pub(crate) fn mass_scale(&self) -> f64 {
        self.scale
    }

    pub(crate) fn origin_singular(&self) -> bool {
        self.origin_singular
    }

    pub(crate) fn h(&self, r: f64) -> f64 {
        (self.h)(r) * self.scale
    }

    fn last(&self) -> usize {
        self.p.len() - 1
    }

    fn locate(&self, u: f64) -> (usize, f64) {
        let x = (u - self.u0) / self.du;
        let i = (x.floor() as usize).min(self.last() - 1);
        (i, (x - i as f64).clamp(0.0, 1.0))
    }

    pub(crate) fn pk(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let u = r.ln();
        let n = self.last();
        let u_end = self.u0 + self.du * n as f64;
        if u <= self.u0 {
            self.p[0] * ((u - self.u0) * self.head_exponent).exp()
        } else if u >= u_end {
            if self.tail_exponent.is_finite() {
                1.0 - (1.0 - self.p[n]) * (-(u - u_end) * self.tail_exponent).exp()
            } else {
                self.p[n].min(1.0)
            }
        } else {
            let (i, t) = self.locate(u);
            match &self.refined[i] {
                None => hermite(self.p[i], self.p[i + 1], self.dp[i], self.dp[i + 1], self.du, t),
                Some(sub) => {
                    let (k, t, w) = sub.locate(u);
                    hermite(sub.p[k], sub.p[k + 1], sub.dp[k], sub.dp[k + 1], w, t)
                }
            }
        }
    }

    fn s_at(&self, u: f64) -> f64 {
        if u <= self.u0 {
            return self.s[0] * ((u - self.u0) * self.head_exponent).exp();
        }
        let (i, t) = self.locate(u);
        match &self.refined[i] {
            None => hermite(self.s[i], self.s[i + 1], self.p[i], self.p[i + 1], self.du, t),
            Some(sub) => {
                let (k, t, w) = sub.locate(u);
                hermite(sub.s[k], sub.s[k + 1], sub.p[k], sub.p[k + 1], w, t)
            }
        }
    }

    pub(crate) fn g(&self, r: f64) -> f64 {
        let n = self.last();
        let u_end = self.u0 + self.du * n as f64;
        if r > 0.0 && r.ln() >= u_end {
            let u = r.ln();
            let gap = 1.0 - self.pk(r);
            let tail = if self.tail_exponent.is_finite() { gap / self.tail_exponent } else { 0.0 };
            (u + tail) / (2.0 * PI)
        } else {
            let s = if r > 0.0 { self.s_at(r.ln()) } else { 0.0 };
            self.g0 + s / (2.0 * PI)
        }
    }
}

type Node = (f64, f64, f64);

/// Appends the nodes after `a` up to and including `b`, bisecting until the
/// Hermite midpoint matches the quadrature value.
#[allow(clippy::too_many_arguments)]
fn refine(
    density: &dyn Fn(f64) -> f64,
    scale: f64,
    qcfg: AdaptiveConfig,
    node: &dyn Fn(f64, f64) -> Node,
    a: Node,
    b: Node,
    depth: u32,
    out: &mut Vec<Node>,
) -> Result<()> {
    let um = 0.5 * (a.0 + b.0);
    let m = node(um, a.1 + scale * quadrature::integrate(density, a.0.exp(), um.exp(), qcfg)?);
    let guess = hermite(a.1, b.1, a.2, b.2, b.0 - a.0, 0.5);
    if depth == 0 || (guess - m.1).abs() <= REFINE_TOL {
        out.push(b);
        return Ok(());
    }
    refine(density, scale, qcfg, node, a, m, depth - 1, out)?;
    refine(density, scale, qcfg, node, m, b, depth - 1, out)
}

fn limit_slopes(p: &[f64], dp: &mut [f64], du: f64) {
    let widths = vec![du; p.len() - 1];
    limit_slopes_nonuniform(p, dp, &widths);
}

fn limit_slopes_nonuniform(p: &[f64], dp: &mut [f64], widths: &[f64]) {
    for i in 0..p.len() - 1 {
        let secant = (p[i + 1] - p[i]) / widths[i];
        if secant <= 0.0 {
            dp[i] = 0.0;
            dp[i + 1] = 0.0;
            continue;
        }
        let a = dp[i] / secant;
        let b = dp[i + 1] / secant;
        let norm = a * a + b * b;
        if norm > 9.0 {
            let tau = 3.0 / norm.sqrt();
            dp[i] = tau * a * secant;
            dp[i + 1] = tau * b * secant;
        }
    }
}

/// A two-column `(r, h_r(r))` table read from text, interpolated log-log between
/// rows and extended by power laws.
#[derive(Clone, Debug)]
pub struct ProfileTable {
    r: Vec<f64>,
    h: Vec<f64>,
}

impl ProfileTable {
    pub fn new(r: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        if r.len() != h.len() || r.len() < 2 {
            return Err(Error::invalid("profile table", "need at least two (r, h) rows"));
        }
        if r.windows(2).any(|w| !(w[1] > w[0])) || r[0] <= 0.0 {
            return Err(Error::invalid("profile table", "radii must be positive and strictly increasing"));
        }
        if h.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::KernelRejected("profile table has negative or non-finite values".into()));
        }
        Ok(ProfileTable { r, h })
    }

    fn segment(&self, i: usize, r: f64) -> f64 {
        let (r0, r1, h0, h1) = (self.r[i], self.r[i + 1], self.h[i], self.h[i + 1]);
        if h0 > 0.0 && h1 > 0.0 {
            let slope = (h1 / h0).ln() / (r1 / r0).ln();
            h0 * (r / r0).powf(slope)
        } else {
            h0 + (h1 - h0) * (r - r0) / (r1 - r0)
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        let n = self.r.len();
        if r <= self.r[0] {
            return self.segment(0, r);
        }
        if r >= self.r[n - 1] {
            return if self.h[n - 1] > 0.0 && self.h[n - 2] > 0.0 {
                self.segment(n - 2, r)
            } else {
                0.0
            };
        }
        let i = self.r.partition_point(|&x| x <= r) - 1;
        self.segment(i, r)
    }
}

/// Reads a whitespace- or comma-separated `(r, h)` table; `#` starts a comment.
pub fn load_profile_table(path: &Path) -> Result<ProfileTable> {
    let text = std::fs::read_to_string(path)?;
    let mut r = Vec::new();
    let mut h = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|e| Error::Parse {
                location: format!("{}:{}", path.display(), lineno + 1),
                reason: e.to_string(),
            })
        };
        if cols.len() != 2 {
            return Err(Error::Parse {
                location: format!("{}:{}", path.display(), lineno + 1),
                reason: format!("expected 2 columns, found {}", cols.len()),
            });
        }
        r.push(parse(cols[0])?);
        h.push(parse(cols[1])?);
    }
    ProfileTable::new(r, h)
}

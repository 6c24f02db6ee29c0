//! Conserved quantities, the discrete vorticity maximal function and weak-form residuals.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::discretization::VortexSystem;
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::kernels::{biot_savart, SmoothingKernel};
use crate::vec2::Vec2;

/// Work size below which double sums run on the calling thread.
const PARALLEL_THRESHOLD: usize = 4096;

/// Sums `f(n)` for `n in 0..len` in index order, computing terms in parallel when large.
fn ordered_sum<F>(len: usize, work: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    if work < PARALLEL_THRESHOLD {
        (0..len).map(f).sum()
    } else {
        let parts: Vec<f64> = (0..len).into_par_iter().map(f).collect();
        parts.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub total_circulation: f64,
    pub second_moment: f64,
    /// Circulation-weighted first moment `sum Gamma_n x_n` (not normalized).
    pub centroid: Vec2,
    /// `None` when a pair coincides and the Green function is singular there.
    pub hamiltonian: Option<f64>,
    pub vmf_samples: Vec<(f64, f64)>,
}

/// `-sum_{m != n} Gamma_m Gamma_n G^eps(|x_m - x_n|)`; `None` if any term is undefined.
pub fn hamiltonian(system: &VortexSystem) -> Option<f64> {
    let (pos, circ) = (system.positions(), system.circulations());
    let (kernel, eps) = (system.kernel(), system.eps());
    let n = pos.len();
    let row = |i: usize| -> f64 {
        let mut acc = 0.0;
        for j in (i + 1)..n {
            match kernel.g_eps((pos[i] - pos[j]).norm(), eps) {
                Ok(g) if g.is_finite() => acc += circ[j] * g,
                _ => return f64::NAN,
            }
        }
        circ[i] * acc
    };
    let s = ordered_sum(n, n * n / 2, row);
    if s.is_finite() {
        Some(-2.0 * s)
    } else {
        None
    }
}

/// Q, M, first moment and interaction energy of one snapshot.
pub fn conserved_quantities(system: &VortexSystem) -> DiagnosticsRecord {
    let (pos, circ) = (system.positions(), system.circulations());
    let mut q = 0.0;
    let mut m = 0.0;
    let mut c = Vec2::ZERO;
    for (&x, &g) in pos.iter().zip(circ) {
        q += g;
        m += g * x.norm_sq();
        c += x * g;
    }
    DiagnosticsRecord {
        t: system.time(),
        total_circulation: q,
        second_moment: m,
        centroid: c,
        hamiltonian: hamiltonian(system),
        vmf_samples: Vec::new(),
    }
}

fn require_nonnegative(system: &VortexSystem) -> Result<()> {
    if let Some(i) = system.circulations().iter().position(|&g| !(g >= 0.0)) {
        return Err(Error::Diagnostic(format!(
            "the maximal-function bound assumes vorticity of one sign, but vortex {i} has \
             circulation {}; flip the sign of all circulations or split the data",
            system.circulations()[i]
        )));
    }
    Ok(())
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if let Some(r) = radii.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
        return Err(Error::invalid("radii", format!("radii must be positive and finite, got {r}")));
    }
    Ok(())
}

/// Relative shrink turning the open-disc supremum into a closed-disc maximum.
const OPEN_DISC_SHRINK: f64 = 1e-12;

/// Largest circulation in a closed disc of radius `rho`, by an angular sweep of discs
/// whose boundary passes through each vortex in turn.
fn max_closed_disc(pos: &[Vec2], circ: &[f64], order: &[usize], rho: f64) -> f64 {
    let n = pos.len();
    let reach = 2.0 * rho;
    let anchor_best = |a: usize| -> f64 {
        let ia = order[a];
        let pa = pos[ia];
        let mut base = circ[ia];
        let mut events: Vec<(f64, bool, f64)> = Vec::new();
        let mut scan = |b: usize| -> bool {
            let ib = order[b];
            let d = pos[ib] - pa;
            if d.x.abs() > reach {
                return false;
            }
            let dist = d.norm();
            if dist > reach {
                return true;
            }
            if dist == 0.0 {
                base += circ[ib];
                return true;
            }
            let half = (dist / reach).min(1.0).acos();
            let phi = d.y.atan2(d.x);
            let mut start = phi - half;
            if start < -PI {
                start += 2.0 * PI;
            }
            let end = start + 2.0 * half;
            if end >= PI {
                // interval wraps through -pi: active at the start of the sweep
                base += circ[ib];
                events.push((end - 2.0 * PI, false, circ[ib]));
                events.push((start, true, circ[ib]));
            } else {
                events.push((start, true, circ[ib]));
                events.push((end, false, circ[ib]));
            }
            true
        };
        for b in (a + 1)..n {
            if !scan(b) {
                break;
            }
        }
        for b in (0..a).rev() {
            if !scan(b) {
                break;
            }
        }
        // entries before exits at equal angles: the disc is closed
        events.sort_by(|p, q| p.0.total_cmp(&q.0).then(q.1.cmp(&p.1)));
        let mut cur = base;
        let mut best = base;
        for (_, enter, g) in events {
            if enter {
                cur += g;
                best = best.max(cur);
            } else {
                cur -= g;
            }
        }
        best
    };
    if n * n < PARALLEL_THRESHOLD {
        (0..n).map(anchor_best).fold(0.0, f64::max)
    } else {
        (0..n).into_par_iter().map(anchor_best).reduce(|| 0.0, f64::max)
    }
}

/// `M(r) = sup_{x0} sum_{|x_n - x0| < r} Gamma_n` for each radius; exact for atomic measures.
pub fn vorticity_maximal(system: &VortexSystem, radii: &[f64]) -> Result<Vec<(f64, f64)>> {
    require_nonnegative(system)?;
    check_radii(radii)?;
    let (pos, circ) = (system.positions(), system.circulations());
    let mut order: Vec<usize> = (0..pos.len()).collect();
    order.sort_by(|&a, &b| pos[a].x.total_cmp(&pos[b].x).then(a.cmp(&b)));
    Ok(radii
        .iter()
        .map(|&r| (r, max_closed_disc(pos, circ, &order, r * (1.0 - OPEN_DISC_SHRINK))))
        .collect())
}

/// Brute-force maximal function over disc centres on a square grid of spacing
/// `resolution` covering the vortices; a lower bound for [`vorticity_maximal`].
pub fn vorticity_maximal_grid(
    system: &VortexSystem,
    radii: &[f64],
    resolution: f64,
) -> Result<Vec<(f64, f64)>> {
    require_nonnegative(system)?;
    check_radii(radii)?;
    if !(resolution > 0.0) {
        return Err(Error::invalid("resolution", "must be positive"));
    }
    let (pos, circ) = (system.positions(), system.circulations());
    let (mut lo, mut hi) = (pos[0], pos[0]);
    for p in pos {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    radii
        .iter()
        .map(|&r| {
            let x0 = ((lo.x - r) / resolution).floor() as i64;
            let x1 = ((hi.x + r) / resolution).ceil() as i64;
            let y0 = ((lo.y - r) / resolution).floor() as i64;
            let y1 = ((hi.y + r) / resolution).ceil() as i64;
            let cells = (x1 - x0 + 1) as f64 * (y1 - y0 + 1) as f64;
            if cells > 1e8 {
                return Err(Error::invalid("resolution", "centre grid exceeds 1e8 points"));
            }
            let best = (x0..=x1)
                .into_par_iter()
                .map(|i| {
                    let mut best: f64 = 0.0;
                    for j in y0..=y1 {
                        let c = Vec2::new(i as f64 * resolution, j as f64 * resolution);
                        let s: f64 = pos
                            .iter()
                            .zip(circ)
                            .filter(|(p, _)| (**p - c).norm() < r)
                            .map(|(_, g)| *g)
                            .sum();
                        best = best.max(s);
                    }
                    best
                })
                .reduce(|| 0.0, f64::max);
            Ok((r, best))
        })
        .collect()
}

#[derive(Clone, Copy, Debug)]
pub struct DecayPolicy {
    pub c_margin: f64,
}

impl Default for DecayPolicy {
    fn default() -> Self {
        DecayPolicy { c_margin: 1.5 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayBoundReport {
    pub eps: f64,
    pub c_fit: f64,
    pub c_margin: f64,
    pub radii_used: Vec<f64>,
    pub excluded: Vec<(f64, String)>,
    /// Largest `M(r, t) / (c_fit [log(1/(2r+eps))]^{-1/2})` over snapshots and radii.
    pub worst_ratio: f64,
    pub worst_t: f64,
    pub worst_r: f64,
    pub pass: bool,
    /// `(t, r, M(r, t))` for every snapshot and used radius.
    pub samples: Vec<(f64, f64, f64)>,
}

/// Fits `c` at the first snapshot and checks
/// `M(r, t) <= c_margin * c * [log(1/(2r + eps))]^{-1/2}` on every snapshot.
pub fn decay_bound_check(
    trajectory: &Trajectory,
    radii: &[f64],
    policy: DecayPolicy,
) -> Result<DecayBoundReport> {
    let eps = trajectory.eps();
    let mut used = Vec::new();
    let mut excluded = Vec::new();
    for &r in radii {
        if !(r > 0.0 && r <= 0.25) {
            excluded.push((r, "outside (0, 1/4]".to_string()));
        } else if 2.0 * r + eps >= 1.0 {
            excluded.push((r, "2r + eps >= 1 makes the bound vacuous".to_string()));
        } else {
            used.push(r);
        }
    }
    if used.is_empty() {
        return Err(Error::Diagnostic("no admissible radius left for the decay bound".into()));
    }
    let envelope: Vec<f64> = used.iter().map(|r| (1.0 / (2.0 * r + eps)).ln().sqrt().recip()).collect();

    let mut samples = Vec::with_capacity(trajectory.len() * used.len());
    for snap in trajectory.snapshots() {
        for (r, m) in vorticity_maximal(&snap, &used)? {
            samples.push((snap.time(), r, m));
        }
    }
    let k = used.len();
    let c_fit = samples[..k]
        .iter()
        .zip(&envelope)
        .map(|(s, e)| s.2 / e)
        .fold(0.0, f64::max);
    if !(c_fit > 0.0) {
        return Err(Error::Diagnostic("maximal function vanishes at t = 0; nothing to fit".into()));
    }
    let (mut worst_ratio, mut worst_t, mut worst_r) = (0.0, samples[0].0, used[0]);
    for (i, s) in samples.iter().enumerate() {
        let ratio = s.2 / (c_fit * envelope[i % k]);
        if ratio > worst_ratio {
            (worst_ratio, worst_t, worst_r) = (ratio, s.0, s.1);
        }
    }
    Ok(DecayBoundReport {
        eps,
        c_fit,
        c_margin: policy.c_margin,
        radii_used: used,
        excluded,
        worst_ratio,
        worst_t,
        worst_r,
        pass: worst_ratio <= policy.c_margin * (1.0 + 1e-12),
        samples,
    })
}

/// Space-time test function for the weak vorticity form.
pub trait TestFunction: Sync {
    fn id(&self) -> String;
    fn value(&self, x: Vec2, t: f64) -> f64;
    fn grad(&self, x: Vec2, t: f64) -> Vec2;
    fn dt(&self, x: Vec2, t: f64) -> f64;
    /// Upper bound for the operator norm of the spatial Hessian at time `t`.
    fn hessian_sup(&self, t: f64) -> f64;
}

/// `sin^p(pi (t - t0) / (t1 - t0))` on `[t0, t1]`, zero outside.
#[derive(Clone, Copy, Debug)]
pub struct TimeWindow {
    pub t0: f64,
    pub t1: f64,
    pub power: u32,
}

impl TimeWindow {
    pub fn new(t0: f64, t1: f64, power: u32) -> Result<Self> {
        if !(t1 > t0) || power < 2 {
            return Err(Error::invalid("time window", "need t1 > t0 and power >= 2"));
        }
        Ok(TimeWindow { t0, t1, power })
    }

    fn phase(&self, t: f64) -> Option<f64> {
        (t > self.t0 && t < self.t1).then(|| PI * (t - self.t0) / (self.t1 - self.t0))
    }

    pub fn value(&self, t: f64) -> f64 {
        self.phase(t).map_or(0.0, |a| a.sin().powi(self.power as i32))
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.phase(t).map_or(0.0, |a| {
            let p = self.power as i32;
            p as f64 * a.sin().powi(p - 1) * a.cos() * PI / (self.t1 - self.t0)
        })
    }
}

/// `tau(t) (1 - |x - c|^2 / rho^2)^k` inside the disc, zero outside.
#[derive(Clone, Copy, Debug)]
pub struct BumpTestFunction {
    pub center: Vec2,
    pub radius: f64,
    pub power: u32,
    pub window: TimeWindow,
}

impl BumpTestFunction {
    pub fn new(center: Vec2, radius: f64, power: u32, window: TimeWindow) -> Result<Self> {
        if !(radius > 0.0) || power < 3 {
            return Err(Error::invalid("bump", "need radius > 0 and power >= 3"));
        }
        Ok(BumpTestFunction { center, radius, power, window })
    }

    fn s(&self, x: Vec2) -> f64 {
        (x - self.center).norm_sq() / (self.radius * self.radius)
    }

    fn spatial(&self, x: Vec2) -> f64 {
        let s = self.s(x);
        if s >= 1.0 {
            0.0
        } else {
            (1.0 - s).powi(self.power as i32)
        }
    }
}

impl TestFunction for BumpTestFunction {
    fn id(&self) -> String {
        format!(
            "bump(center=({:e},{:e}),radius={:e},power={},t=[{:e},{:e}],tpower={})",
            self.center.x, self.center.y, self.radius, self.power, self.window.t0, self.window.t1, self.window.power
        )
    }

    fn value(&self, x: Vec2, t: f64) -> f64 {
        self.window.value(t) * self.spatial(x)
    }

    fn grad(&self, x: Vec2, t: f64) -> Vec2 {
        let s = self.s(x);
        if s >= 1.0 {
            return Vec2::ZERO;
        }
        let k = self.power as f64;
        let coef = -2.0 * k * (1.0 - s).powi(self.power as i32 - 1) / (self.radius * self.radius);
        (x - self.center) * (coef * self.window.value(t))
    }

    fn dt(&self, x: Vec2, t: f64) -> f64 {
        self.window.derivative(t) * self.spatial(x)
    }

    fn hessian_sup(&self, t: f64) -> f64 {
        // eigenvalues -2k/rho^2 (1-s)^{k-1} and 2k/rho^2 (1-s)^{k-2}((2k-1)s - 1); both peak
        // in magnitude at the centre for k >= 3
        self.window.value(t).abs() * 2.0 * self.power as f64 / (self.radius * self.radius)
    }
}

/// `tau(t) |x|^2 / 2`.
#[derive(Clone, Copy, Debug)]
pub struct QuadraticTestFunction {
    pub window: TimeWindow,
}

impl TestFunction for QuadraticTestFunction {
    fn id(&self) -> String {
        format!(
            "quadratic(t=[{:e},{:e}],tpower={})",
            self.window.t0, self.window.t1, self.window.power
        )
    }

    fn value(&self, x: Vec2, t: f64) -> f64 {
        self.window.value(t) * 0.5 * x.norm_sq()
    }

    fn grad(&self, x: Vec2, t: f64) -> Vec2 {
        x * self.window.value(t)
    }

    fn dt(&self, x: Vec2, t: f64) -> f64 {
        self.window.derivative(t) * 0.5 * x.norm_sq()
    }

    fn hessian_sup(&self, t: f64) -> f64 {
        self.window.value(t).abs()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakResidualReport {
    pub test_function_id: String,
    pub filtered: bool,
    pub w_linear: f64,
    pub w_nonlinear: f64,
    pub residual: f64,
    /// Largest snapshot spacing used by the trapezoid rule.
    pub quadrature_dt: f64,
    pub n_snapshots: usize,
}

/// Tolerance for the endpoint vanishing check.
pub const ENDPOINT_TOL: f64 = 1e-12;

fn pair_term(
    kernel: Option<(&SmoothingKernel, f64)>,
    xa: Vec2,
    xb: Vec2,
    ga: Vec2,
    gb: Vec2,
    bound: f64,
) -> Result<f64> {
    let z = xa - xb;
    let k = match kernel {
        Some((kernel, eps)) => kernel.k_eps(z, eps),
        None => biot_savart(z),
    };
    let h = 0.5 * k.dot(ga - gb);
    if !h.is_finite() || h.abs() > bound * (1.0 + 1e-9) + 1e-300 {
        return Err(Error::Diagnostic(format!(
            "|H_psi| = {h:e} exceeds sup|D^2 psi|/(4 pi) = {bound:e} at separation {:e}",
            z.norm()
        )));
    }
    Ok(h)
}

/// Weak-form residual `W_L + W_NL` of a trajectory against `psi`, with the
/// filtered (`K^eps`) or unfiltered (`K`) interaction; trapezoid rule in time.
pub fn weak_residual(
    trajectory: &Trajectory,
    psi: &dyn TestFunction,
    filtered: bool,
) -> Result<WeakResidualReport> {
    let times = trajectory.times();
    if times.len() < 2 {
        return Err(Error::Diagnostic("weak residual needs at least two snapshots".into()));
    }
    let circ = trajectory.circulations();
    for &i in &[0, times.len() - 1] {
        let t = times[i];
        if let Some(x) = trajectory.positions(i).iter().find(|&&x| psi.value(x, t).abs() > ENDPOINT_TOL) {
            return Err(Error::Diagnostic(format!(
                "test function does not vanish at the time endpoint t = {t:e} (psi = {:e})",
                psi.value(*x, t)
            )));
        }
    }
    let kernel = filtered.then(|| (trajectory.kernel(), trajectory.eps()));
    let n = circ.len();

    let mut lin = Vec::with_capacity(times.len());
    let mut nonlin = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        let pos = trajectory.positions(i);
        lin.push(pos.iter().zip(circ).map(|(&x, &g)| g * psi.dt(x, t)).sum::<f64>());
        let bound = psi.hessian_sup(t) / (4.0 * PI);
        let grads: Vec<Vec2> = pos.iter().map(|&x| psi.grad(x, t)).collect();
        let row = |a: usize| -> Result<f64> {
            let mut acc = 0.0;
            for b in (a + 1)..n {
                acc += circ[b] * pair_term(kernel, pos[a], pos[b], grads[a], grads[b], bound)?;
            }
            Ok(circ[a] * acc)
        };
        // diagonal: H^eps(x, x) = 0 for the filtered kernel, excluded for the unfiltered one
        let rows: Vec<f64> = if n * n < PARALLEL_THRESHOLD {
            (0..n).map(row).collect::<Result<_>>()?
        } else {
            (0..n).into_par_iter().map(row).collect::<Result<_>>()?
        };
        nonlin.push(2.0 * rows.iter().sum::<f64>());
    }
    let trapezoid = |f: &[f64]| -> f64 {
        times.windows(2).zip(f.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).sum()
    };
    let w_linear = trapezoid(&lin);
    let w_nonlinear = trapezoid(&nonlin);
    let quadrature_dt = times.windows(2).map(|t| t[1] - t[0]).fold(0.0, f64::max);
    Ok(WeakResidualReport {
        test_function_id: psi.id(),
        filtered,
        w_linear,
        w_nonlinear,
        residual: w_linear + w_nonlinear,
        quadrature_dt,
        n_snapshots: times.len(),
    })
}

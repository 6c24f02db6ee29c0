//! Point-vortex dynamics under a filtered kernel.
//!
//! Velocities are direct O(N^2) sums. Each target accumulates its sources in fixed
//! index order, so results are bitwise identical for any rayon worker count.

use rayon::prelude::*;

use crate::discretization::VortexSystem;
use crate::error::{Error, Result};
use crate::kernels::SmoothingKernel;
use crate::vec2::Vec2;

/// Position magnitude beyond which integration aborts.
pub const BLOW_UP_RADIUS: f64 = 1e8;

/// Work size (targets x sources) below which sums run on the calling thread.
const PARALLEL_THRESHOLD: usize = 4096;

#[inline]
fn induced_at(
    kernel: &SmoothingKernel,
    eps: f64,
    sources: &[Vec2],
    circulations: &[f64],
    target: Vec2,
    skip: Option<usize>,
) -> Vec2 {
    let mut u = Vec2::ZERO;
    for (m, (&xm, &gm)) in sources.iter().zip(circulations).enumerate() {
        if gm == 0.0 || Some(m) == skip {
            continue;
        }
        u += kernel.k_eps(target - xm, eps) * gm;
    }
    u
}

fn map_targets<F>(n_targets: usize, n_sources: usize, f: F) -> Vec<Vec2>
where
    F: Fn(usize) -> Vec2 + Sync + Send,
{
    if n_targets.saturating_mul(n_sources) < PARALLEL_THRESHOLD {
        (0..n_targets).map(f).collect()
    } else {
        (0..n_targets).into_par_iter().with_min_len(8).map(f).collect()
    }
}

fn velocities_at(
    kernel: &SmoothingKernel,
    eps: f64,
    positions: &[Vec2],
    circulations: &[f64],
) -> Vec<Vec2> {
    map_targets(positions.len(), positions.len(), |n| {
        induced_at(kernel, eps, positions, circulations, positions[n], Some(n))
    })
}

/// `dx_n/dt = sum_{m != n} Gamma_m K^eps(x_n - x_m)`.
pub fn rhs(system: &VortexSystem) -> Result<Vec<Vec2>> {
    if let Some(i) = system.positions().iter().position(|p| !p.is_finite()) {
        return Err(Error::invalid("positions", format!("vortex {i} is not finite")));
    }
    if let Some(i) = system.circulations().iter().position(|g| !g.is_finite()) {
        return Err(Error::invalid("circulations", format!("vortex {i} is not finite")));
    }
    Ok(velocities_at(
        system.kernel(),
        system.eps(),
        system.positions(),
        system.circulations(),
    ))
}

/// Filtered velocity `u^eps(x) = sum_n Gamma_n K^eps(x - x_n)` at arbitrary targets.
pub fn velocity_field(system: &VortexSystem, targets: &[Vec2]) -> Vec<Vec2> {
    let (k, eps) = (system.kernel(), system.eps());
    let (pos, circ) = (system.positions(), system.circulations());
    map_targets(targets.len(), pos.len(), |i| induced_at(k, eps, pos, circ, targets[i], None))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Rk4,
    Euler,
    Rk45Adaptive,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Scheme::Rk4),
            "euler" => Ok(Scheme::Euler),
            "rk45_adaptive" => Ok(Scheme::Rk45Adaptive),
            other => Err(Error::invalid(
                "scheme",
                format!("unknown scheme '{other}'; expected rk4, euler or rk45_adaptive"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    /// Fixed step, or the initial step for the adaptive scheme.
    pub dt: f64,
    pub t_end: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Steps (accepted steps for the adaptive scheme) between snapshots.
    pub snapshot_stride: usize,
}

impl IntegratorConfig {
    pub fn rk4(dt: f64, t_end: f64) -> Self {
        IntegratorConfig {
            scheme: Scheme::Rk4,
            dt,
            t_end,
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            snapshot_stride: 1,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::invalid("t_end", format!("must be positive, got {}", self.t_end)));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::invalid("snapshot_stride", "must be at least 1"));
        }
        if self.scheme == Scheme::Rk45Adaptive && !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::invalid("abs_tol/rel_tol", "adaptive tolerances must be positive"));
        }
        Ok(())
    }
}

/// Snapshots of one vortex system; circulations, kernel and `eps` are shared.
#[derive(Clone, Debug)]
pub struct Trajectory {
    base: VortexSystem,
    times: Vec<f64>,
    positions: Vec<Vec<Vec2>>,
}

impl Trajectory {
    /// Starts a trajectory at the system's own time and positions.
    pub fn new(initial: &VortexSystem) -> Self {
        Trajectory {
            base: initial.clone(),
            times: vec![initial.time()],
            positions: vec![initial.positions().to_vec()],
        }
    }

    /// Appends a snapshot; `t` must exceed the last stored time.
    pub fn push(&mut self, t: f64, positions: Vec<Vec2>) -> Result<()> {
        if positions.len() != self.base.len() {
            return Err(Error::invalid("positions", "snapshot size differs from the trajectory"));
        }
        if !(t > *self.times.last().unwrap()) {
            return Err(Error::invalid("t", format!("snapshot times must increase, got {t}")));
        }
        self.times.push(t);
        self.positions.push(positions);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn positions(&self, i: usize) -> &[Vec2] {
        &self.positions[i]
    }

    pub fn circulations(&self) -> &[f64] {
        self.base.circulations()
    }

    pub fn eps(&self) -> f64 {
        self.base.eps()
    }

    pub fn kernel(&self) -> &SmoothingKernel {
        self.base.kernel()
    }

    pub fn snapshot(&self, i: usize) -> VortexSystem {
        self.base.advanced(self.positions[i].clone(), self.times[i])
    }

    pub fn first(&self) -> VortexSystem {
        self.snapshot(0)
    }

    pub fn last(&self) -> VortexSystem {
        self.snapshot(self.len() - 1)
    }

    pub fn snapshots(&self) -> impl Iterator<Item = VortexSystem> + '_ {
        (0..self.len()).map(|i| self.snapshot(i))
    }
}

/// Callback invoked on every stored snapshot.
pub trait Observer {
    fn observe(&mut self, snapshot: &VortexSystem) -> Result<()>;
}

impl<F: FnMut(&VortexSystem) -> Result<()>> Observer for F {
    fn observe(&mut self, snapshot: &VortexSystem) -> Result<()> {
        self(snapshot)
    }
}

fn axpy(x: &[Vec2], a: f64, k: &[Vec2]) -> Vec<Vec2> {
    x.iter().zip(k).map(|(&x, &k)| x + k * a).collect()
}

fn check_state(positions: &[Vec2], t: f64) -> Result<()> {
    for (i, p) in positions.iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::BlowUp {
                t,
                reason: format!("vortex {i} has a non-finite position"),
            });
        }
        if p.norm() > BLOW_UP_RADIUS {
            return Err(Error::BlowUp {
                t,
                reason: format!("vortex {i} left the disc |x| <= {BLOW_UP_RADIUS:e}"),
            });
        }
    }
    Ok(())
}

struct Stepper<'a> {
    kernel: &'a SmoothingKernel,
    eps: f64,
    circulations: &'a [f64],
}

impl Stepper<'_> {
    fn f(&self, x: &[Vec2]) -> Vec<Vec2> {
        velocities_at(self.kernel, self.eps, x, self.circulations)
    }

    fn euler(&self, x: &[Vec2], h: f64) -> Vec<Vec2> {
        axpy(x, h, &self.f(x))
    }

    fn rk4(&self, x: &[Vec2], h: f64) -> Vec<Vec2> {
        let k1 = self.f(x);
        let k2 = self.f(&axpy(x, 0.5 * h, &k1));
        let k3 = self.f(&axpy(x, 0.5 * h, &k2));
        let k4 = self.f(&axpy(x, h, &k3));
        x.iter()
            .enumerate()
            .map(|(i, &xi)| xi + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0))
            .collect()
    }

    /// Dormand-Prince 5(4) step: returns the fifth-order state and the error vector.
    fn dopri(&self, x: &[Vec2], h: f64) -> (Vec<Vec2>, Vec<Vec2>) {
        const A: [[f64; 6]; 6] = [
            [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
            [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
            [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
            [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
            [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
        ];
        const E: [f64; 7] = [
            71.0 / 57600.0,
            0.0,
            -71.0 / 16695.0,
            71.0 / 1920.0,
            -17253.0 / 339200.0,
            22.0 / 525.0,
            -1.0 / 40.0,
        ];
        let mut k: Vec<Vec<Vec2>> = Vec::with_capacity(7);
        k.push(self.f(x));
        for row in A.iter() {
            let stage: Vec<Vec2> = (0..x.len())
                .map(|i| {
                    let mut acc = Vec2::ZERO;
                    for (j, a) in row.iter().enumerate().take(k.len()) {
                        acc += k[j][i] * *a;
                    }
                    x[i] + acc * h
                })
                .collect();
            k.push(self.f(&stage));
        }
        // the last stage is evaluated at the fifth-order solution (FSAL)
        let new: Vec<Vec2> = {
            let row = &A[5];
            (0..x.len())
                .map(|i| {
                    let mut acc = Vec2::ZERO;
                    for (j, a) in row.iter().enumerate() {
                        acc += k[j][i] * *a;
                    }
                    x[i] + acc * h
                })
                .collect()
        };
        let err = (0..x.len())
            .map(|i| {
                let mut acc = Vec2::ZERO;
                for (j, e) in E.iter().enumerate() {
                    acc += k[j][i] * *e;
                }
                acc * h
            })
            .collect();
        (new, err)
    }
}

/// Advances `system` to `cfg.t_end`, storing the initial state, every
/// `snapshot_stride`-th step and the final state; `observer` sees each stored snapshot.
pub fn integrate(
    system: &VortexSystem,
    cfg: &IntegratorConfig,
    observer: &mut dyn Observer,
) -> Result<Trajectory> {
    cfg.validate()?;
    rhs(system)?;
    let t0 = system.time();
    let mut traj = Trajectory::new(system);
    observer.observe(&traj.first())?;
    let stepper = Stepper {
        kernel: system.kernel(),
        eps: system.eps(),
        circulations: system.circulations(),
    };
    let mut x = system.positions().to_vec();

    let mut store = |traj: &mut Trajectory, t: f64, x: &[Vec2]| -> Result<()> {
        traj.push(t, x.to_vec())?;
        observer.observe(&traj.last())
    };

    match cfg.scheme {
        Scheme::Rk4 | Scheme::Euler => {
            let n_steps = ((cfg.t_end / cfg.dt) - 1e-9).ceil().max(1.0) as usize;
            for step in 1..=n_steps {
                let t_prev = t0 + (step - 1) as f64 * cfg.dt;
                let t = if step == n_steps { t0 + cfg.t_end } else { t0 + step as f64 * cfg.dt };
                let h = t - t_prev;
                x = match cfg.scheme {
                    Scheme::Rk4 => stepper.rk4(&x, h),
                    _ => stepper.euler(&x, h),
                };
                check_state(&x, t)?;
                if step % cfg.snapshot_stride == 0 || step == n_steps {
                    store(&mut traj, t, &x)?;
                }
            }
        }
        Scheme::Rk45Adaptive => {
            let t_final = t0 + cfg.t_end;
            let mut t = t0;
            let mut h = cfg.dt.min(cfg.t_end);
            let mut accepted = 0usize;
            let mut rejected_in_row = 0usize;
            while t < t_final {
                let last = t + h >= t_final;
                if last {
                    h = t_final - t;
                }
                let (candidate, err) = stepper.dopri(&x, h);
                let norm = x
                    .iter()
                    .zip(&candidate)
                    .zip(&err)
                    .map(|((a, b), e)| {
                        let scale = cfg.abs_tol + cfg.rel_tol * a.norm().max(b.norm());
                        e.norm() / scale
                    })
                    .fold(0.0, f64::max);
                if !norm.is_finite() {
                    return Err(Error::BlowUp { t, reason: "non-finite error estimate".into() });
                }
                if norm <= 1.0 {
                    t = if last { t_final } else { t + h };
                    x = candidate;
                    check_state(&x, t)?;
                    accepted += 1;
                    rejected_in_row = 0;
                    if accepted % cfg.snapshot_stride == 0 || t >= t_final {
                        store(&mut traj, t, &x)?;
                    }
                } else {
                    rejected_in_row += 1;
                    if rejected_in_row > 50 {
                        return Err(Error::BlowUp { t, reason: "step size underflow".into() });
                    }
                }
                let factor = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
                h *= factor;
            }
        }
    }
    Ok(traj)
}

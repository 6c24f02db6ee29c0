//! ε-family experiments: coupled `(eps_j, eta_j = c eps_j)` runs and Cauchy
//! differences of their velocity fields.
//!
//! Weak L²_loc convergence cannot be observed from finitely many samples, so the
//! harness measures the stronger discrete L²(B_R) Cauchy criterion.

use std::path::Path;

use serde::Serialize;

use crate::diagnostics::{conserved_quantities, vorticity_maximal, DiagnosticsRecord};
use crate::discretization::{discretize, InitialVorticity, Rect, VortexSystem};
use crate::dynamics::{integrate, velocity_field, IntegratorConfig, Scheme, Trajectory};
use crate::error::{Error, Result};
use crate::io;
use crate::kernels::{biot_savart, SmoothingKernel};
use crate::vec2::Vec2;

pub const CRITERION_LABEL: &str =
    "discrete L2(B_R) Cauchy differences of sampled velocity (strong surrogate for weak L2_loc convergence)";

/// Cell-centred sample points covering `rect` with spacing close to `resolution`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SampleGrid {
    pub rect: Rect,
    pub nx: usize,
    pub ny: usize,
}

impl SampleGrid {
    pub fn new(rect: Rect, resolution: f64) -> Result<Self> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::invalid("sample_grid.resolution", "must be positive"));
        }
        let nx = (rect.width() / resolution).round().max(1.0) as usize;
        let ny = (rect.height() / resolution).round().max(1.0) as usize;
        if nx.saturating_mul(ny) > 50_000_000 {
            return Err(Error::invalid("sample_grid.resolution", "grid exceeds 5e7 points"));
        }
        Ok(SampleGrid { rect, nx, ny })
    }

    pub fn spacing(&self) -> Vec2 {
        Vec2::new(self.rect.width() / self.nx as f64, self.rect.height() / self.ny as f64)
    }

    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h.x * h.y
    }

    /// Row-major points, x fastest.
    pub fn points(&self) -> Vec<Vec2> {
        let h = self.spacing();
        let mut pts = Vec::with_capacity(self.nx * self.ny);
        for j in 0..self.ny {
            for i in 0..self.nx {
                pts.push(Vec2::new(
                    self.rect.min.x + (i as f64 + 0.5) * h.x,
                    self.rect.min.y + (j as f64 + 0.5) * h.y,
                ));
            }
        }
        pts
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GriddedField {
    pub grid: SampleGrid,
    pub values: Vec<Vec2>,
}

impl GriddedField {
    pub fn sample(system: &VortexSystem, grid: SampleGrid) -> Self {
        GriddedField { grid, values: velocity_field(system, &grid.points()) }
    }
}

/// `sqrt(sum_{|x| < R} |a - b|^2 * cell_area)` over the shared grid.
pub fn l2_local_diff(a: &GriddedField, b: &GriddedField, radius: f64) -> Result<f64> {
    if a.grid != b.grid || a.values.len() != b.values.len() {
        return Err(Error::invalid("field", "l2_local_diff needs fields on identical grids"));
    }
    let mut acc = 0.0;
    for ((p, u), v) in a.grid.points().iter().zip(&a.values).zip(&b.values) {
        if p.norm() < radius {
            acc += (*u - *v).norm_sq();
        }
    }
    Ok((acc * a.grid.cell_area()).sqrt())
}

#[derive(Clone, Debug)]
pub struct ConvergenceConfig {
    pub kernel: SmoothingKernel,
    pub initial: InitialVorticity,
    /// Free-form description of the initial data for the summary.
    pub initial_label: String,
    pub eps_list: Vec<f64>,
    /// `c` in `eta = c * eps`; sheets get `ceil(parameter length / eta)` markers.
    pub grid_ratio: f64,
    pub drop_tol: f64,
    pub scheme: Scheme,
    pub t_end: f64,
    pub dt: f64,
    pub snapshot_stride: usize,
    pub sample_grid: SampleGrid,
    pub local_radius: f64,
    /// Times at which velocities are sampled; each must be a stored snapshot time.
    pub sample_times: Vec<f64>,
    pub vmf_radii: Vec<f64>,
    pub kernel_limit_check: bool,
}

impl ConvergenceConfig {
    pub fn new(kernel: SmoothingKernel, initial: InitialVorticity, eps_list: Vec<f64>) -> Result<Self> {
        let label = initial.label().to_string();
        let cfg = ConvergenceConfig {
            kernel,
            initial,
            initial_label: label,
            eps_list,
            grid_ratio: 1.0,
            drop_tol: 0.0,
            scheme: Scheme::Rk4,
            t_end: 1.0,
            dt: 0.05,
            snapshot_stride: usize::MAX,
            sample_grid: SampleGrid::new(Rect::square(2.0), 0.05)?,
            local_radius: 2.0,
            sample_times: vec![1.0],
            vmf_radii: vec![0.02, 0.05, 0.1, 0.2],
            kernel_limit_check: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_list.is_empty() {
            return Err(Error::invalid("eps_list", "must not be empty"));
        }
        if self.eps_list.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(Error::invalid("eps_list", "entries must be positive"));
        }
        if self.eps_list.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::invalid("eps_list", "must be strictly decreasing"));
        }
        if !(self.grid_ratio > 0.0) || !self.grid_ratio.is_finite() {
            return Err(Error::invalid("grid_ratio", "must be positive"));
        }
        if !(self.local_radius > 0.0) {
            return Err(Error::invalid("local_radius", "must be positive"));
        }
        if !(self.drop_tol >= 0.0) {
            return Err(Error::invalid("drop_tol", "must be nonnegative"));
        }
        if self.sample_times.iter().any(|t| !(*t >= 0.0 && *t <= self.t_end)) {
            return Err(Error::invalid("sample_times", "must lie in [0, t_end]"));
        }
        self.integrator().validate()
    }

    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            scheme: self.scheme,
            dt: self.dt,
            t_end: self.t_end,
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            snapshot_stride: self.snapshot_stride.max(1),
        }
    }

    fn eta(&self, eps: f64) -> f64 {
        self.grid_ratio * eps
    }

    fn discretize(&self, eps: f64) -> Result<VortexSystem> {
        let eta = self.eta(eps);
        let markers = match &self.initial {
            InitialVorticity::SheetCurve(s) => ((s.param_range.1 - s.param_range.0) / eta).ceil().max(1.0) as usize,
            InitialVorticity::AreaDensity(_) => 0,
        };
        let pv = discretize(&self.initial, eta, markers, self.drop_tol)?;
        Ok(pv.into_system(self.kernel.clone(), eps)?.with_grid_size(Some(eta)))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MemberRun {
    pub eps: f64,
    pub eta: f64,
    pub eta_over_eps: f64,
    pub n_vortices: usize,
    pub final_diagnostics: DiagnosticsRecord,
    #[serde(skip)]
    pub diagnostics: Vec<DiagnosticsRecord>,
    #[serde(skip)]
    pub trajectory: Trajectory,
    /// Velocity samples `(t, field)`, in `sample_times` order.
    #[serde(skip)]
    pub velocity: Vec<(f64, GriddedField)>,
    /// `(t, r, M(r))` at every stored snapshot; empty for signed data.
    #[serde(skip)]
    pub vmf: Vec<(f64, f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairwiseDistance {
    pub t: f64,
    pub eps_a: f64,
    pub eps_b: f64,
    pub l2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub t: f64,
    /// Least-squares slope of `log d_j` against `log eps_j`.
    pub exponent: f64,
    pub strictly_decreasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelLimitCheck {
    pub eta: f64,
    pub n_vortices: usize,
    pub excluded_points: usize,
    /// `(eps, ||u^eps - u^0||)` on frozen positions.
    pub distances: Vec<(f64, f64)>,
    pub strictly_decreasing: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub criterion: String,
    pub kernel: String,
    pub initial_data: String,
    pub grid_ratio: f64,
    pub local_radius: f64,
    pub sample_grid: SampleGrid,
    pub t_end: f64,
    pub dt: f64,
    pub members: Vec<MemberRun>,
    pub pairwise: Vec<PairwiseDistance>,
    pub rates: Vec<RateFit>,
    pub kernel_limit: Option<KernelLimitCheck>,
    pub failure: Option<String>,
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn run_member(cfg: &ConvergenceConfig, eps: f64) -> Result<MemberRun> {
    let system = cfg.discretize(eps)?;
    let signed = !system.all_nonnegative();
    let mut diagnostics = Vec::new();
    let mut vmf = Vec::new();
    let mut velocity = Vec::new();
    let span = cfg.t_end.max(1.0);
    let trajectory = integrate(&system, &cfg.integrator(), &mut |snap: &VortexSystem| {
        diagnostics.push(conserved_quantities(snap));
        if !signed && !cfg.vmf_radii.is_empty() {
            for (r, m) in vorticity_maximal(snap, &cfg.vmf_radii)? {
                vmf.push((snap.time(), r, m));
            }
        }
        for &ts in &cfg.sample_times {
            if (snap.time() - ts).abs() <= 1e-9 * span {
                velocity.push((ts, GriddedField::sample(snap, cfg.sample_grid)));
            }
        }
        Ok(())
    })?;
    velocity.sort_by(|a, b| a.0.total_cmp(&b.0));
    for &ts in &cfg.sample_times {
        if !velocity.iter().any(|(t, _)| *t == ts) {
            return Err(Error::invalid(
                "sample_times",
                format!("t = {ts:e} is not a stored snapshot; align it with dt * snapshot_stride"),
            ));
        }
    }
    let mut final_diagnostics = diagnostics.last().cloned().expect("at least one snapshot");
    final_diagnostics.vmf_samples = vmf
        .iter()
        .filter(|(t, _, _)| *t == final_diagnostics.t)
        .map(|(_, r, m)| (*r, *m))
        .collect();
    let eta = cfg.eta(eps);
    Ok(MemberRun {
        eps,
        eta,
        eta_over_eps: eta / eps,
        n_vortices: system.len(),
        final_diagnostics,
        diagnostics,
        trajectory,
        velocity,
        vmf,
    })
}

/// Distances of filtered fields to the unfiltered point-vortex field on the frozen
/// discretization at the finest grid size. Sample points within `1e-12` of a
/// vortex are excluded.
pub fn kernel_limit_check(cfg: &ConvergenceConfig) -> Result<KernelLimitCheck> {
    let eps_min = *cfg.eps_list.last().expect("validated");
    let base = cfg.discretize(eps_min)?;
    let pts = cfg.sample_grid.points();
    let keep: Vec<bool> = pts
        .iter()
        .map(|p| p.norm() < cfg.local_radius && base.positions().iter().all(|x| (*p - *x).norm() > 1e-12))
        .collect();
    let excluded = pts.iter().zip(&keep).filter(|(p, k)| p.norm() < cfg.local_radius && !**k).count();
    let u0: Vec<Vec2> = pts
        .iter()
        .map(|&p| {
            base.positions()
                .iter()
                .zip(base.circulations())
                .fold(Vec2::ZERO, |acc, (&x, &g)| acc + biot_savart(p - x) * g)
        })
        .collect();
    let area = cfg.sample_grid.cell_area();
    let mut distances = Vec::new();
    for &eps in &cfg.eps_list {
        let sys = VortexSystem::new(base.positions().to_vec(), base.circulations().to_vec(), eps, cfg.kernel.clone())?;
        let u = velocity_field(&sys, &pts);
        let sq: f64 = u.iter().zip(&u0).zip(&keep).filter(|(_, k)| **k).map(|((a, b), _)| (*a - *b).norm_sq()).sum();
        distances.push((eps, (sq * area).sqrt()));
    }
    let strictly_decreasing = distances.windows(2).all(|w| w[1].1 < w[0].1);
    Ok(KernelLimitCheck {
        eta: cfg.eta(eps_min),
        n_vortices: base.len(),
        excluded_points: excluded,
        distances,
        strictly_decreasing,
    })
}

/// Runs every member in `eps_list` order. Member failures end the sweep and are
/// recorded in [`ConvergenceReport::failure`]; invalid configurations are errors.
pub fn run_family(cfg: &ConvergenceConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let mut report = ConvergenceReport {
        criterion: CRITERION_LABEL.into(),
        kernel: cfg.kernel.name().into(),
        initial_data: cfg.initial_label.clone(),
        grid_ratio: cfg.grid_ratio,
        local_radius: cfg.local_radius,
        sample_grid: cfg.sample_grid,
        t_end: cfg.t_end,
        dt: cfg.dt,
        members: Vec::new(),
        pairwise: Vec::new(),
        rates: Vec::new(),
        kernel_limit: None,
        failure: None,
    };
    for &eps in &cfg.eps_list {
        match run_member(cfg, eps) {
            Ok(m) => report.members.push(m),
            Err(e) => {
                report.failure = Some(format!("run at eps = {eps:e} failed: {e}"));
                break;
            }
        }
    }
    for pair in report.members.windows(2) {
        for ((t, a), (_, b)) in pair[0].velocity.iter().zip(&pair[1].velocity) {
            report.pairwise.push(PairwiseDistance {
                t: *t,
                eps_a: pair[0].eps,
                eps_b: pair[1].eps,
                l2: l2_local_diff(a, b, cfg.local_radius)?,
            });
        }
    }
    for &t in &cfg.sample_times {
        let rows: Vec<&PairwiseDistance> = report.pairwise.iter().filter(|p| p.t == t).collect();
        if rows.len() >= 2 {
            let xs: Vec<f64> = rows.iter().map(|p| p.eps_a.ln()).collect();
            let ys: Vec<f64> = rows.iter().map(|p| p.l2.ln()).collect();
            report.rates.push(RateFit {
                t,
                exponent: fit_slope(&xs, &ys),
                strictly_decreasing: rows.windows(2).all(|w| w[1].l2 < w[0].l2),
            });
        }
    }
    if cfg.kernel_limit_check && report.failure.is_none() {
        match kernel_limit_check(cfg) {
            Ok(k) => report.kernel_limit = Some(k),
            Err(e) => report.failure = Some(format!("kernel-limit check failed: {e}")),
        }
    }
    Ok(report)
}

impl ConvergenceReport {
    /// True when every successive difference shrinks at every sample time.
    pub fn strictly_decreasing(&self) -> bool {
        self.rates.iter().all(|r| r.strictly_decreasing)
            && (self.pairwise.len() < 2 || !self.rates.is_empty())
    }

    /// Writes per-run trajectory, diagnostics, VMF and velocity files, the pairwise
    /// table and `summary.json` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (j, m) in self.members.iter().enumerate() {
            let stem = format!("run{j}_eps_{}", io::fmt_f64(m.eps));
            io::write_trajectory(&dir.join(format!("{stem}_trajectory.txt")), &m.trajectory)?;
            io::write_diagnostics(&dir.join(format!("{stem}_diagnostics.txt")), &m.diagnostics)?;
            if !m.vmf.is_empty() {
                io::write_vmf(&dir.join(format!("{stem}_vmf.txt")), &m.vmf)?;
            }
            let mut text = String::from("# columns: t x y ux uy\n");
            for (t, field) in &m.velocity {
                for (p, u) in field.grid.points().iter().zip(&field.values) {
                    text.push_str(&format!(
                        "{} {} {} {} {}\n",
                        io::fmt_f64(*t),
                        io::fmt_f64(p.x),
                        io::fmt_f64(p.y),
                        io::fmt_f64(u.x),
                        io::fmt_f64(u.y)
                    ));
                }
            }
            io::write_text(&dir.join(format!("{stem}_velocity.txt")), &text)?;
        }
        let mut table = String::from("# columns: t eps_a eps_b l2\n");
        for p in &self.pairwise {
            table.push_str(&format!(
                "{} {} {} {}\n",
                io::fmt_f64(p.t),
                io::fmt_f64(p.eps_a),
                io::fmt_f64(p.eps_b),
                io::fmt_f64(p.l2)
            ));
        }
        io::write_text(&dir.join("pairwise.txt"), &table)?;
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Diagnostic(format!("cannot serialize the summary: {e}")))?;
        io::write_text(&dir.join("summary.json"), &(json + "\n"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::builtin_initial_data;
    use crate::kernels::make_blob_kernel;
    use std::collections::BTreeMap;

    fn field(grid: SampleGrid, u: Vec2) -> GriddedField {
        GriddedField { grid, values: vec![u; grid.nx * grid.ny] }
    }

    #[test]
    fn l2_examples() {
        let grid = SampleGrid::new(Rect::square(2.0), 0.01).unwrap();
        let a = field(grid, Vec2::new(0.3, 0.1));
        assert_eq!(l2_local_diff(&a, &a, 1.5).unwrap(), 0.0);
        let b = field(grid, Vec2::new(0.3, 1.1));
        let area = std::f64::consts::PI * 1.5 * 1.5;
        assert!((l2_local_diff(&a, &b, 1.5).unwrap() - area.sqrt()).abs() < 2e-3);
        let other = SampleGrid::new(Rect::square(2.0), 0.02).unwrap();
        assert!(l2_local_diff(&a, &field(other, Vec2::ZERO), 1.0).is_err());
    }

    #[test]
    fn config_validation() {
        let iv = builtin_initial_data("gaussian_patch", &BTreeMap::new()).unwrap();
        assert!(ConvergenceConfig::new(make_blob_kernel(), iv.clone(), vec![0.2, 0.4]).is_err());
        assert!(ConvergenceConfig::new(make_blob_kernel(), iv.clone(), vec![]).is_err());
        let mut cfg = ConvergenceConfig::new(make_blob_kernel(), iv, vec![0.4, 0.2]).unwrap();
        cfg.grid_ratio = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn single_member_has_no_pairwise_section() {
        let mut params = BTreeMap::new();
        params.insert("radius".to_string(), 0.5);
        let iv = builtin_initial_data("uniform_patch", &params).unwrap();
        let mut cfg = ConvergenceConfig::new(make_blob_kernel(), iv, vec![0.5]).unwrap();
        cfg.t_end = 0.2;
        cfg.dt = 0.1;
        cfg.sample_times = vec![0.2];
        cfg.sample_grid = SampleGrid::new(Rect::square(1.0), 0.1).unwrap();
        let rep = run_family(&cfg).unwrap();
        assert!(rep.failure.is_none(), "{:?}", rep.failure);
        assert!(rep.pairwise.is_empty() && rep.rates.is_empty());
        assert_eq!(rep.members[0].eta_over_eps, 1.0);
        assert!(rep.strictly_decreasing());
    }

    #[test]
    fn misaligned_sample_time_is_a_member_failure() {
        let iv = builtin_initial_data("uniform_patch", &BTreeMap::new()).unwrap();
        let mut cfg = ConvergenceConfig::new(make_blob_kernel(), iv, vec![1.0]).unwrap();
        cfg.t_end = 0.2;
        cfg.dt = 0.1;
        cfg.sample_times = vec![0.15];
        let rep = run_family(&cfg).unwrap();
        assert!(rep.failure.unwrap().contains("sample_times"));
    }
}

//! Initial vorticity and its point-vortex discretization.
//!
//! Area densities are sampled on squares of side `eta` centred at `j * eta` for
//! integer pairs `j`; each square contributes one vortex at its centre carrying the
//! circulation inside it. Sheets are cut into pieces of equal circulation with one
//! marker per piece.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::SmoothingKernel;
use crate::quadrature::{self, AdaptiveConfig, GAUSS4_NODES, GAUSS4_WEIGHTS};
use crate::vec2::Vec2;

pub type DensityFn = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;
pub type CurveFn = Arc<dyn Fn(f64) -> Vec2 + Send + Sync>;
pub type LineDensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn new(min: Vec2, max: Vec2) -> Result<Self> {
        if !(max.x > min.x && max.y > min.y) || !min.is_finite() || !max.is_finite() {
            return Err(Error::invalid("support_box", format!("degenerate box {min:?}..{max:?}")));
        }
        Ok(Rect { min, max })
    }

    pub fn square(half: f64) -> Self {
        Rect {
            min: Vec2::new(-half, -half),
            max: Vec2::new(half, half),
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Nonnegative,
    Signed,
}

/// Vorticity with a density per unit area.
#[derive(Clone)]
pub struct AreaDensity {
    pub label: String,
    pub density: DensityFn,
    pub support_box: Rect,
    pub sign: Sign,
}

/// Vorticity concentrated on a curve `s -> curve(s)`, `s` in `param_range`, with
/// circulation `line_density(s) ds` on each parameter element.
#[derive(Clone)]
pub struct SheetCurve {
    pub label: String,
    pub curve: CurveFn,
    pub line_density: LineDensityFn,
    pub param_range: (f64, f64),
    pub support_box: Rect,
    pub sign: Sign,
}

#[derive(Clone)]
pub enum InitialVorticity {
    AreaDensity(AreaDensity),
    SheetCurve(SheetCurve),
}

impl std::fmt::Debug for InitialVorticity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (kind, label, bx) = match self {
            InitialVorticity::AreaDensity(a) => ("area_density", &a.label, a.support_box),
            InitialVorticity::SheetCurve(s) => ("sheet_curve", &s.label, s.support_box),
        };
        write!(f, "InitialVorticity({kind}: {label}, box {:?}..{:?})", bx.min, bx.max)
    }
}

impl InitialVorticity {
    pub fn label(&self) -> &str {
        match self {
            InitialVorticity::AreaDensity(a) => &a.label,
            InitialVorticity::SheetCurve(s) => &s.label,
        }
    }

    pub fn support_box(&self) -> Rect {
        match self {
            InitialVorticity::AreaDensity(a) => a.support_box,
            InitialVorticity::SheetCurve(s) => s.support_box,
        }
    }

    pub fn sign(&self) -> Sign {
        match self {
            InitialVorticity::AreaDensity(a) => a.sign,
            InitialVorticity::SheetCurve(s) => s.sign,
        }
    }

    pub fn is_sheet(&self) -> bool {
        matches!(self, InitialVorticity::SheetCurve(_))
    }
}

/// Placement of the sampling squares.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GridAnchor {
    /// Squares centred at integer multiples of `eta`.
    #[default]
    Integer,
    /// Squares tiling the support box from its lower-left corner.
    BoxCorner,
}

/// Point vortices produced from an [`InitialVorticity`], before a kernel and
/// regularization scale are attached.
#[derive(Clone, Debug)]
pub struct PointVortices {
    pub positions: Vec<Vec2>,
    pub circulations: Vec<f64>,
    /// Sampling square side, for area densities.
    pub grid_size: Option<f64>,
    pub warnings: Vec<String>,
}

impl PointVortices {
    pub fn total_circulation(&self) -> f64 {
        self.circulations.iter().sum()
    }

    pub fn into_system(self, kernel: SmoothingKernel, eps: f64) -> Result<VortexSystem> {
        let mut sys = VortexSystem::new(self.positions, self.circulations, eps, kernel)?;
        sys.grid_size = self.grid_size;
        Ok(sys)
    }
}

/// N point vortices evolving under a filtered kernel at scale `eps`.
#[derive(Clone, Debug)]
pub struct VortexSystem {
    positions: Vec<Vec2>,
    circulations: Vec<f64>,
    eps: f64,
    kernel: SmoothingKernel,
    time: f64,
    grid_size: Option<f64>,
}

impl VortexSystem {
    pub fn new(
        positions: Vec<Vec2>,
        circulations: Vec<f64>,
        eps: f64,
        kernel: SmoothingKernel,
    ) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::invalid("positions", "a vortex system needs at least one vortex"));
        }
        if positions.len() != circulations.len() {
            return Err(Error::invalid(
                "circulations",
                format!("{} positions but {} circulations", positions.len(), circulations.len()),
            ));
        }
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::invalid("eps", format!("must be positive and finite, got {eps}")));
        }
        if let Some(i) = positions.iter().position(|p| !p.is_finite()) {
            return Err(Error::invalid("positions", format!("vortex {i} has a non-finite position")));
        }
        if let Some(i) = circulations.iter().position(|g| !g.is_finite()) {
            return Err(Error::invalid("circulations", format!("vortex {i} has a non-finite circulation")));
        }
        Ok(VortexSystem {
            positions,
            circulations,
            eps,
            kernel,
            time: 0.0,
            grid_size: None,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec2] {
        &self.positions
    }

    pub fn circulations(&self) -> &[f64] {
        &self.circulations
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn kernel(&self) -> &SmoothingKernel {
        &self.kernel
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Sampling square side the system was generated with, if any.
    pub fn grid_size(&self) -> Option<f64> {
        self.grid_size
    }

    pub fn with_grid_size(mut self, eta: Option<f64>) -> Self {
        self.grid_size = eta;
        self
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time = t;
        self
    }

    /// Same vortices at new positions and time.
    pub fn advanced(&self, positions: Vec<Vec2>, time: f64) -> Self {
        debug_assert_eq!(positions.len(), self.positions.len());
        VortexSystem {
            positions,
            circulations: self.circulations.clone(),
            eps: self.eps,
            kernel: self.kernel.clone(),
            time,
            grid_size: self.grid_size,
        }
    }

    /// Same positions with every circulation negated (time reversal).
    pub fn reversed(&self) -> Self {
        VortexSystem {
            circulations: self.circulations.iter().map(|g| -g).collect(),
            ..self.clone()
        }
    }

    pub fn all_nonnegative(&self) -> bool {
        self.circulations.iter().all(|&g| g >= 0.0)
    }
}

/// Samples an area density on squares of side `eta` centred at `j * eta`.
pub fn discretize_density(iv: &InitialVorticity, eta: f64, drop_tol: f64) -> Result<PointVortices> {
    discretize_density_anchored(iv, eta, drop_tol, GridAnchor::Integer)
}

/// [`discretize_density`] with an explicit grid anchoring.
pub fn discretize_density_anchored(
    iv: &InitialVorticity,
    eta: f64,
    drop_tol: f64,
    anchor: GridAnchor,
) -> Result<PointVortices> {
    let area = match iv {
        InitialVorticity::AreaDensity(a) => a,
        InitialVorticity::SheetCurve(_) => {
            return Err(Error::invalid("initial vorticity", "discretize_density needs an area density"))
        }
    };
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::invalid("eta", format!("grid size must be positive, got {eta}")));
    }
    if !(drop_tol >= 0.0) {
        return Err(Error::invalid("drop_tol", format!("must be nonnegative, got {drop_tol}")));
    }
    let bx = area.support_box;
    let mut warnings = Vec::new();
    if eta > bx.width() && eta > bx.height() {
        warnings.push(format!(
            "grid size {eta} exceeds the support box; the density collapses to very few cells"
        ));
    }

    // cell index ranges and the cell -> (centre, clipped extent) map along one axis
    let axis = |lo: f64, hi: f64| -> Vec<(f64, f64, f64)> {
        match anchor {
            GridAnchor::Integer => {
                let j_min = (lo / eta - 0.5).floor() as i64 + 1;
                let j_max = (hi / eta + 0.5).ceil() as i64 - 1;
                (j_min..=j_max)
                    .filter_map(|j| {
                        let c = j as f64 * eta;
                        let a = (c - 0.5 * eta).max(lo);
                        let b = (c + 0.5 * eta).min(hi);
                        (b > a).then_some((c, a, b))
                    })
                    .collect()
            }
            GridAnchor::BoxCorner => {
                let n = ((hi - lo) / eta - 1e-12).ceil().max(1.0) as usize;
                (0..n)
                    .map(|k| {
                        let a = lo + k as f64 * eta;
                        (a + 0.5 * eta, a, (a + eta).min(hi))
                    })
                    .collect()
            }
        }
    };
    let xs = axis(bx.min.x, bx.max.x);
    let ys = axis(bx.min.y, bx.max.y);

    let density = &area.density;
    let rows: Vec<Result<Vec<(Vec2, f64)>>> = ys
        .par_iter()
        .map(|&(cy, ya, yb)| {
            let mut row = Vec::with_capacity(xs.len());
            for &(cx, xa, xb) in &xs {
                let (hx, mx) = (0.5 * (xb - xa), 0.5 * (xa + xb));
                let (hy, my) = (0.5 * (yb - ya), 0.5 * (ya + yb));
                let mut gamma = 0.0;
                for (gy, wy) in GAUSS4_NODES.iter().zip(GAUSS4_WEIGHTS) {
                    for (gx, wx) in GAUSS4_NODES.iter().zip(GAUSS4_WEIGHTS) {
                        let q = density(Vec2::new(mx + hx * gx, my + hy * gy));
                        if !q.is_finite() {
                            return Err(Error::invalid("density", "non-finite density value"));
                        }
                        if area.sign == Sign::Nonnegative && q < 0.0 {
                            return Err(Error::invalid(
                                "density",
                                format!("negative value {q} in a density declared nonnegative"),
                            ));
                        }
                        gamma += wx * wy * q;
                    }
                }
                row.push((Vec2::new(cx, cy), gamma * hx * hy));
            }
            Ok(row)
        })
        .collect();

    let threshold = drop_tol * eta * eta;
    let mut positions = Vec::new();
    let mut circulations = Vec::new();
    let mut dropped = 0usize;
    for row in rows {
        for (c, g) in row? {
            if g.abs() < threshold {
                dropped += 1;
            } else {
                positions.push(c);
                circulations.push(g);
            }
        }
    }
    if positions.is_empty() {
        return Err(Error::invalid(
            "drop_tol",
            format!("all {dropped} cells fell below the drop threshold"),
        ));
    }
    if dropped > 0 {
        warnings.push(format!("dropped {dropped} cells below |gamma| < {threshold:e}"));
    }
    Ok(PointVortices {
        positions,
        circulations,
        grid_size: Some(eta),
        warnings,
    })
}

/// Places `n_markers` markers along a sheet at equal circulation increments, each at
/// the curve point of its circulation midpoint. Signed sheets fall back to
/// equal-parameter pieces carrying their own circulation.
pub fn discretize_sheet(iv: &InitialVorticity, n_markers: usize) -> Result<PointVortices> {
    let sheet = match iv {
        InitialVorticity::SheetCurve(s) => s,
        InitialVorticity::AreaDensity(_) => {
            return Err(Error::invalid("initial vorticity", "discretize_sheet needs a sheet curve"))
        }
    };
    if n_markers < 2 {
        return Err(Error::invalid("n_markers", format!("need at least 2 markers, got {n_markers}")));
    }
    let (a, b) = sheet.param_range;
    if !(b > a) {
        return Err(Error::invalid("param_range", format!("empty parameter interval [{a}, {b}]")));
    }
    let cfg = AdaptiveConfig {
        abs_tol: 1e-13,
        rel_tol: 1e-13,
        max_panels: 4000,
    };
    // s = a + (b - a)(1 - cos theta)/2 absorbs inverse-square-root loading at the ends
    let half = 0.5 * (b - a);
    let to_s = move |theta: f64| a + half * (1.0 - theta.cos());
    let to_theta = move |s: f64| (1.0 - (s - a) / half).clamp(-1.0, 1.0).acos();
    let density = |theta: f64| (sheet.line_density)(to_s(theta)) * half * theta.sin();

    // cumulative circulation on panels in theta, refined by bisection inside a panel
    let panels = 16 * n_markers;
    let edges: Vec<f64> = (0..=panels).map(|i| PI * i as f64 / panels as f64).collect();
    let mut cumulative = vec![0.0];
    for w in edges.windows(2) {
        let last = *cumulative.last().unwrap();
        cumulative.push(last + quadrature::integrate(density, w[0], w[1], cfg)?);
    }
    let total = *cumulative.last().unwrap();

    let mut positions = Vec::with_capacity(n_markers);
    let mut circulations = Vec::with_capacity(n_markers);
    match sheet.sign {
        Sign::Nonnegative => {
            if !(total > 0.0) {
                return Err(Error::invalid("line_density", "nonnegative sheet has zero total circulation"));
            }
            let d_gamma = total / n_markers as f64;
            for k in 0..n_markers {
                let target = (k as f64 + 0.5) * d_gamma;
                let i = cumulative.partition_point(|&c| c < target).clamp(1, panels) - 1;
                let lo = edges[i];
                let base = cumulative[i];
                let theta = quadrature::bisect(
                    |t| base + quadrature::integrate(density, lo, t, cfg).unwrap_or(f64::NAN) - target,
                    lo,
                    edges[i + 1],
                );
                positions.push((sheet.curve)(to_s(theta)));
                circulations.push(d_gamma);
            }
        }
        Sign::Signed => {
            let step = (b - a) / n_markers as f64;
            for k in 0..n_markers {
                let lo = a + k as f64 * step;
                positions.push((sheet.curve)(lo + 0.5 * step));
                let (t0, t1) = (to_theta(lo), to_theta(lo + step));
                circulations.push(quadrature::integrate(density, t0, t1, cfg)?);
            }
        }
    }
    Ok(PointVortices {
        positions,
        circulations,
        grid_size: None,
        warnings: Vec::new(),
    })
}

/// Discretizes either kind of initial vorticity: densities with grid size `eta`,
/// sheets with `n_markers` markers.
pub fn discretize(iv: &InitialVorticity, eta: f64, n_markers: usize, drop_tol: f64) -> Result<PointVortices> {
    match iv {
        InitialVorticity::AreaDensity(_) => discretize_density(iv, eta, drop_tol),
        InitialVorticity::SheetCurve(_) => discretize_sheet(iv, n_markers),
    }
}

pub const BUILTIN_NAMES: [&str; 4] = ["uniform_patch", "gaussian_patch", "flat_sheet", "circular_sheet"];

fn take_params(
    name: &str,
    params: &BTreeMap<String, f64>,
    defaults: &[(&str, f64)],
) -> Result<Vec<f64>> {
    if let Some(unknown) = params.keys().find(|k| !defaults.iter().any(|(d, _)| d == k)) {
        let allowed: Vec<&str> = defaults.iter().map(|(d, _)| *d).collect();
        return Err(Error::invalid(
            format!("{name}.{unknown}"),
            format!("unknown parameter; {name} accepts {}", allowed.join(", ")),
        ));
    }
    Ok(defaults
        .iter()
        .map(|(k, d)| params.get(*k).copied().unwrap_or(*d))
        .collect())
}

fn positive(name: &str, key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(format!("{name}.{key}"), format!("must be positive, got {v}")))
    }
}

/// Built-in nonnegative, compactly supported initial data.
///
/// * `uniform_patch` (`radius` = 1, `strength` = 1): `strength` on the disc `|x| <= radius`.
/// * `gaussian_patch` (`strength` = 1, `width` = 1, `cutoff` = 6):
///   `strength * exp(-|x|^2 / width^2)` truncated at `|x| = cutoff * width`.
/// * `flat_sheet` (`half_length` = 1, `density` = 1): uniform sheet on the segment
///   `[-half_length, half_length] x {0}`.
/// * `circular_sheet` (`radius` = 1, `density` = 1): uniform sheet on the circle,
///   `density` being circulation per unit length.
pub fn builtin_initial_data(name: &str, params: &BTreeMap<String, f64>) -> Result<InitialVorticity> {
    match name {
        "uniform_patch" => {
            let p = take_params(name, params, &[("radius", 1.0), ("strength", 1.0)])?;
            let radius = positive(name, "radius", p[0])?;
            let strength = positive(name, "strength", p[1])?;
            let r2 = radius * radius;
            Ok(InitialVorticity::AreaDensity(AreaDensity {
                label: name.into(),
                density: Arc::new(move |x: Vec2| if x.norm_sq() <= r2 { strength } else { 0.0 }),
                support_box: Rect::square(radius),
                sign: Sign::Nonnegative,
            }))
        }
        "gaussian_patch" => {
            let p = take_params(name, params, &[("strength", 1.0), ("width", 1.0), ("cutoff", 6.0)])?;
            let strength = positive(name, "strength", p[0])?;
            let width = positive(name, "width", p[1])?;
            let cutoff = positive(name, "cutoff", p[2])? * width;
            let c2 = cutoff * cutoff;
            let w2 = width * width;
            Ok(InitialVorticity::AreaDensity(AreaDensity {
                label: name.into(),
                density: Arc::new(move |x: Vec2| {
                    let r2 = x.norm_sq();
                    if r2 <= c2 {
                        strength * (-r2 / w2).exp()
                    } else {
                        0.0
                    }
                }),
                support_box: Rect::square(cutoff),
                sign: Sign::Nonnegative,
            }))
        }
        "flat_sheet" => {
            let p = take_params(name, params, &[("half_length", 1.0), ("density", 1.0)])?;
            let half = positive(name, "half_length", p[0])?;
            let density = positive(name, "density", p[1])?;
            Ok(InitialVorticity::SheetCurve(SheetCurve {
                label: name.into(),
                curve: Arc::new(|s| Vec2::new(s, 0.0)),
                line_density: Arc::new(move |_| density),
                param_range: (-half, half),
                support_box: Rect {
                    min: Vec2::new(-half, -half * 1e-3),
                    max: Vec2::new(half, half * 1e-3),
                },
                sign: Sign::Nonnegative,
            }))
        }
        "circular_sheet" => {
            let p = take_params(name, params, &[("radius", 1.0), ("density", 1.0)])?;
            let radius = positive(name, "radius", p[0])?;
            let density = positive(name, "density", p[1])?;
            Ok(InitialVorticity::SheetCurve(SheetCurve {
                label: name.into(),
                curve: Arc::new(move |theta: f64| Vec2::new(radius * theta.cos(), radius * theta.sin())),
                line_density: Arc::new(move |_| density * radius),
                param_range: (0.0, 2.0 * PI),
                support_box: Rect::square(radius),
                sign: Sign::Nonnegative,
            }))
        }
        other => Err(Error::invalid(
            "initial.name",
            format!("unknown initial data '{other}'; available: {}", BUILTIN_NAMES.join(", ")),
        )),
    }
}

/// Reads a gridded density `(x, y, q)` text table on a regular grid and returns a
/// bilinearly interpolated area density supported on the grid extent.
pub fn load_density_table(path: &Path) -> Result<InitialVorticity> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                location: format!("{}:{}", path.display(), lineno + 1),
                reason: e.to_string(),
            })?;
        if cols.len() != 3 {
            return Err(Error::Parse {
                location: format!("{}:{}", path.display(), lineno + 1),
                reason: format!("expected 3 columns (x, y, q), found {}", cols.len()),
            });
        }
        rows.push((cols[0], cols[1], cols[2]));
    }
    density_from_grid(path.display().to_string(), &rows)
}

fn density_from_grid(label: String, rows: &[(f64, f64, f64)]) -> Result<InitialVorticity> {
    let mut xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mut ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
    for v in [&mut xs, &mut ys] {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup();
    }
    let (nx, ny) = (xs.len(), ys.len());
    if nx < 2 || ny < 2 || nx * ny != rows.len() {
        return Err(Error::invalid(
            "density table",
            format!("expected a full regular grid, got {} rows for {nx} x {ny} nodes", rows.len()),
        ));
    }
    let mut q = vec![f64::NAN; nx * ny];
    for &(x, y, v) in rows {
        let i = xs.partition_point(|&a| a < x);
        let j = ys.partition_point(|&a| a < y);
        q[j * nx + i] = v;
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("density table", "missing or non-finite grid values"));
    }
    let sign = if q.iter().all(|&v| v >= 0.0) {
        Sign::Nonnegative
    } else {
        Sign::Signed
    };
    let support_box = Rect::new(Vec2::new(xs[0], ys[0]), Vec2::new(xs[nx - 1], ys[ny - 1]))?;
    let density = move |p: Vec2| {
        if !support_box.contains(p) {
            return 0.0;
        }
        let i = xs.partition_point(|&a| a <= p.x).clamp(1, nx - 1) - 1;
        let j = ys.partition_point(|&a| a <= p.y).clamp(1, ny - 1) - 1;
        let tx = (p.x - xs[i]) / (xs[i + 1] - xs[i]);
        let ty = (p.y - ys[j]) / (ys[j + 1] - ys[j]);
        let at = |ii: usize, jj: usize| q[jj * nx + ii];
        (1.0 - ty) * ((1.0 - tx) * at(i, j) + tx * at(i + 1, j))
            + ty * ((1.0 - tx) * at(i, j + 1) + tx * at(i + 1, j + 1))
    };
    Ok(InitialVorticity::AreaDensity(AreaDensity {
        label,
        density: Arc::new(density),
        support_box,
        sign,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_params() -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    fn unit_square_density() -> InitialVorticity {
        InitialVorticity::AreaDensity(AreaDensity {
            label: "unit".into(),
            density: Arc::new(|_| 1.0),
            support_box: Rect::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0)).unwrap(),
            sign: Sign::Nonnegative,
        })
    }

    #[test]
    fn uniform_square_box_anchored() {
        let pv = discretize_density_anchored(&unit_square_density(), 0.5, 0.0, GridAnchor::BoxCorner).unwrap();
        assert_eq!(pv.positions.len(), 4);
        for (p, g) in pv.positions.iter().zip(&pv.circulations) {
            assert!((g - 0.25).abs() < 1e-15);
            assert!([0.25, 0.75].iter().any(|c| (p.x - c).abs() < 1e-15));
            assert!([0.25, 0.75].iter().any(|c| (p.y - c).abs() < 1e-15));
        }
    }

    #[test]
    fn uniform_square_integer_anchored() {
        let pv = discretize_density(&unit_square_density(), 0.5, 0.0).unwrap();
        // centres at 0, 0.5, 1 in each direction, cells clipped to the box
        assert_eq!(pv.positions.len(), 9);
        assert!((pv.total_circulation() - 1.0).abs() < 1e-14);
        for p in &pv.positions {
            assert!(((p.x / 0.5).round() * 0.5 - p.x).abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian_total_circulation() {
        let iv = InitialVorticity::AreaDensity(AreaDensity {
            label: "gauss".into(),
            density: Arc::new(|x: Vec2| (-x.norm_sq()).exp()),
            support_box: Rect::square(5.0),
            sign: Sign::Nonnegative,
        });
        let pv = discretize_density(&iv, 0.1, 0.0).unwrap();
        assert!((pv.total_circulation() - PI).abs() < 1e-6);
    }

    #[test]
    fn drop_tolerance_and_errors() {
        let iv = builtin_initial_data("uniform_patch", &no_params()).unwrap();
        let all = discretize_density(&iv, 0.25, 0.0).unwrap();
        let kept = discretize_density(&iv, 0.25, 0.5).unwrap();
        assert!(kept.positions.len() < all.positions.len());
        assert!(discretize_density(&iv, 0.25, 1e6).is_err());
        assert!(discretize_density(&iv, 0.0, 0.0).is_err());
        let wide = discretize_density(&iv, 5.0, 0.0).unwrap();
        assert!(!wide.warnings.is_empty());
        let sheet = builtin_initial_data("flat_sheet", &no_params()).unwrap();
        assert!(discretize_density(&sheet, 0.1, 0.0).is_err());
    }

    #[test]
    fn negative_density_rejected_when_declared_nonnegative() {
        let iv = InitialVorticity::AreaDensity(AreaDensity {
            label: "bad".into(),
            density: Arc::new(|x: Vec2| x.x),
            support_box: Rect::square(1.0),
            sign: Sign::Nonnegative,
        });
        assert!(discretize_density(&iv, 0.5, 0.0).is_err());
    }

    #[test]
    fn flat_sheet_markers() {
        let mut params = no_params();
        params.insert("density".into(), 0.5);
        let iv = builtin_initial_data("flat_sheet", &params).unwrap();
        let pv = discretize_sheet(&iv, 4).unwrap();
        let xs: Vec<f64> = pv.positions.iter().map(|p| p.x).collect();
        for (x, e) in xs.iter().zip([-0.75, -0.25, 0.25, 0.75]) {
            assert!((x - e).abs() < 1e-12, "{xs:?}");
        }
        assert!(pv.circulations.iter().all(|g| (g - 0.25).abs() < 1e-14));
    }

    #[test]
    fn circular_sheet_markers() {
        let iv = builtin_initial_data("circular_sheet", &no_params()).unwrap();
        let pv = discretize_sheet(&iv, 8).unwrap();
        for (k, p) in pv.positions.iter().enumerate() {
            let theta = PI / 8.0 + k as f64 * PI / 4.0;
            assert!((p.x - theta.cos()).abs() < 1e-12 && (p.y - theta.sin()).abs() < 1e-12);
        }
        let g0 = pv.circulations[0];
        assert!(pv.circulations.iter().all(|g| (g - g0).abs() < 1e-14));
        assert!((pv.total_circulation() - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn sheet_rejects_zero_circulation_and_few_markers() {
        let iv = InitialVorticity::SheetCurve(SheetCurve {
            label: "empty".into(),
            curve: Arc::new(|s| Vec2::new(s, 0.0)),
            line_density: Arc::new(|_| 0.0),
            param_range: (0.0, 1.0),
            support_box: Rect::square(1.0),
            sign: Sign::Nonnegative,
        });
        assert!(discretize_sheet(&iv, 4).is_err());
        let flat = builtin_initial_data("flat_sheet", &no_params()).unwrap();
        assert!(discretize_sheet(&flat, 1).is_err());
    }

    #[test]
    fn builtins() {
        let patch = builtin_initial_data("uniform_patch", &no_params()).unwrap();
        match &patch {
            InitialVorticity::AreaDensity(a) => {
                assert_eq!((a.density)(Vec2::new(0.5, 0.5)), 1.0);
                assert_eq!((a.density)(Vec2::new(0.9, 0.9)), 0.0);
            }
            _ => panic!("expected an area density"),
        }
        let gauss = builtin_initial_data("gaussian_patch", &no_params()).unwrap();
        assert_eq!(gauss.support_box(), Rect::square(6.0));
        let err = builtin_initial_data("vortex_ring", &no_params()).unwrap_err().to_string();
        assert!(err.contains("uniform_patch") && err.contains("circular_sheet"));
        let mut bad = no_params();
        bad.insert("radius".into(), 1.0);
        assert!(builtin_initial_data("flat_sheet", &bad).is_err());
    }

    #[test]
    fn gridded_density_bilinear() {
        let mut rows = Vec::new();
        for j in 0..3 {
            for i in 0..3 {
                let (x, y) = (i as f64, j as f64);
                rows.push((x, y, 1.0 + x + 2.0 * y));
            }
        }
        let iv = density_from_grid("grid".into(), &rows).unwrap();
        if let InitialVorticity::AreaDensity(a) = &iv {
            assert!(((a.density)(Vec2::new(0.5, 1.5)) - 4.5).abs() < 1e-14);
            assert_eq!((a.density)(Vec2::new(3.0, 0.0)), 0.0);
        }
        // bilinear data integrates exactly: mean value 1 + 1 + 2 = 4 on [0,2]^2
        let pv = discretize_density(&iv, 0.5, 0.0).unwrap();
        assert!((pv.total_circulation() - 16.0).abs() < 1e-12);
        assert!(density_from_grid("short".into(), &rows[..5]).is_err());
    }
}

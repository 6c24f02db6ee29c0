//! TOML experiment configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use filtered_vortex::convergence::{ConvergenceConfig, SampleGrid};
use filtered_vortex::diagnostics::{BumpTestFunction, QuadraticTestFunction, TestFunction, TimeWindow};
use filtered_vortex::discretization::{
    builtin_initial_data, discretize_density_anchored, discretize_sheet, load_density_table, GridAnchor,
    InitialVorticity, Rect,
};
use filtered_vortex::{Error, IntegratorConfig, Result, Scheme, SmoothingKernel, Vec2, VortexSystem};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub name: String,
    pub eps: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub builtin: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Gridded density table with rows `x y q`.
    pub table: Option<PathBuf>,
    /// Explicit `[x, y, gamma]` triples.
    pub vortices: Option<Vec<[f64; 3]>>,
    pub eta: Option<f64>,
    pub n_markers: Option<usize>,
    #[serde(default)]
    pub drop_tol: f64,
    #[serde(default)]
    pub anchor: AnchorName,
}

#[derive(Debug, Default, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorName {
    #[default]
    Integer,
    BoxCorner,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default)]
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    #[serde(default = "default_tol")]
    pub abs_tol: f64,
    #[serde(default = "default_tol")]
    pub rel_tol: f64,
}

fn default_stride() -> usize {
    1
}

fn default_tol() -> f64 {
    1e-10
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    #[serde(default = "default_radii")]
    pub vmf_radii: Vec<f64>,
    #[serde(default = "default_margin")]
    pub decay_margin: f64,
    pub test_function: Option<TestFunctionSection>,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        DiagnosticsSection { vmf_radii: default_radii(), decay_margin: default_margin(), test_function: None }
    }
}

fn default_radii() -> Vec<f64> {
    vec![0.02, 0.05, 0.1, 0.2]
}

fn default_margin() -> f64 {
    1.5
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum TestFunctionSection {
    Bump {
        center: [f64; 2],
        radius: f64,
        #[serde(default = "default_power")]
        power: u32,
        t0: Option<f64>,
        t1: Option<f64>,
        #[serde(default = "default_time_power")]
        time_power: u32,
        #[serde(default = "default_true")]
        filtered: bool,
    },
    Quadratic {
        t0: Option<f64>,
        t1: Option<f64>,
        #[serde(default = "default_time_power")]
        time_power: u32,
        #[serde(default = "default_true")]
        filtered: bool,
    },
}

fn default_power() -> u32 {
    4
}

fn default_time_power() -> u32 {
    2
}

fn default_true() -> bool {
    true
}

impl TestFunctionSection {
    /// The test function over `[t_first, t_last]` unless its window is given, and
    /// whether the filtered kernel is used.
    pub fn build(&self, t_first: f64, t_last: f64) -> Result<(Box<dyn TestFunction>, bool)> {
        match *self {
            TestFunctionSection::Bump { center, radius, power, t0, t1, time_power, filtered } => {
                let w = TimeWindow::new(t0.unwrap_or(t_first), t1.unwrap_or(t_last), time_power)?;
                let psi = BumpTestFunction::new(Vec2::new(center[0], center[1]), radius, power, w)?;
                Ok((Box::new(psi), filtered))
            }
            TestFunctionSection::Quadratic { t0, t1, time_power, filtered } => {
                let window = TimeWindow::new(t0.unwrap_or(t_first), t1.unwrap_or(t_last), time_power)?;
                Ok((Box::new(QuadraticTestFunction { window }), filtered))
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSection {
    pub eps_list: Vec<f64>,
    #[serde(default = "default_ratio")]
    pub grid_ratio: f64,
    /// `[xmin, ymin, xmax, ymax]`.
    #[serde(default = "default_rect")]
    pub sample_rect: [f64; 4],
    #[serde(default = "default_resolution")]
    pub sample_resolution: f64,
    #[serde(default = "default_local_radius")]
    pub local_radius: f64,
    pub sample_times: Option<Vec<f64>>,
    #[serde(default = "default_true")]
    pub kernel_limit_check: bool,
}

fn default_ratio() -> f64 {
    1.0
}

fn default_rect() -> [f64; 4] {
    [-2.0, -2.0, 2.0, 2.0]
}

fn default_resolution() -> f64 {
    0.05
}

fn default_local_radius() -> f64 {
    2.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub run: RunSection,
    pub kernel: KernelSection,
    #[serde(default)]
    pub initial: InitialSection,
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    pub converge: Option<ConvergeSection>,
}

pub fn config_error(field: &str, reason: impl Into<String>) -> Error {
    Error::invalid(field, reason)
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Config = toml::from_str(&text).map_err(|e| Error::Parse {
            location: path.display().to_string(),
            reason: e.to_string(),
        })?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        if let Some(eps) = self.kernel.eps {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(config_error("kernel.eps", format!("must be positive, got {eps}")));
            }
        }
        if self.run.workers == Some(0) {
            return Err(config_error("run.workers", "must be at least 1"));
        }
        if !(self.integrator.dt > 0.0) {
            return Err(config_error("integrator.dt", format!("must be positive, got {}", self.integrator.dt)));
        }
        if !(self.integrator.t_end > 0.0) {
            return Err(config_error("integrator.t_end", format!("must be positive, got {}", self.integrator.t_end)));
        }
        if self.integrator.snapshot_stride == 0 {
            return Err(config_error("integrator.snapshot_stride", "must be at least 1"));
        }
        let sources = [self.initial.builtin.is_some(), self.initial.table.is_some(), self.initial.vortices.is_some()];
        if sources.iter().filter(|s| **s).count() != 1 {
            return Err(config_error("initial", "set exactly one of builtin, table or vortices"));
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<SmoothingKernel> {
        SmoothingKernel::from_spec(&self.kernel.name)
    }

    pub fn eps(&self) -> Result<f64> {
        self.kernel.eps.ok_or_else(|| config_error("kernel.eps", "required for simulate"))
    }

    pub fn integrator(&self) -> IntegratorConfig {
        let s = &self.integrator;
        IntegratorConfig {
            scheme: s.scheme,
            dt: s.dt,
            t_end: s.t_end,
            abs_tol: s.abs_tol,
            rel_tol: s.rel_tol,
            snapshot_stride: s.snapshot_stride,
        }
    }

    fn initial_vorticity(&self) -> Result<Option<InitialVorticity>> {
        if let Some(name) = &self.initial.builtin {
            return builtin_initial_data(name, &self.initial.params).map(Some);
        }
        if let Some(path) = &self.initial.table {
            return load_density_table(path).map(Some);
        }
        Ok(None)
    }

    /// The initial point-vortex system; warnings from discretization go to `warn`.
    pub fn system(&self, warn: &mut dyn FnMut(&str)) -> Result<VortexSystem> {
        let kernel = self.kernel()?;
        let eps = self.eps()?;
        if let Some(vortices) = &self.initial.vortices {
            if vortices.is_empty() {
                return Err(config_error("initial.vortices", "must list at least one vortex"));
            }
            let pos = vortices.iter().map(|v| Vec2::new(v[0], v[1])).collect();
            let circ = vortices.iter().map(|v| v[2]).collect();
            return VortexSystem::new(pos, circ, eps, kernel);
        }
        let iv = self.initial_vorticity()?.expect("checked");
        let pv = if iv.is_sheet() {
            let n = self.initial.n_markers.ok_or_else(|| config_error("initial.n_markers", "required for sheets"))?;
            discretize_sheet(&iv, n)?
        } else {
            let eta = self.initial.eta.ok_or_else(|| config_error("initial.eta", "required for densities"))?;
            let anchor = match self.initial.anchor {
                AnchorName::Integer => GridAnchor::Integer,
                AnchorName::BoxCorner => GridAnchor::BoxCorner,
            };
            discretize_density_anchored(&iv, eta, self.initial.drop_tol, anchor)?
        };
        for w in &pv.warnings {
            warn(w);
        }
        let eta = pv.grid_size;
        Ok(pv.into_system(kernel, eps)?.with_grid_size(eta))
    }

    pub fn convergence(&self) -> Result<ConvergenceConfig> {
        let c = self.converge.as_ref().ok_or_else(|| config_error("converge", "section required"))?;
        let iv = self
            .initial_vorticity()?
            .ok_or_else(|| config_error("initial", "converge needs builtin or table initial data"))?;
        let mut cfg = ConvergenceConfig::new(self.kernel()?, iv, c.eps_list.clone())?;
        if let Some(name) = &self.initial.builtin {
            let params: Vec<String> = self.initial.params.iter().map(|(k, v)| format!("{k}={v:e}")).collect();
            cfg.initial_label = format!("{name}({})", params.join(","));
        }
        cfg.grid_ratio = c.grid_ratio;
        cfg.drop_tol = self.initial.drop_tol;
        cfg.scheme = self.integrator.scheme;
        cfg.t_end = self.integrator.t_end;
        cfg.dt = self.integrator.dt;
        cfg.snapshot_stride = self.integrator.snapshot_stride;
        let [x0, y0, x1, y1] = c.sample_rect;
        let rect = Rect::new(Vec2::new(x0, y0), Vec2::new(x1, y1))?;
        cfg.sample_grid = SampleGrid::new(rect, c.sample_resolution)?;
        cfg.local_radius = c.local_radius;
        cfg.sample_times = c.sample_times.clone().unwrap_or_else(|| vec![self.integrator.t_end]);
        cfg.vmf_radii = self.diagnostics.vmf_radii.clone();
        cfg.kernel_limit_check = c.kernel_limit_check;
        cfg.validate()?;
        Ok(cfg)
    }
}

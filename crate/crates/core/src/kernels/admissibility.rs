use std::f64::consts::PI;

use serde::Serialize;

use super::SmoothingKernel;
use crate::error::{Error, Result};
use crate::quadrature::{self, AdaptiveConfig};

/// Moments and sup-norm of a smoothing profile against the weights `|x|^0`, `|x|^1`
/// and `|x|^3`, and the resulting admissibility verdict.
#[derive(Clone, Debug, Serialize)]
pub struct AdmissibilityReport {
    pub kernel: String,
    /// `int h`
    pub l1_mass: f64,
    /// `int |x| h(x) dx`
    pub w1_l1: f64,
    /// `sup |x|^3 h(x)`
    pub w3_linf: f64,
    pub positive: bool,
    /// Set when a quadrature failed to converge; forces `pass = false`.
    pub inconclusive: bool,
    pub pass: bool,
    pub notes: Vec<String>,
}

#[derive(Clone, Copy, Debug)]
pub struct AdmissibilityConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub abs_tol: f64,
    /// Samples per decade for the positivity scan and the sup search.
    pub scan_per_decade: usize,
}

impl Default for AdmissibilityConfig {
    fn default() -> Self {
        AdmissibilityConfig {
            r_min: 1e-6,
            r_max: 1e6,
            abs_tol: 1e-10,
            scan_per_decade: 50,
        }
    }
}

/// Local power-law decay rate of `f` at `r`: `f ~ r^-rate`.
fn decay_rate<F: Fn(f64) -> f64>(f: &F, r: f64) -> f64 {
    let step = 0.1;
    let inner = f(r * (-step as f64).exp());
    let outer = f(r);
    if outer <= 0.0 || inner <= 0.0 {
        f64::INFINITY
    } else {
        (inner / outer).ln() / step
    }
}

/// `int_0^inf f(r) dr` by decade-wise adaptive quadrature plus a power-law tail.
/// Returns `Ok(None)` when the tail is not integrable.
fn radial_integral<F: Fn(f64) -> f64>(f: &F, cfg: &AdmissibilityConfig) -> Result<Option<f64>> {
    let qcfg = AdaptiveConfig {
        abs_tol: cfg.abs_tol * 1e-2,
        rel_tol: 1e-13,
        max_panels: 4000,
    };
    let mut total = quadrature::integrate(f, 0.0, cfg.r_min, qcfg)?;
    let mut lo = cfg.r_min;
    while lo < cfg.r_max {
        let hi = (lo * 10.0).min(cfg.r_max);
        total += quadrature::integrate(f, lo, hi, qcfg)?;
        lo = hi;
    }
    let end = f(cfg.r_max);
    if end == 0.0 {
        return Ok(Some(total));
    }
    let p = decay_rate(f, cfg.r_max);
    if p > 1.05 {
        Ok(Some(total + cfg.r_max * end / (p - 1.0)))
    } else {
        Ok(None)
    }
}

/// Values below this count as decayed when the next scan point underflows to 0.
const UNDERFLOW_LEVEL: f64 = 1e-250;

/// Checks `int h < inf`, `|x| h in L^1`, `|x|^3 h in L^inf` and positivity.
pub fn check_admissibility(kernel: &SmoothingKernel, cfg: AdmissibilityConfig) -> AdmissibilityReport {
    let mut notes = Vec::new();
    let mut inconclusive = false;
    let h = |r: f64| kernel.h_unchecked(r);

    let mut moment = |power: i32, label: &str| -> f64 {
        let f = |s: f64| 2.0 * PI * s.powi(power + 1) * h(s);
        match radial_integral(&f, &cfg) {
            Ok(Some(v)) => v,
            Ok(None) => {
                notes.push(format!("{label}: integrand tail decays too slowly, integral diverges"));
                f64::INFINITY
            }
            Err(Error::Quadrature(msg)) | Err(Error::Domain(msg)) => {
                inconclusive = true;
                notes.push(format!("{label}: {msg}"));
                f64::NAN
            }
            Err(e) => {
                inconclusive = true;
                notes.push(format!("{label}: {e}"));
                f64::NAN
            }
        }
    };
    let l1_mass = moment(0, "l1_mass");
    let w1_l1 = moment(1, "w1_l1");

    // positivity scan and sup of r^3 h on a log grid, refined by golden section
    let decades = (cfg.r_max / cfg.r_min).log10();
    let n = (decades * cfg.scan_per_decade as f64).ceil() as usize;
    let du = (cfg.r_max / cfg.r_min).ln() / n as f64;
    let grid: Vec<f64> = (0..=n).map(|i| cfg.r_min * (du * i as f64).exp()).collect();
    let hv: Vec<f64> = grid.iter().map(|&r| h(r)).collect();
    // zeros are accepted only as an underflowed tail of a decayed profile
    let tail = hv.iter().rposition(|&v| v != 0.0).map_or(0, |i| i + 1);
    let underflowed = tail > 0 && tail < hv.len() && hv[tail - 1] < UNDERFLOW_LEVEL;
    let positive = hv[..tail].iter().all(|&v| v > 0.0) && (tail == hv.len() || underflowed);
    if !positive {
        notes.push("profile is not strictly positive on the scan grid".into());
    } else if tail < hv.len() {
        notes.push(format!("profile underflows to 0 beyond r = {:e}", grid[tail - 1]));
    }
    let cube = |r: f64| r * r * r * h(r);
    let weighted: Vec<f64> = grid.iter().zip(&hv).map(|(&r, &v)| r * r * r * v).collect();
    let (imax, _) = weighted
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let w3_linf = if weighted.iter().any(|v| !v.is_finite()) {
        inconclusive = true;
        notes.push("w3_linf: non-finite profile value".into());
        f64::NAN
    } else if imax == n && decay_rate(&cube, cfg.r_max) < -1e-3 {
        notes.push("w3_linf: |x|^3 h grows without bound at large radius".into());
        f64::INFINITY
    } else if imax == 0 && decay_rate(&cube, 2.0 * cfg.r_min) > 1e-3 {
        notes.push("w3_linf: |x|^3 h grows without bound at the origin".into());
        f64::INFINITY
    } else {
        let lo = grid[imax.saturating_sub(1)];
        let hi = grid[(imax + 1).min(n)];
        let (_, v) = quadrature::golden_max(cube, lo, hi, 1e-12);
        v.max(weighted[imax])
    };

    let finite = l1_mass.is_finite() && w1_l1.is_finite() && w3_linf.is_finite();
    AdmissibilityReport {
        kernel: kernel.name().to_string(),
        l1_mass,
        w1_l1,
        w3_linf,
        positive,
        inconclusive,
        pass: finite && positive && !inconclusive,
        notes,
    }
}

//! Radial smoothing kernels and the filtered Biot-Savart / Green functions they induce.
//!
//! A kernel is described by its radial profile `h_r` at unit scale. Everything else
//! is derived from it: the cumulative-mass profile `P_K(r) = 2 pi int_0^r s h_r(s) ds`,
//! the filtered velocity kernel `K^eps(x) = K(x) P_K(|x|/eps)` and the filtered Green
//! function `G^eps(r) = G_r(r/eps) + log(eps)/(2 pi)`.

mod alpha_table;
mod admissibility;
mod tabulated;

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

pub use admissibility::{check_admissibility, AdmissibilityConfig, AdmissibilityReport};
pub use tabulated::{load_profile_table, ProfileTable, TabulatedProfile, TabulationConfig};

use crate::bessel;
use crate::error::{Error, Result};
use crate::vec2::Vec2;

const INV_TWO_PI: f64 = 0.5 / PI;

/// Unfiltered Biot-Savart kernel `x^perp / (2 pi |x|^2)`. Returns zero at the origin.
#[inline]
pub fn biot_savart(x: Vec2) -> Vec2 {
    let r2 = x.norm_sq();
    if r2 == 0.0 {
        Vec2::ZERO
    } else {
        x.perp() * (INV_TWO_PI / r2)
    }
}

#[derive(Clone)]
enum Family {
    Blob,
    Alpha,
    Tabulated(Arc<TabulatedProfile>),
}

/// A positive radial filter together with its derived profiles.
///
/// Immutable after construction and cheap to clone; share it freely across threads.
#[derive(Clone)]
pub struct SmoothingKernel {
    name: String,
    family: Family,
}

impl std::fmt::Debug for SmoothingKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothingKernel")
            .field("name", &self.name)
            .field("has_origin_singularity", &self.has_origin_singularity())
            .finish()
    }
}

/// The algebraic vortex-blob filter `h(x) = 1 / (pi (|x|^2 + 1)^2)`.
pub fn make_blob_kernel() -> SmoothingKernel {
    SmoothingKernel {
        name: "blob".into(),
        family: Family::Blob,
    }
}

/// The Euler-alpha filter `h(x) = K_0(|x|) / (2 pi)`, singular at the origin.
pub fn make_alpha_kernel() -> SmoothingKernel {
    SmoothingKernel {
        name: "alpha".into(),
        family: Family::Alpha,
    }
}

/// Builds a kernel from an arbitrary nonnegative radial profile by tabulating its
/// cumulative mass. The profile is rescaled to unit mass when needed; see
/// [`SmoothingKernel::mass_scale`].
pub fn make_custom_kernel<F>(
    name: impl Into<String>,
    h_radial: F,
    config: TabulationConfig,
) -> Result<SmoothingKernel>
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
{
    let profile = TabulatedProfile::build(Arc::new(h_radial), config)?;
    Ok(SmoothingKernel {
        name: name.into(),
        family: Family::Tabulated(Arc::new(profile)),
    })
}

impl SmoothingKernel {
    /// Parses a kernel selection string: `blob`, `alpha` or `custom:<path>`, where the
    /// path names a two-column `(r, h_r(r))` text table.
    pub fn from_spec(spec: &str) -> Result<Self> {
        match spec.trim() {
            "blob" => Ok(make_blob_kernel()),
            "alpha" => Ok(make_alpha_kernel()),
            other => match other.strip_prefix("custom:") {
                Some(path) => {
                    let table = load_profile_table(Path::new(path))?;
                    make_custom_kernel(other, move |r| table.eval(r), TabulationConfig::default())
                }
                None => Err(Error::invalid(
                    "kernel",
                    format!("unknown kernel '{other}'; expected blob, alpha or custom:<path>"),
                )),
            },
        }
    }

    /// The selection string this kernel was built from.
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn has_origin_singularity(&self) -> bool {
        match &self.family {
            Family::Blob => false,
            Family::Alpha => true,
            Family::Tabulated(t) => t.origin_singular(),
        }
    }

    /// Factor applied to a custom profile to give it unit mass (1 for built-ins).
    pub fn mass_scale(&self) -> f64 {
        match &self.family {
            Family::Tabulated(t) => t.mass_scale(),
            _ => 1.0,
        }
    }

    /// Radial profile `h_r(r)` at unit scale.
    pub fn h_radial(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::Domain(format!("h_r needs r >= 0, got {r}")));
        }
        if r == 0.0 && self.has_origin_singularity() {
            return Err(Error::Domain(format!(
                "kernel '{}' is singular at r = 0",
                self.name
            )));
        }
        Ok(self.h_unchecked(r))
    }

    pub(crate) fn h_unchecked(&self, r: f64) -> f64 {
        match &self.family {
            Family::Blob => {
                let d = r * r + 1.0;
                1.0 / (PI * d * d)
            }
            Family::Alpha => INV_TWO_PI * bessel::k0(r),
            Family::Tabulated(t) => t.h(r),
        }
    }

    /// Cumulative-mass profile `P_K(r)`; nondecreasing from 0 to 1.
    #[inline]
    pub fn pk(&self, r: f64) -> f64 {
        match &self.family {
            Family::Blob => {
                let r2 = r * r;
                r2 / (r2 + 1.0)
            }
            Family::Alpha => bessel::one_minus_x_k1(r),
            Family::Tabulated(t) => t.pk(r),
        }
    }

    /// Radial Green profile `G_r(r)` at unit scale, normalised so that
    /// `G_r(r) - log(r)/(2 pi) -> 0` as `r -> infinity`.
    pub fn g_radial(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::Domain(format!("G_r needs r >= 0, got {r}")));
        }
        match &self.family {
            Family::Blob => Ok(0.5 * INV_TWO_PI * (r * r).ln_1p()),
            Family::Alpha => Ok(INV_TWO_PI * bessel::k0_plus_ln(r)),
            Family::Tabulated(t) => {
                let g = t.g(r);
                if g.is_finite() {
                    Ok(g)
                } else {
                    Err(Error::Domain(format!(
                        "G_r({r}) is undefined for kernel '{}'",
                        self.name
                    )))
                }
            }
        }
    }

    /// Filtered Biot-Savart kernel `K^eps(x)`; zero at `x = 0`. Requires `eps > 0`.
    #[inline]
    pub fn k_eps(&self, x: Vec2, eps: f64) -> Vec2 {
        debug_assert!(eps > 0.0);
        let r2 = x.norm_sq();
        match &self.family {
            // K(x) P_K(|x|/eps) simplifies to x^perp / (2 pi (|x|^2 + eps^2))
            Family::Blob => x.perp() * (INV_TWO_PI / (r2 + eps * eps)),
            _ => {
                if r2 == 0.0 {
                    return Vec2::ZERO;
                }
                let s = r2.sqrt() / eps;
                let p = match &self.family {
                    Family::Alpha => alpha_table::pk_fast(s),
                    _ => self.pk(s),
                };
                x.perp() * (INV_TWO_PI * p / r2)
            }
        }
    }

    /// Filtered Green function `G^eps(r)`.
    pub fn g_eps(&self, r: f64, eps: f64) -> Result<f64> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::Domain(format!("eps must be positive, got {eps}")));
        }
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::Domain(format!("G^eps needs r >= 0, got {r}")));
        }
        match &self.family {
            Family::Blob => Ok(0.5 * INV_TWO_PI * (r * r + eps * eps).ln()),
            _ => Ok(self.g_radial(r / eps)? + INV_TWO_PI * eps.ln()),
        }
    }
}

/// Free-function form of [`SmoothingKernel::k_eps`].
pub fn eval_k_eps(kernel: &SmoothingKernel, x: Vec2, eps: f64) -> Vec2 {
    kernel.k_eps(x, eps)
}

/// Free-function form of [`SmoothingKernel::g_eps`].
pub fn eval_g_eps(kernel: &SmoothingKernel, r: f64, eps: f64) -> Result<f64> {
    kernel.g_eps(r, eps)
}

//! Regularized point-vortex dynamics for the two-dimensional filtered Euler equations.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernels`]: smoothing filters `h`, the filtered Biot-Savart kernel `K^eps` and
//!   Green function `G^eps`, and the admissibility check for a filter.
//! * [`discretization`]: initial vorticity (area densities and sheets) and its
//!   conversion to a [`VortexSystem`].
//! * [`dynamics`]: the point-vortex right-hand side, induced velocity fields and time
//!   integration.
//! * [`diagnostics`]: conserved quantities, the vorticity maximal function with its
//!   logarithmic decay bound, and weak-form residuals.
//! * [`convergence`]: families of runs with shrinking `eps` and grid size tied to it.
//! * [`io`]: the text formats used to exchange trajectories and diagnostics.

pub mod bessel;
pub mod convergence;
pub mod diagnostics;
pub mod discretization;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod kernels;
pub mod quadrature;
pub mod vec2;

pub use discretization::{InitialVorticity, VortexSystem};
pub use dynamics::{IntegratorConfig, Scheme, Trajectory};
pub use error::{Error, Result};
pub use kernels::SmoothingKernel;
pub use vec2::Vec2;

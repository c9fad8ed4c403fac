//! Pseudo-spectral solvers for a nonlocal Burgers equation with diffusive and
//! dispersive terms, its closed-form special cases `α = 0, 1, 2`, and the
//! chemotaxis system it is derived from.
//!
//! Layers, bottom-up:
//!
//! - [`spectral`]: grid on `[0, 2π)`, transforms, Fourier symbols, dealiased products
//! - [`model`]: tendencies for every evolution equation and the linear dispersion relation
//! - [`integrator`]: adaptive Dormand–Prince 4(5) stepping with blow-up monitoring
//! - [`diagnostics`]: Sobolev and Wiener norms, energy functionals, resolution indicator
//! - [`validation`]: independent oracles and convergence studies
//! - [`runner`]: run configuration, presets, CSV/JSON output

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod integrator;
pub mod model;
pub mod runner;
pub mod spectral;
pub mod validation;

pub use error::{Error, Result};
pub use model::{Fields, ModelKind, ModelParams, SimState};
pub use spectral::{RealField, SpectralGrid, Spectrum};

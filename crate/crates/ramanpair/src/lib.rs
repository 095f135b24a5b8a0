//! Photon–collective-excitation (CE) pairs from spontaneous Raman scattering.
//!
//! The crate builds the joint spectral / spatial amplitude of a Stokes photon
//! and the optical-phonon excitation it leaves behind, and computes how
//! entangled the two are — equivalently, the spectral purity of the heralded
//! Stokes photon. Layers, bottom-up:
//!
//! - [`units`], [`dispersion`]: SI units, Sellmeier media, k(ω) and group delays.
//! - [`fields`]: pump envelope, Lorentzian lineshape and its fitting.
//! - [`jointamp`]: 1D and 3D joint amplitudes, transverse factors β and
//!   apodization functions α.
//! - [`schmidt`]: discretized Schmidt decomposition and purity with adaptive
//!   refinement.
//! - [`experiments`]: parameter sweeps, joint-intensity grids and Monte Carlo
//!   g⁽²⁾.
//! - [`config`], [`io`]: unit-tagged TOML configuration, output formats and
//!   reproducibility manifests.
//! - [`run`]: config-driven runs rendered to named output files.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod config;
pub mod dispersion;
pub mod exec;
pub mod experiments;
pub mod fields;
pub mod io;
pub mod jointamp;
pub mod quadrature;
pub mod run;
pub mod schmidt;
pub mod units;

pub use dispersion::{MediumSpec, Sellmeier};
pub use exec::Execution;
pub use fields::{Lineshape, PumpSpec};
pub use jointamp::{GeometryMode, GeometrySpec, PairContext};

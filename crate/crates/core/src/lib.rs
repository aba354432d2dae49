//! Wave dispersion in triangular elastic lattices carrying gyroscopic spinners,
//! and a frequency-domain solver for the homogenized chiral elastic continuum.
//!
//! The crate is organized bottom-up:
//!
//! - [`lattice`]: cell basis, bond directions, Bloch phases and reciprocal-cell sampling.
//! - [`gyro`]: gyroscope kinematics giving the spinner constant of a junction.
//! - [`dispersion`]: stiffness/inertia assembly and the chiral dispersion equation.
//! - [`bands`]: dispersion surfaces, total band gaps, α-sweeps and slowness contours.
//! - [`continuum`]: finite-difference Navier solver with a chiral inertia term and PML.
//! - [`config`], [`export`], [`app`]: run configuration, file formats and command dispatch.
//!
//! Sweeps over k-points, α values and matrix rows go through [`exec::Execution`], which
//! runs on rayon when the `parallel` feature is enabled and sequentially otherwise.

// `!(x > 0.0)` style comparisons also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod bands;
pub mod config;
pub mod continuum;
pub mod dispersion;
pub mod error;
pub mod exec;
pub mod export;
pub mod gyro;
pub mod lattice;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod prelude {
    pub use crate::bands::{BandGap, BandSurfaces};
    pub use crate::dispersion::{DispersionBranches, Regime};
    pub use crate::exec::Execution;
    pub use crate::gyro::{SignBranch, SpinnerBody};
    pub use crate::lattice::{BlochVector, CellBasis, Flavor, LatticeSpec};
    pub use crate::{Error, Result};
}

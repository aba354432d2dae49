//! Frequency-domain solver for the homogenized chiral elastic medium
//!
//! `∇·σ(U) + ω² (ρ I + Σ) U + F = 0`, `σ = λ (∇·U) I + μ (∇U + ∇Uᵀ)`,
//! `Σ = [[0, −iα], [iα, 0]]`,
//!
//! on a square domain surrounded by a perfectly matched layer, with the
//! `e^{-iωt}` time convention.

mod field;
mod operator;
mod pml;
mod scene;
mod solver;

use thiserror::Error;

pub use field::{
    angular_variation, default_shadow_metric, diagonal_points, diagonal_profile,
    dominant_wavelength, field_amplitude, mirror_asymmetry, radial_wavelength, shadow_metric,
    ComplexField, RealGrid, Sector, DEFAULT_PROFILE_SAMPLES,
};
pub use operator::{
    apply_operator, assemble_operator, point_force_source, point_moment_source, SparseSystem,
};
pub use pml::Pml;
pub use scene::{
    build_scene, CoatedInclusion, CoatingSign, ContinuumScene, InclusionConfig, Medium,
    SceneConfig, Source, SourceConfig, SourceKind, SourcePosition, MIN_POINTS_PER_WAVELENGTH,
};
pub use solver::{
    solve, solve_system, Solution, SolverKind, SolverOptions, DIRECT_NODE_LIMIT,
    SYMMETRIC_DIRECT_NODE_LIMIT,
};

/// Square node grid: `n × n` nodes with spacing `h`, node `(0, 0)` at `origin`.
///
/// The outermost ring of nodes carries the Dirichlet condition; the next
/// `pml_cells` rings form the absorbing layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub h: f64,
    pub origin: (f64, f64),
    pub pml_cells: usize,
}

impl Grid {
    pub fn x(&self, i: usize) -> f64 {
        self.origin.0 + i as f64 * self.h
    }

    pub fn y(&self, j: usize) -> f64 {
        self.origin.1 + j as f64 * self.h
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `true` for nodes strictly inside the PML or on the Dirichlet ring.
    pub fn in_pml(&self, i: usize, j: usize) -> bool {
        let lo = self.pml_cells;
        let hi = self.n - 1 - self.pml_cells;
        i < lo || j < lo || i > hi || j > hi
    }

    /// Interior (physical) square `[x0, x1]` in both directions.
    pub fn interior(&self) -> (f64, f64) {
        (self.x(self.pml_cells), self.x(self.n - 1 - self.pml_cells))
    }

    /// Fractional node coordinates of a point.
    pub fn locate(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.origin.0) / self.h, (y - self.origin.1) / self.h)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ContinuumError {
    #[error("invalid scene parameter {name} = {value}: {reason}")]
    Parameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("under-resolved scene: {points_per_wavelength:.2} points per shear wavelength (minimum {min})")]
    UnderResolved {
        points_per_wavelength: f64,
        min: f64,
    },
    #[error("{what} reaches into the absorbing layer")]
    InPml { what: &'static str },
    #[error("source at ({x}, {y}) is closer than one wavelength to the absorbing layer")]
    SourcePlacement { x: f64, y: f64 },
    #[error("nonpositive {name} = {value} at node ({i}, {j})")]
    NonPositiveCoefficient {
        name: &'static str,
        i: usize,
        j: usize,
        value: f64,
    },
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
    #[error("solver stalled at relative residual {final_residual:e} after {} iterations", history.len())]
    NoConvergence {
        final_residual: f64,
        history: Vec<f64>,
    },
    #[error("relative residual {residual:e} exceeds {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },
    #[error("field dimension {got} does not match grid dimension {expected}")]
    Dimension { expected: usize, got: usize },
}

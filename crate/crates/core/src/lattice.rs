//! Triangular lattice geometry: translations, bond directions, Bloch phases and
//! k-space sampling grids.
//!
//! Lengths are carried in physical units; every dispersion quantity depends on `k`
//! only through the dimensionless products `k·l`, which is how the rest of the crate
//! normalizes.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("monatomic lattice requires m1 = m2 and alpha1 = alpha2 (got m = {m1}/{m2}, alpha = {alpha1}/{alpha2})")]
    MonatomicMismatch {
        m1: f64,
        m2: f64,
        alpha1: f64,
        alpha2: f64,
    },
    #[error("sampling resolution must be at least {min}, got {got}")]
    Resolution { min: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    /// One junction per primitive cell (translations `t1/2`, `t2`).
    Monatomic,
    /// Two junctions per cell (translations `t1`, `t2`).
    Biatomic,
}

impl Flavor {
    /// Number of displacement degrees of freedom per cell.
    pub fn dofs(self) -> usize {
        match self {
            Flavor::Monatomic => 2,
            Flavor::Biatomic => 4,
        }
    }
}

/// Geometry and physics of the periodic lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    /// Bond length.
    pub l: f64,
    /// Link stiffness.
    pub c: f64,
    pub m1: f64,
    pub m2: f64,
    /// Spinner constants; the sign is the handedness.
    pub alpha1: f64,
    pub alpha2: f64,
    pub flavor: Flavor,
}

impl Default for LatticeSpec {
    fn default() -> Self {
        LatticeSpec::monatomic(1.0, 0.0)
    }
}

impl LatticeSpec {
    /// Monatomic lattice with unit bond length and stiffness.
    pub fn monatomic(m: f64, alpha: f64) -> Self {
        LatticeSpec {
            l: 1.0,
            c: 1.0,
            m1: m,
            m2: m,
            alpha1: alpha,
            alpha2: alpha,
            flavor: Flavor::Monatomic,
        }
    }

    /// Biatomic lattice with unit bond length and stiffness.
    pub fn biatomic(m1: f64, m2: f64, alpha1: f64, alpha2: f64) -> Self {
        LatticeSpec {
            l: 1.0,
            c: 1.0,
            m1,
            m2,
            alpha1,
            alpha2,
            flavor: Flavor::Biatomic,
        }
    }

    pub fn with_bond(mut self, l: f64, c: f64) -> Self {
        self.l = l;
        self.c = c;
        self
    }

    /// Same lattice with every spinner constant replaced by `alpha`.
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha1 = alpha;
        self.alpha2 = alpha;
        self
    }

    /// Mass of the single junction of a monatomic lattice.
    pub fn m(&self) -> f64 {
        self.m1
    }

    pub fn alpha(&self) -> f64 {
        self.alpha1
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        for (name, value) in [
            ("l", self.l),
            ("c", self.c),
            ("m1", self.m1),
            ("m2", self.m2),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
        ] {
            if !value.is_finite() {
                return Err(LatticeError::NonFinite { name, value });
            }
        }
        for (name, value) in [
            ("l", self.l),
            ("c", self.c),
            ("m1", self.m1),
            ("m2", self.m2),
        ] {
            if value <= 0.0 {
                return Err(LatticeError::NonPositive { name, value });
            }
        }
        if self.flavor == Flavor::Monatomic && (self.m1 != self.m2 || self.alpha1 != self.alpha2) {
            return Err(LatticeError::MonatomicMismatch {
                m1: self.m1,
                m2: self.m2,
                alpha1: self.alpha1,
                alpha2: self.alpha2,
            });
        }
        Ok(())
    }

    /// Frequency scale `sqrt(c / m_min)` used for zero tolerances.
    pub fn omega_scale(&self) -> f64 {
        (self.c / self.m1.min(self.m2)).sqrt()
    }
}

/// A point of reciprocal space, in physical units (1/length).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlochVector {
    pub k1: f64,
    pub k2: f64,
}

impl BlochVector {
    pub fn new(k1: f64, k2: f64) -> Self {
        BlochVector { k1, k2 }
    }

    /// Builds `k` from the dimensionless pair `(k1·l, k2·l)`.
    pub fn from_scaled(k1l: f64, k2l: f64, l: f64) -> Self {
        BlochVector {
            k1: k1l / l,
            k2: k2l / l,
        }
    }

    /// `(k1·l, k2·l)`.
    pub fn scaled(&self, l: f64) -> (f64, f64) {
        (self.k1 * l, self.k2 * l)
    }

    pub fn as_vector(&self) -> Vector2<f64> {
        Vector2::new(self.k1, self.k2)
    }

    pub fn norm(&self) -> f64 {
        self.k1.hypot(self.k2)
    }

    pub fn is_finite(&self) -> bool {
        self.k1.is_finite() && self.k2.is_finite()
    }

    /// Rotation of `k` by `angle` radians about the origin.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        BlochVector::new(c * self.k1 - s * self.k2, s * self.k1 + c * self.k2)
    }
}

impl std::ops::Add for BlochVector {
    type Output = BlochVector;
    fn add(self, rhs: BlochVector) -> BlochVector {
        BlochVector::new(self.k1 + rhs.k1, self.k2 + rhs.k2)
    }
}

impl std::ops::Neg for BlochVector {
    type Output = BlochVector;
    fn neg(self) -> BlochVector {
        BlochVector::new(-self.k1, -self.k2)
    }
}

impl From<Vector2<f64>> for BlochVector {
    fn from(v: Vector2<f64>) -> Self {
        BlochVector::new(v.x, v.y)
    }
}

/// Translation and bond vectors of the triangular cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellBasis {
    pub t1: Vector2<f64>,
    pub t2: Vector2<f64>,
    /// Unit bond directions `a1, a2, a3`.
    pub a: [Vector2<f64>; 3],
    /// Columns `t1/2` and `t2`: the primitive translations of the monatomic lattice.
    pub t: Matrix2<f64>,
}

impl CellBasis {
    /// Translations generating the Bloch periodicity of `flavor`, as matrix columns.
    pub fn translations(&self, flavor: Flavor) -> Matrix2<f64> {
        match flavor {
            Flavor::Monatomic => self.t,
            Flavor::Biatomic => Matrix2::from_columns(&[self.t1, self.t2]),
        }
    }
}

pub fn cell_basis(spec: &LatticeSpec) -> CellBasis {
    let l = spec.l;
    let s3 = 3f64.sqrt();
    CellBasis {
        t1: Vector2::new(2.0 * l, 0.0),
        t2: Vector2::new(l / 2.0, l * s3 / 2.0),
        a: [
            Vector2::new(1.0, 0.0),
            Vector2::new(-0.5, s3 / 2.0),
            Vector2::new(-0.5, -s3 / 2.0),
        ],
        t: Matrix2::new(l, l / 2.0, 0.0, l * s3 / 2.0),
    }
}

/// `exp(i k·(T n))` for the monatomic translation matrix `T`.
pub fn bloch_phase(k: BlochVector, n: (i64, i64), basis: &CellBasis) -> Complex64 {
    bloch_phase_with(k, n, &basis.t)
}

/// `exp(i k·(T n))` for an arbitrary translation matrix `T`.
pub fn bloch_phase_with(k: BlochVector, n: (i64, i64), translations: &Matrix2<f64>) -> Complex64 {
    let shift = translations * Vector2::new(n.0 as f64, n.1 as f64);
    Complex64::from_polar(1.0, k.as_vector().dot(&shift))
}

/// Reciprocal basis `b1, b2` with `b_i · t_j = 2π δ_ij` for the flavor's translations.
pub fn reciprocal_basis(spec: &LatticeSpec) -> [Vector2<f64>; 2] {
    let t = cell_basis(spec).translations(spec.flavor);
    // Rows of 2π T⁻¹ are the reciprocal vectors.
    let inv = t
        .try_inverse()
        .expect("cell translations are linearly independent");
    let b = inv * (2.0 * PI);
    [
        Vector2::new(b[(0, 0)], b[(0, 1)]),
        Vector2::new(b[(1, 0)], b[(1, 1)]),
    ]
}

/// Structured affine grid of k-points: `k(i, j) = origin + i·step1 + j·step2`.
///
/// Points are stored with `i` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct KGrid {
    pub origin: Vector2<f64>,
    pub step1: Vector2<f64>,
    pub step2: Vector2<f64>,
    pub n1: usize,
    pub n2: usize,
}

impl KGrid {
    /// One full reciprocal cell (parallelogram spanned by `b1, b2`), periodic images excluded.
    pub fn reciprocal_cell(spec: &LatticeSpec, resolution: usize) -> Result<Self, LatticeError> {
        if resolution < 2 {
            return Err(LatticeError::Resolution {
                min: 2,
                got: resolution,
            });
        }
        let [b1, b2] = reciprocal_basis(spec);
        let r = resolution as f64;
        Ok(KGrid {
            origin: Vector2::zeros(),
            step1: b1 / r,
            step2: b2 / r,
            n1: resolution,
            n2: resolution,
        })
    }

    /// Rectangular window in dimensionless `(k1·l, k2·l)` coordinates, endpoints included.
    pub fn window(
        spec: &LatticeSpec,
        k1l: (f64, f64),
        k2l: (f64, f64),
        n1: usize,
        n2: usize,
    ) -> Result<Self, LatticeError> {
        let min = n1.min(n2);
        if min < 2 {
            return Err(LatticeError::Resolution { min: 2, got: min });
        }
        let l = spec.l;
        Ok(KGrid {
            origin: Vector2::new(k1l.0 / l, k2l.0 / l),
            step1: Vector2::new((k1l.1 - k1l.0) / l / (n1 - 1) as f64, 0.0),
            step2: Vector2::new(0.0, (k2l.1 - k2l.0) / l / (n2 - 1) as f64),
            n1,
            n2,
        })
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize, j: usize) -> BlochVector {
        (self.origin + self.step1 * i as f64 + self.step2 * j as f64).into()
    }

    /// Maps fractional grid coordinates to a k-point.
    pub fn at(&self, fi: f64, fj: f64) -> BlochVector {
        (self.origin + self.step1 * fi + self.step2 * fj).into()
    }

    pub fn points(&self) -> Vec<BlochVector> {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.n2 {
            for i in 0..self.n1 {
                out.push(self.point(i, j));
            }
        }
        out
    }
}

/// `resolution × resolution` samples of one reciprocal cell.
pub fn reciprocal_cell_samples(
    spec: &LatticeSpec,
    resolution: usize,
) -> Result<Vec<BlochVector>, LatticeError> {
    Ok(KGrid::reciprocal_cell(spec, resolution)?.points())
}

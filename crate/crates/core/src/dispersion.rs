//! Bloch-Floquet dispersion of the gyroscopic triangular lattice.
//!
//! A Bloch wave with amplitudes `U` satisfies `C(k) U = ω² (M − Σ) U`, where `C` is
//! the Hermitian stiffness matrix, `M` the diagonal mass matrix and `Σ` the Hermitian
//! chiral matrix with `∓iα` off-diagonal entries. `M − Σ` is indefinite once `|α|`
//! exceeds a junction mass, and the corresponding roots `ω²` turn negative: those
//! branches do not propagate and are dropped.

use nalgebra::{DMatrix, SymmetricEigen, Vector2};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::lattice::{bloch_phase_with, cell_basis, BlochVector, Flavor, LatticeSpec};

/// Relative band around `m² = α²` treated as exactly critical.
pub const CRITICAL_RTOL: f64 = 1e-12;
/// Roots with `|ω²| ≤ ZERO_RTOL · c/m` are the acoustic zero.
pub const ZERO_RTOL: f64 = 1e-10;
/// Imaginary parts of `ω²` above this multiple of `c/m` indicate an assembly bug.
pub const IMAG_RTOL: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum DispersionError {
    #[error("{op} requires a {expected:?} lattice")]
    WrongFlavor { op: &'static str, expected: Flavor },
    #[error("complex eigenvalue at k = ({}, {}): {eigenvalues:?} (tolerance {tolerance:e})", k.k1, k.k2)]
    ComplexEigenvalue {
        k: BlochVector,
        eigenvalues: Vec<(f64, f64)>,
        tolerance: f64,
    },
    #[error("det scan needs omega_max > 0 and at least 100 steps (got {omega_max}, {steps})")]
    ScanParameters { omega_max: f64, steps: usize },
}

/// Hermitian stiffness matrix (2×2 monatomic, 4×4 biatomic), in units including `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessMatrix(pub DMatrix<Complex64>);

impl StiffnessMatrix {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn det(&self) -> f64 {
        self.0.determinant().re
    }

    /// `max |C − Cᴴ|`.
    pub fn hermiticity_residual(&self) -> f64 {
        (&self.0 - self.0.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &StiffnessMatrix) -> f64 {
        (&self.0 - &other.0)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Real eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(hermitian_part(&self.0))
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

fn hermitian_part(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (a + a.adjoint()).map(|z| z * 0.5)
}

fn phases(k: BlochVector, l: f64) -> (f64, f64, f64) {
    let (k1l, k2l) = k.scaled(l);
    let s = 3f64.sqrt() / 2.0;
    (k1l, k1l / 2.0 + s * k2l, k1l / 2.0 - s * k2l)
}

/// Closed-form monatomic stiffness matrix.
pub fn stiffness_mono(k: BlochVector, spec: &LatticeSpec) -> StiffnessMatrix {
    let (k1l, phi, psi) = phases(k, spec.l);
    let (cp, cs) = (phi.cos(), psi.cos());
    let c = spec.c;
    let c11 = c * (3.0 - 2.0 * k1l.cos() - (cp + cs) / 2.0);
    let c12 = c * 3f64.sqrt() * (cs - cp) / 2.0;
    let c22 = c * (3.0 - 1.5 * (cp + cs));
    StiffnessMatrix(DMatrix::from_row_slice(
        2,
        2,
        &[c11, c12, c12, c22].map(|x| Complex64::new(x, 0.0)),
    ))
}

/// Biatomic stiffness matrix from the printed 2×2 blocks.
pub fn stiffness_bi(k: BlochVector, spec: &LatticeSpec) -> StiffnessMatrix {
    let (_, phi, psi) = phases(k, spec.l);
    let s3 = 3f64.sqrt();
    let (cp, cs) = (phi.cos(), psi.cos());
    let diag = [
        [3.0 - 0.5 * cp, -s3 / 2.0 * cp],
        [-s3 / 2.0 * cp, 3.0 - 1.5 * cp],
    ];
    let inter = [
        [-2.0 * (phi + psi).cos() - 0.5 * cs, s3 / 2.0 * cs],
        [s3 / 2.0 * cs, -1.5 * cs],
    ];
    let gauge = Complex64::from_polar(1.0, phi + psi);
    let mut m = DMatrix::<Complex64>::zeros(4, 4);
    for r in 0..2 {
        for col in 0..2 {
            let d = Complex64::new(spec.c * diag[r][col], 0.0);
            m[(r, col)] = d;
            m[(r + 2, col + 2)] = d;
            // C21 = e^{i(Φ+Ψ)} P, C12 = conj(C21).
            let off = gauge * spec.c * inter[r][col];
            m[(r + 2, col)] = off;
            m[(r, col + 2)] = off.conj();
        }
    }
    StiffnessMatrix(m)
}

/// One elastic link leaving a junction of the reference cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bond {
    /// Junction index within the cell (0 → `m1`, 1 → `m2`).
    pub from: usize,
    pub to: usize,
    /// Unit vector from `from` to `to`.
    pub dir: Vector2<f64>,
    /// Cell multi-index of the `to` junction.
    pub cell: (i64, i64),
}

/// Links of each junction, read off the lattice equations of motion.
///
/// Cell multi-indices refer to the flavor's own translations
/// (`t1/2, t2` monatomic; `t1, t2` biatomic).
pub fn bonds(flavor: Flavor) -> Vec<Bond> {
    let a = cell_basis(&LatticeSpec::default()).a;
    let b = |from, to, dir: Vector2<f64>, cell| Bond {
        from,
        to,
        dir,
        cell,
    };
    match flavor {
        Flavor::Monatomic => vec![
            b(0, 0, a[0], (1, 0)),
            b(0, 0, -a[0], (-1, 0)),
            b(0, 0, a[1], (-1, 1)),
            b(0, 0, -a[1], (1, -1)),
            b(0, 0, a[2], (0, -1)),
            b(0, 0, -a[2], (0, 1)),
        ],
        Flavor::Biatomic => vec![
            b(0, 1, a[0], (0, 0)),
            b(0, 1, -a[0], (-1, 0)),
            b(0, 1, a[1], (-1, 1)),
            b(0, 1, -a[1], (0, -1)),
            b(0, 0, a[2], (0, -1)),
            b(0, 0, -a[2], (0, 1)),
            b(1, 0, a[0], (1, 0)),
            b(1, 0, -a[0], (0, 0)),
            b(1, 0, a[1], (0, 1)),
            b(1, 0, -a[1], (1, -1)),
            b(1, 1, a[2], (0, -1)),
            b(1, 1, -a[2], (0, 1)),
        ],
    }
}

/// Stiffness matrix assembled link by link: each bond contributes
/// `c a⊗a (u_self − e^{ik·T n} u_other)` to the restoring force.
pub fn stiffness_bond_sum(k: BlochVector, spec: &LatticeSpec) -> StiffnessMatrix {
    let n = spec.flavor.dofs();
    let translations = cell_basis(spec).translations(spec.flavor);
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for bond in bonds(spec.flavor) {
        let aa = bond.dir * bond.dir.transpose() * spec.c;
        let phase = bloch_phase_with(k, bond.cell, &translations);
        for r in 0..2 {
            for c in 0..2 {
                let v = aa[(r, c)];
                m[(2 * bond.from + r, 2 * bond.from + c)] += Complex64::new(v, 0.0);
                m[(2 * bond.from + r, 2 * bond.to + c)] -= phase * v;
            }
        }
    }
    StiffnessMatrix(m)
}

/// Stiffness matrix used by the solvers.
///
/// The biatomic printed blocks are cross-checked against the bond sum; if they ever
/// disagree the bond sum wins and the mismatch is logged.
pub fn stiffness(k: BlochVector, spec: &LatticeSpec) -> StiffnessMatrix {
    match spec.flavor {
        Flavor::Monatomic => stiffness_mono(k, spec),
        Flavor::Biatomic => {
            let printed = stiffness_bi(k, spec);
            let assembled = stiffness_bond_sum(k, spec);
            let diff = printed.max_abs_diff(&assembled);
            if diff > 1e-10 * spec.c {
                log::warn!(
                    "biatomic block form deviates from bond sum by {diff:e} at k = ({}, {}); using bond sum",
                    k.k1,
                    k.k2
                );
                assembled
            } else {
                printed
            }
        }
    }
}

/// Mass matrix `M` and chiral matrix `Σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct InertiaMatrix {
    pub mass: DMatrix<Complex64>,
    pub sigma: DMatrix<Complex64>,
}

impl InertiaMatrix {
    /// `M − Σ`, the right-hand side of the generalized eigenproblem.
    pub fn pencil(&self) -> DMatrix<Complex64> {
        &self.mass - &self.sigma
    }
}

pub fn inertia(spec: &LatticeSpec) -> InertiaMatrix {
    let n = spec.flavor.dofs();
    let mut mass = DMatrix::<Complex64>::zeros(n, n);
    let mut sigma = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n / 2 {
        let (m, alpha) = if j == 0 {
            (spec.m1, spec.alpha1)
        } else {
            (spec.m2, spec.alpha2)
        };
        mass[(2 * j, 2 * j)] = Complex64::new(m, 0.0);
        mass[(2 * j + 1, 2 * j + 1)] = Complex64::new(m, 0.0);
        sigma[(2 * j, 2 * j + 1)] = Complex64::new(0.0, -alpha);
        sigma[(2 * j + 1, 2 * j)] = Complex64::new(0.0, alpha);
    }
    InertiaMatrix { mass, sigma }
}

/// Eigenvalues `m_j ± α_j` of `M − Σ`, ascending.
pub fn pencil_eigenvalues(spec: &LatticeSpec) -> Vec<f64> {
    let mut ev = match spec.flavor {
        Flavor::Monatomic => vec![spec.m1 - spec.alpha1, spec.m1 + spec.alpha1],
        Flavor::Biatomic => vec![
            spec.m1 - spec.alpha1,
            spec.m1 + spec.alpha1,
            spec.m2 - spec.alpha2,
            spec.m2 + spec.alpha2,
        ],
    };
    ev.sort_by(f64::total_cmp);
    ev
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Every junction satisfies `|α| < m`; all branches propagate.
    Subcritical,
    /// Some junction has `|α| = m` (within [`CRITICAL_RTOL`]); one branch goes to infinity.
    Critical,
    /// Biatomic only: the light junction is supercritical, the heavy one is not.
    Intercritical,
    /// Every junction satisfies `|α| > m`.
    Supercritical,
}

fn is_critical(m: f64, alpha: f64) -> bool {
    (m * m - alpha * alpha).abs() <= CRITICAL_RTOL * m * m
}

pub fn classify_regime(spec: &LatticeSpec) -> Regime {
    let species: &[(f64, f64)] = match spec.flavor {
        Flavor::Monatomic => &[(spec.m1, spec.alpha1)],
        Flavor::Biatomic => &[(spec.m1, spec.alpha1), (spec.m2, spec.alpha2)],
    };
    if species.iter().any(|&(m, a)| is_critical(m, a)) {
        return Regime::Critical;
    }
    let supercritical = species.iter().filter(|&&(m, a)| a.abs() > m).count();
    match (supercritical, species.len()) {
        (0, _) => Regime::Subcritical,
        (s, n) if s == n => Regime::Supercritical,
        _ => Regime::Intercritical,
    }
}

/// Number of propagating branches at a generic `k`: one per positive eigenvalue of `M − Σ`.
pub fn expected_branch_count(spec: &LatticeSpec) -> usize {
    let species: &[(f64, f64)] = match spec.flavor {
        Flavor::Monatomic => &[(spec.m1, spec.alpha1)],
        Flavor::Biatomic => &[(spec.m1, spec.alpha1), (spec.m2, spec.alpha2)],
    };
    species
        .iter()
        .map(|&(m, a)| {
            if is_critical(m, a) || a.abs() > m {
                1
            } else {
                2
            }
        })
        .sum()
}

/// Propagating radian frequencies at one `k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionBranches {
    /// Ascending, all `≥ 0`.
    pub omegas: Vec<f64>,
    pub regime: Regime,
    /// Roots with `ω² < 0` or `ω² = ∞` that were dropped.
    pub discarded: usize,
}

impl DispersionBranches {
    fn from_squares(squares: &[f64], total: usize, zero_tol: f64, regime: Regime) -> Self {
        let mut omegas: Vec<f64> = squares
            .iter()
            .filter(|x| x.is_finite() && **x >= -zero_tol)
            .map(|&x| if x <= zero_tol { 0.0 } else { x.sqrt() })
            .collect();
        omegas.sort_by(f64::total_cmp);
        DispersionBranches {
            discarded: total - omegas.len(),
            omegas,
            regime,
        }
    }
}

fn require(spec: &LatticeSpec, flavor: Flavor, op: &'static str) -> Result<(), DispersionError> {
    if spec.flavor == flavor {
        Ok(())
    } else {
        Err(DispersionError::WrongFlavor {
            op,
            expected: flavor,
        })
    }
}

/// Roots of `ω⁴(m² − α²) − ω² m trC + detC = 0` in `ω²`, for a monatomic lattice.
///
/// Returns `(lower, upper)`; `upper` is `None` at the critical point, where the
/// quadratic degenerates to `ω² = detC / (m trC)`.
pub fn biquadratic_roots(k: BlochVector, spec: &LatticeSpec) -> (f64, Option<f64>) {
    let c = stiffness_mono(k, spec);
    let (tr, det) = (c.trace(), c.det().max(0.0));
    let (m, alpha) = (spec.m1, spec.alpha1);
    let lead = if is_critical(m, alpha) {
        0.0
    } else {
        m * m - alpha * alpha
    };
    let disc = (m * m * tr * tr - 4.0 * lead * det).max(0.0);
    // q ≥ 0 always; both roots below avoid cancellation.
    let q = 0.5 * (m * tr + disc.sqrt());
    if q <= 0.0 {
        return (0.0, (lead != 0.0).then_some(0.0));
    }
    let lower = det / q;
    let upper = (lead != 0.0).then(|| q / lead);
    (lower, upper)
}

pub fn dispersion_mono(
    k: BlochVector,
    spec: &LatticeSpec,
) -> Result<DispersionBranches, DispersionError> {
    require(spec, Flavor::Monatomic, "dispersion_mono")?;
    let regime = classify_regime(spec);
    let (lower, upper) = biquadratic_roots(k, spec);
    let mut squares = vec![lower];
    let supercritical = spec.alpha1.abs() > spec.m1;
    if let Some(u) = upper {
        // Supercritical upper root is ≤ 0 analytically; it never propagates.
        if !supercritical {
            squares.push(u);
        }
    }
    let zero_tol = ZERO_RTOL * spec.c / spec.m1;
    Ok(DispersionBranches::from_squares(
        &squares, 2, zero_tol, regime,
    ))
}

/// Solves `C x = ω² (M − Σ) x` for a biatomic lattice.
pub fn dispersion_bi(
    k: BlochVector,
    spec: &LatticeSpec,
) -> Result<DispersionBranches, DispersionError> {
    require(spec, Flavor::Biatomic, "dispersion_bi")?;
    let regime = classify_regime(spec);
    let c = stiffness(k, spec);
    let b = inertia(spec).pencil();
    let scale = spec.c / spec.m1.min(spec.m2);
    let squares = pencil_squares(k, &c.0, &b, scale)?;
    Ok(DispersionBranches::from_squares(
        &squares,
        4,
        ZERO_RTOL * scale,
        regime,
    ))
}

pub fn dispersion(
    k: BlochVector,
    spec: &LatticeSpec,
) -> Result<DispersionBranches, DispersionError> {
    match spec.flavor {
        Flavor::Monatomic => dispersion_mono(k, spec),
        Flavor::Biatomic => dispersion_bi(k, spec),
    }
}

/// Lower Cholesky factor of a Hermitian matrix, `None` unless every pivot is
/// positive beyond `1e-12` of the largest diagonal entry.
fn hermitian_cholesky(a: &DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)].re.abs()).fold(0.0, f64::max);
    let mut l = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        let pivot = a[(j, j)].re - (0..j).map(|p| l[(j, p)].norm_sqr()).sum::<f64>();
        if !(pivot > 1e-12 * scale) {
            return None;
        }
        let d = pivot.sqrt();
        l[(j, j)] = Complex64::new(d, 0.0);
        for i in j + 1..n {
            let dot: Complex64 = (0..j).map(|p| l[(i, p)] * l[(j, p)].conj()).sum();
            l[(i, j)] = (a[(i, j)] - dot) / d;
        }
    }
    Some(l)
}

/// Eigenvalues of `L⁻¹ A L⁻ᴴ`, Hermitian because `A` is.
fn congruence_eigenvalues(l: &DMatrix<Complex64>, a: &DMatrix<Complex64>) -> Vec<f64> {
    let y = l
        .solve_lower_triangular(a)
        .expect("Cholesky factor is nonsingular");
    let z = l
        .solve_lower_triangular(&y.adjoint())
        .expect("Cholesky factor is nonsingular");
    SymmetricEigen::new(hermitian_part(&z))
        .eigenvalues
        .iter()
        .copied()
        .collect()
}

/// Finite eigenvalues `ω²` of the Hermitian pencil `(C, B)`; infinite ones are omitted.
fn pencil_squares(
    k: BlochVector,
    c: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
    scale: f64,
) -> Result<Vec<f64>, DispersionError> {
    if let Some(l) = hermitian_cholesky(b) {
        return Ok(congruence_eigenvalues(&l, c));
    }
    // B indefinite or singular: reduce with C when it is safely definite and invert
    // the eigenvalues of B relative to C.
    let c_eigs = StiffnessMatrix(c.clone()).eigenvalues();
    let c_max = c_eigs.last().copied().unwrap_or(0.0);
    if c_eigs[0] > 1e-8 * c_max {
        if let Some(l) = hermitian_cholesky(c) {
            let mu = congruence_eigenvalues(&l, b);
            let mu_max = mu.iter().fold(0.0f64, |acc, m| acc.max(m.abs()));
            return Ok(mu
                .into_iter()
                .filter(|m| m.abs() > 1e-12 * mu_max)
                .map(|m| 1.0 / m)
                .collect());
        }
    }
    signature_roots(k, c, b, scale)
}

/// Near `k = 0` with indefinite `B`, neither matrix can be factored safely.
///
/// With `B = W D Wᴴ` and `v = W |D|^{-1/2} y`, the pencil becomes `J Ĉ y = ω² y` where
/// `J = sign(D)`. Directions with `D = 0` carry infinite roots and are eliminated by a
/// Schur complement of `Ĉ`. The reduced matrix is not Hermitian, so the imaginary
/// parts of its eigenvalues are checked.
fn signature_roots(
    k: BlochVector,
    c: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
    scale: f64,
) -> Result<Vec<f64>, DispersionError> {
    let eig = SymmetricEigen::new(hermitian_part(b));
    let d_max = eig.eigenvalues.iter().fold(0.0f64, |a, d| a.max(d.abs()));
    let finite: Vec<usize> = (0..b.nrows())
        .filter(|&i| eig.eigenvalues[i].abs() > CRITICAL_RTOL * d_max)
        .collect();
    let infinite: Vec<usize> = (0..b.nrows()).filter(|i| !finite.contains(i)).collect();
    let w = &eig.eigenvectors;
    let chat = w.adjoint() * c * w;
    let pick = |rows: &[usize], cols: &[usize]| {
        DMatrix::from_fn(rows.len(), cols.len(), |r, q| chat[(rows[r], cols[q])])
    };
    let mut reduced = pick(&finite, &finite);
    if !infinite.is_empty() {
        let coupling = pick(&infinite, &finite);
        let pinv = hermitian_pinv(&pick(&infinite, &infinite));
        reduced -= coupling.adjoint() * pinv * coupling;
    }
    let n = finite.len();
    let jc = DMatrix::from_fn(n, n, |r, q| {
        let (dr, dq) = (eig.eigenvalues[finite[r]], eig.eigenvalues[finite[q]]);
        reduced[(r, q)] * (dr.signum() / (dr.abs() * dq.abs()).sqrt())
    });
    let roots: Vec<Complex64> = nalgebra::Schur::new(jc)
        .eigenvalues()
        .map(|v| v.iter().copied().collect())
        .unwrap_or_default();
    let tol = IMAG_RTOL * scale;
    if roots.len() != n || roots.iter().any(|z| z.im.abs() > tol) {
        return Err(DispersionError::ComplexEigenvalue {
            k,
            eigenvalues: roots.iter().map(|z| (z.re, z.im)).collect(),
            tolerance: tol,
        });
    }
    Ok(roots.into_iter().map(|z| z.re).collect())
}

fn hermitian_pinv(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = SymmetricEigen::new(hermitian_part(a));
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let inv = eig.eigenvalues.map(|x| {
        if x.abs() > 1e-12 * max {
            Complex64::new(1.0 / x, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.adjoint()
}

/// `det(C − x B)`; real for real `x` since both matrices are Hermitian.
pub fn pencil_det(c: &DMatrix<Complex64>, b: &DMatrix<Complex64>, x: f64) -> f64 {
    (c - b.map(|z| z * x)).determinant().re
}

/// Result of the brute-force determinant scan.
#[derive(Debug, Clone, PartialEq)]
pub struct DetScan {
    pub omegas: Vec<f64>,
    /// Propagating branch count predicted from the regime.
    pub expected: usize,
    pub warning: Option<String>,
}

/// Locates the roots of `ω ↦ det[C − ω²(M − Σ)]` on `[0, omega_max]` by sign-change
/// scanning followed by bisection.
///
/// Independent of the eigen-solvers; used to check them. Roots of even multiplicity
/// (band crossings) are invisible to the scan except at the origin.
pub fn dispersion_det_scan(
    k: BlochVector,
    spec: &LatticeSpec,
    omega_max: f64,
    steps: usize,
) -> Result<DetScan, DispersionError> {
    if !(omega_max > 0.0) || steps < 100 {
        return Err(DispersionError::ScanParameters { omega_max, steps });
    }
    let c = stiffness_bond_sum(k, spec).0;
    let b = inertia(spec).pencil();
    let f = |omega: f64| pencil_det(&c, &b, omega * omega);
    let norm = c
        .iter()
        .chain(b.iter())
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt();
    let origin_tol = 1e-12 * norm.powi(c.nrows() as i32);

    let mut omegas = Vec::new();
    let mut lo = 0.0;
    let mut f_lo = f(lo);
    if f_lo.abs() <= origin_tol {
        omegas.push(0.0);
        // Step off the root so it is not counted twice.
        lo = omega_max / steps as f64 * 1e-3;
        f_lo = f(lo);
    }
    for j in 1..=steps {
        let hi = omega_max * j as f64 / steps as f64;
        let f_hi = f(hi);
        if f_hi == 0.0 {
            omegas.push(hi);
        } else if f_lo != 0.0 && f_lo.signum() != f_hi.signum() {
            omegas.push(bisect(&f, lo, hi, f_lo));
        }
        lo = hi;
        f_lo = f_hi;
    }
    let expected = expected_branch_count(spec);
    let warning = (omegas.len() != expected).then(|| {
        let msg = format!(
            "det scan found {} roots below {omega_max} at k = ({}, {}), regime predicts {expected}",
            omegas.len(),
            k.k1,
            k.k2
        );
        log::warn!("{msg}");
        msg
    });
    Ok(DetScan {
        omegas,
        expected,
        warning,
    })
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Upper bound for the propagating `ω` at `k`: `|ω²| ≤ ‖C‖ / σ_min(M − Σ)`.
///
/// At a critical point `σ_min` vanishes; the smallest nonzero singular value is used
/// instead, which is a heuristic rather than a bound. Where `C = 0` every root is
/// zero and the lattice frequency scale is returned so the scan interval is nonempty.
pub fn scan_bound(k: BlochVector, spec: &LatticeSpec) -> f64 {
    let c = stiffness_bond_sum(k, spec).0;
    let c_norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if c_norm == 0.0 {
        return spec.omega_scale();
    }
    let sigma_min = pencil_eigenvalues(spec)
        .into_iter()
        .map(f64::abs)
        .filter(|s| *s > CRITICAL_RTOL * spec.m1.max(spec.m2))
        .fold(f64::INFINITY, f64::min);
    (c_norm / sigma_min).sqrt() * 1.05
}

/// Long-wave approximations of the monatomic branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowFrequency {
    /// Shear-dominated branch, defined for every `α`.
    pub omega1: f64,
    /// Pressure-dominated branch, only for `|α| < m`.
    pub omega2: Option<f64>,
}

pub fn lowfreq_mono(k: BlochVector, spec: &LatticeSpec) -> Result<LowFrequency, DispersionError> {
    require(spec, Flavor::Monatomic, "lowfreq_mono")?;
    let (k1l, k2l) = k.scaled(spec.l);
    let kk = k1l * k1l + k2l * k2l;
    let (c, m, alpha) = (spec.c, spec.m1, spec.alpha1);
    let root = (m * m + 3.0 * alpha * alpha).sqrt();
    if is_critical(m, alpha) {
        return Ok(LowFrequency {
            omega1: 3.0 / 8.0 * (2.0 * c / m * kk).sqrt(),
            omega2: None,
        });
    }
    // (2m − √(m²+3α²)) / (m² − α²) = 3 / (2m + √(m²+3α²)), free of cancellation near α = m.
    let omega1 = (3.0 * c / 8.0 * 3.0 / (2.0 * m + root) * kk).sqrt();
    let omega2 = (alpha.abs() < m)
        .then(|| (3.0 * c / 8.0 * (2.0 * m + root) / (m * m - alpha * alpha) * kk).sqrt());
    Ok(LowFrequency { omega1, omega2 })
}

/// Nearest-neighbour scalar (out-of-plane) triangular lattice.
pub fn scalar_lattice_dispersion(k: BlochVector, c_s: f64, m_s: f64, l: f64) -> f64 {
    let (k1l, k2l) = k.scaled(l);
    let x = (k1l / 2.0).cos();
    let y = (3f64.sqrt() * k2l / 2.0).cos();
    (c_s / m_s * (8.0 - 4.0 * x * x - 4.0 * x * y))
        .max(0.0)
        .sqrt()
}

/// Ratio `c_s / m_s` giving a scalar lattice the same long-wave dispersion as the
/// shear branch of the chiral vector lattice.
pub fn equivalent_scalar_ratio(m: f64, alpha: f64, c: f64) -> f64 {
    let a2 = (alpha / m).powi(2);
    if is_critical(m, alpha) {
        return 3.0 * c / (16.0 * m);
    }
    let printed = c / (4.0 * m) * ((1.0 + 3.0 * a2).sqrt() - 2.0) / (a2 - 1.0);
    if (a2 - 1.0).abs() < 1e-6 {
        // Same value without the 0/0 cancellation.
        return 3.0 * c / (4.0 * m * (2.0 + (1.0 + 3.0 * a2).sqrt()));
    }
    printed
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn mono(alpha: f64) -> LatticeSpec {
        LatticeSpec::monatomic(1.0, alpha)
    }

    fn bi(alpha: f64) -> LatticeSpec {
        LatticeSpec::biatomic(1.0, 10.0, alpha, alpha)
    }

    fn k(k1l: f64, k2l: f64) -> BlochVector {
        BlochVector::new(k1l, k2l)
    }

    fn random_ks(n: usize, seed: u64) -> Vec<BlochVector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                k(
                    rng.random_range(-2.0 * PI..2.0 * PI),
                    rng.random_range(-2.0 * PI..2.0 * PI),
                )
            })
            .collect()
    }

    fn real(m: &StiffnessMatrix) -> Vec<f64> {
        m.0.iter().map(|z| z.re).collect()
    }

    #[test]
    fn mono_stiffness_examples() {
        let z = stiffness_mono(k(0.0, 0.0), &mono(0.0));
        assert!(z.0.iter().all(|x| x.norm() < 1e-15));
        let c = stiffness_mono(k(PI, PI / 3f64.sqrt()), &mono(0.0));
        let s3 = 3f64.sqrt();
        for (got, want) in real(&c).iter().zip([5.0, s3, s3, 3.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-14);
        }
        let p = k(0.37, -1.2);
        assert_eq!(
            stiffness_mono(p, &mono(0.0)),
            stiffness_mono(-p, &mono(0.0))
        );
    }

    #[test]
    fn bond_table_matches_geometry() {
        // Junction positions in units of l; junction 1 sits at (1, 0) in the biatomic cell.
        for flavor in [Flavor::Monatomic, Flavor::Biatomic] {
            let spec = LatticeSpec {
                flavor,
                ..LatticeSpec::default()
            };
            let t = cell_basis(&spec).translations(flavor);
            let site = |j: usize| {
                if j == 0 {
                    Vector2::zeros()
                } else {
                    Vector2::new(1.0, 0.0)
                }
            };
            for b in bonds(flavor) {
                let target = site(b.to) + t * Vector2::new(b.cell.0 as f64, b.cell.1 as f64);
                assert_abs_diff_eq!((target - site(b.from) - b.dir).norm(), 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn bond_sum_matches_mono_closed_form() {
        for spec in [mono(0.0), mono(0.0).with_bond(1.7, 2.5)] {
            for p in random_ks(100, 1) {
                let d = stiffness_bond_sum(p, &spec).max_abs_diff(&stiffness_mono(p, &spec));
                assert!(d <= 1e-12, "deviation {d}");
            }
        }
    }

    #[test]
    fn bond_sum_matches_bi_blocks() {
        for p in random_ks(100, 2) {
            let printed = stiffness_bi(p, &bi(0.0));
            assert!(printed.hermiticity_residual() <= 1e-12);
            assert!(printed.max_abs_diff(&stiffness_bond_sum(p, &bi(0.0))) <= 1e-12);
        }
    }

    #[test]
    fn bi_stiffness_at_origin() {
        let c = stiffness_bi(k(0.0, 0.0), &bi(0.0));
        let s3 = 3f64.sqrt();
        let c11 = [2.5, -s3 / 2.0, -s3 / 2.0, 1.5];
        for r in 0..2 {
            for col in 0..2 {
                assert_abs_diff_eq!(c.0[(r, col)].re, c11[2 * r + col], epsilon = 1e-14);
                assert_abs_diff_eq!(c.0[(r + 2, col)].re, -c11[2 * r + col], epsilon = 1e-14);
                assert_abs_diff_eq!(c.0[(r + 2, col)].im, 0.0, epsilon = 1e-14);
            }
        }
        let ev = c.eigenvalues();
        assert_abs_diff_eq!(ev[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ev[1], 0.0, epsilon = 1e-12);
        assert!(ev[2] > 0.1);
        // Rigid translation (v, v) is force-free; every row sums to zero.
        for r in 0..4 {
            let row_sum: Complex64 = (0..4)
                .map(|col| stiffness_bond_sum(k(0.0, 0.0), &bi(0.0)).0[(r, col)])
                .sum();
            assert!(row_sum.norm() < 1e-14);
        }
    }

    #[test]
    fn stiffness_positive_semidefinite() {
        for p in random_ks(50, 3) {
            assert!(stiffness_mono(p, &mono(0.0)).eigenvalues()[0] > -1e-12);
            assert!(stiffness(p, &bi(0.0)).eigenvalues()[0] > -1e-12);
        }
    }

    #[test]
    fn inertia_examples() {
        let i0 = inertia(&mono(0.0));
        assert!(i0.sigma.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        assert_eq!(i0.pencil(), i0.mass);
        let ev = StiffnessMatrix(inertia(&mono(0.5)).pencil()).eigenvalues();
        assert_abs_diff_eq!(ev[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(ev[1], 1.5, epsilon = 1e-14);
        let ev = StiffnessMatrix(inertia(&bi(2.0)).pencil()).eigenvalues();
        for (got, want) in ev.iter().zip([-1.0, 3.0, 8.0, 12.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-13);
        }
        assert_eq!(pencil_eigenvalues(&bi(2.0)), vec![-1.0, 3.0, 8.0, 12.0]);
    }

    #[test]
    fn inertia_matches_rotation_form() {
        // M − Σ = m I + iα R with R = [[0, 1], [-1, 0]].
        let p = inertia(&LatticeSpec::monatomic(1.3, 0.7)).pencil();
        assert_eq!(p[(0, 0)], Complex64::new(1.3, 0.0));
        assert_eq!(p[(0, 1)], Complex64::new(0.0, 0.7));
        assert_eq!(p[(1, 0)], Complex64::new(0.0, -0.7));
        let s = inertia(&bi(0.3)).sigma;
        assert_eq!(s, s.adjoint());
        assert!((0..4).all(|i| s[(i, i)] == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn mono_dispersion_examples() {
        let p = k(PI, PI / 3f64.sqrt());
        let b = dispersion_mono(p, &mono(0.0)).unwrap();
        assert_eq!(b.omegas.len(), 2);
        assert_relative_eq!(b.omegas[0], 2f64.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(b.omegas[1], 6f64.sqrt(), max_relative = 1e-13);
        let crit = dispersion_mono(p, &mono(1.0)).unwrap();
        assert_eq!(crit.regime, Regime::Critical);
        assert_eq!(crit.omegas.len(), 1);
        assert_abs_diff_eq!(crit.omegas[0], 1.5f64.sqrt(), epsilon = 1e-14);
        let sup = dispersion_mono(k(0.8, -1.9), &mono(2.0)).unwrap();
        assert_eq!((sup.omegas.len(), sup.discarded), (1, 1));
        let zero = dispersion_mono(k(0.0, 0.0), &mono(0.5)).unwrap();
        assert_eq!(zero.omegas, vec![0.0, 0.0]);
        assert_eq!(
            dispersion_mono(k(0.0, 0.0), &mono(2.0)).unwrap().omegas,
            vec![0.0]
        );
        assert!(matches!(
            dispersion_mono(p, &bi(0.0)),
            Err(DispersionError::WrongFlavor { .. })
        ));
    }

    #[test]
    fn long_wave_ratio_is_sqrt3() {
        let b = dispersion_mono(k(1e-3 / 2f64.sqrt(), 1e-3 / 2f64.sqrt()), &mono(0.0)).unwrap();
        assert_relative_eq!(b.omegas[1] / b.omegas[0], 3f64.sqrt(), max_relative = 1e-3);
    }

    #[test]
    fn root_product_and_sign() {
        for alpha in [0.0, 0.5, 0.9, 1.5, 3.0] {
            let spec = mono(alpha);
            for p in random_ks(20, 4) {
                let c = stiffness_mono(p, &spec);
                let (lo, hi) = biquadratic_roots(p, &spec);
                let product = lo * hi.unwrap();
                let expect = c.det() / (1.0 - alpha * alpha);
                assert_relative_eq!(product, expect, max_relative = 1e-10);
                assert_eq!(product < 0.0, alpha > 1.0);
            }
        }
    }

    #[test]
    fn handedness_does_not_matter() {
        for p in random_ks(20, 5) {
            for alpha in [0.3, 1.0, 2.5] {
                assert_eq!(
                    dispersion(p, &mono(alpha)).unwrap(),
                    dispersion(p, &mono(-alpha)).unwrap()
                );
                let (a, b) = (
                    dispersion(p, &bi(alpha)).unwrap(),
                    dispersion(p, &bi(-alpha)).unwrap(),
                );
                for (x, y) in a.omegas.iter().zip(&b.omegas) {
                    assert_relative_eq!(x, y, max_relative = 1e-10);
                }
            }
        }
    }

    #[test]
    fn bi_contains_mono_branches() {
        // A monatomic Bloch wave also satisfies the coarser biatomic periodicity.
        for alpha in [0.0, 0.5, 2.0] {
            let m = mono(alpha);
            let b = LatticeSpec::biatomic(1.0, 1.0, alpha, alpha);
            for p in random_ks(20, 6) {
                let bw = dispersion_bi(p, &b).unwrap();
                for w in dispersion_mono(p, &m).unwrap().omegas {
                    let close = bw
                        .omegas
                        .iter()
                        .any(|x| (x - w).abs() <= 1e-10 * w.max(1.0));
                    assert!(close, "ω = {w} missing from {:?}", bw.omegas);
                }
            }
        }
    }

    #[test]
    fn bi_branch_counts_by_regime() {
        for (alpha, count, regime) in [
            (0.5, 4, Regime::Subcritical),
            (5.0, 3, Regime::Intercritical),
            (12.0, 2, Regime::Supercritical),
            (1.0, 3, Regime::Critical),
            (10.0, 2, Regime::Critical),
        ] {
            for p in random_ks(20, 7) {
                let b = dispersion_bi(p, &bi(alpha)).unwrap();
                assert_eq!(b.regime, regime);
                assert_eq!(b.omegas.len(), count, "alpha {alpha}: {:?}", b.omegas);
                assert_eq!(b.discarded, 4 - count);
            }
            assert_eq!(expected_branch_count(&bi(alpha)), count);
        }
    }

    #[test]
    fn bi_origin_keeps_two_zero_branches() {
        for alpha in [0.0, 0.5, 1.0, 5.0, 12.0] {
            let b = dispersion_bi(k(0.0, 0.0), &bi(alpha)).unwrap();
            assert!(b.omegas.len() >= 2, "alpha {alpha}: {:?}", b.omegas);
            assert_eq!(&b.omegas[..2], &[0.0, 0.0], "alpha {alpha}: {:?}", b.omegas);
        }
    }

    #[test]
    fn regimes() {
        assert_eq!(classify_regime(&mono(0.5)), Regime::Subcritical);
        assert_eq!(classify_regime(&mono(2.0)), Regime::Supercritical);
        assert_eq!(classify_regime(&mono(-1.0)), Regime::Critical);
        assert_eq!(classify_regime(&mono(1.0 + 1e-14)), Regime::Critical);
        assert_eq!(classify_regime(&bi(5.0)), Regime::Intercritical);
        assert_eq!(classify_regime(&bi(0.5)), Regime::Subcritical);
        assert_eq!(classify_regime(&bi(12.0)), Regime::Supercritical);
    }

    #[test]
    fn det_scan_agrees_with_solvers() {
        for (spec, seed) in [
            (mono(0.0), 10),
            (mono(0.5), 11),
            (mono(1.0), 12),
            (mono(2.0), 13),
            (bi(0.5), 14),
            (bi(1.0), 15),
            (bi(5.0), 16),
            (bi(12.0), 17),
        ] {
            for p in random_ks(10, seed) {
                let solved = dispersion(p, &spec).unwrap();
                let scan = dispersion_det_scan(p, &spec, scan_bound(p, &spec), 4000).unwrap();
                assert!(scan.warning.is_none(), "{:?}", scan.warning);
                assert_eq!(scan.omegas.len(), solved.omegas.len());
                for (a, b) in scan.omegas.iter().zip(&solved.omegas) {
                    assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn det_scan_origin_and_errors() {
        let s = dispersion_det_scan(k(0.0, 0.0), &mono(0.5), 3.0, 200).unwrap();
        assert_eq!(s.omegas, vec![0.0]);
        assert!(s.warning.is_some());
        assert!(matches!(
            dispersion_det_scan(k(1.0, 0.0), &mono(0.5), 3.0, 10),
            Err(DispersionError::ScanParameters { .. })
        ));
    }

    #[test]
    fn lowfreq_reduces_without_spinners() {
        let p = k(0.01, -0.02);
        let lf = lowfreq_mono(p, &mono(0.0)).unwrap();
        let kk: f64 = 0.01f64.powi(2) + 0.02f64.powi(2);
        assert_relative_eq!(lf.omega1, (3.0 / 8.0 * kk).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(
            lf.omega2.unwrap(),
            3f64.sqrt() * lf.omega1,
            max_relative = 1e-14
        );
    }

    #[test]
    fn lowfreq_matches_printed_form_off_critical() {
        // The printed expression, kept literal here as the reference.
        let printed = |m: f64, a: f64, c: f64, kk: f64| {
            (3.0 * c / 8.0 * ((2.0 * m - (m * m + 3.0 * a * a).sqrt()) / (m * m - a * a)) * kk)
                .sqrt()
        };
        for a in [0.0, 0.3, 0.5, 0.9, 1.5, 2.0, 7.0] {
            let lf = lowfreq_mono(k(0.01, 0.01), &mono(a)).unwrap();
            assert_relative_eq!(lf.omega1, printed(1.0, a, 1.0, 2e-4), max_relative = 1e-12);
        }
        let lf = lowfreq_mono(k(0.01, 0.01), &mono(0.5)).unwrap();
        assert_relative_eq!(lf.omega1, 8.2286e-3, max_relative = 5e-5);
        assert!(lowfreq_mono(k(0.01, 0.01), &mono(2.0))
            .unwrap()
            .omega2
            .is_none());
        assert!(lowfreq_mono(k(0.01, 0.01), &mono(1.0))
            .unwrap()
            .omega2
            .is_none());
    }

    #[test]
    fn lowfreq_critical_limit() {
        // ω1² / |kl|² → 9c / (32m) as α → m.
        let kk = 2e-4;
        let crit = lowfreq_mono(k(0.01, 0.01), &mono(1.0)).unwrap().omega1;
        assert_relative_eq!(crit * crit / kk, 9.0 / 32.0, max_relative = 1e-14);
        for a in [1.0 - 1e-6, 1.0 + 1e-6] {
            let near = lowfreq_mono(k(0.01, 0.01), &mono(a)).unwrap().omega1;
            assert_relative_eq!(near, crit, max_relative = 1e-6);
        }
    }

    #[test]
    fn lowfreq_tracks_full_dispersion() {
        for a in [0.0, 0.5, 0.999, 1.0, 2.0] {
            let spec = mono(a);
            let p = k(0.006, 0.008);
            let full = dispersion_mono(p, &spec).unwrap();
            let lf = lowfreq_mono(p, &spec).unwrap();
            assert_relative_eq!(lf.omega1, full.omegas[0], max_relative = 1e-2);
            if let Some(w2) = lf.omega2 {
                assert_relative_eq!(w2, full.omegas[1], max_relative = 1e-2);
            }
        }
    }

    #[test]
    fn scalar_lattice_examples() {
        assert_eq!(scalar_lattice_dispersion(k(0.0, 0.0), 1.0, 1.0, 1.0), 0.0);
        let p = k(0.01 / 2f64.sqrt(), 0.01 / 2f64.sqrt());
        let approx_low = (1.5f64 * 1e-4).sqrt();
        assert_relative_eq!(
            scalar_lattice_dispersion(p, 1.0, 1.0, 1.0),
            approx_low,
            max_relative = 5e-3
        );
        // (2π, 0) is not a reciprocal vector of the triangular lattice; 2π(1, 1/√3) is.
        assert_relative_eq!(
            scalar_lattice_dispersion(k(2.0 * PI, 0.0), 1.0, 1.0, 1.0),
            8f64.sqrt(),
            max_relative = 1e-14
        );
        assert_abs_diff_eq!(
            scalar_lattice_dispersion(k(2.0 * PI, 2.0 * PI / 3f64.sqrt()), 1.0, 1.0, 1.0),
            0.0,
            epsilon = 1e-7
        );
    }

    #[test]
    fn scalar_ratio_examples() {
        assert_relative_eq!(equivalent_scalar_ratio(1.0, 0.0, 1.0), 0.25);
        assert_relative_eq!(equivalent_scalar_ratio(2.0, 0.0, 3.0), 3.0 / 8.0);
        assert_relative_eq!(
            equivalent_scalar_ratio(1.0, 2.0, 1.0),
            (13f64.sqrt() - 2.0) / 12.0,
            max_relative = 1e-14
        );
        assert_eq!(equivalent_scalar_ratio(1.0, 1.0, 1.0), 3.0 / 16.0);
        assert_eq!(equivalent_scalar_ratio(1.0, -1.0, 1.0), 3.0 / 16.0);
        for a in [1.0 - 1e-4, 1.0 + 1e-4] {
            assert_abs_diff_eq!(
                equivalent_scalar_ratio(1.0, a, 1.0),
                3.0 / 16.0,
                epsilon = 1e-4 * 0.1
            );
        }
    }

    #[test]
    fn six_fold_symmetry() {
        for alpha in [0.0, 0.5, 2.0] {
            for p in random_ks(20, 8) {
                let base = dispersion_mono(p, &mono(alpha)).unwrap();
                let rot = dispersion_mono(p.rotated(PI / 3.0), &mono(alpha)).unwrap();
                for (a, b) in base.omegas.iter().zip(&rot.omegas) {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn alpha_monotonicity_along_diagonal() {
        let p = k(PI / 2.0, PI / 2.0);
        let mut prev: Option<DispersionBranches> = None;
        for i in 0..20 {
            let b = dispersion_mono(p, &mono(0.95 * i as f64 / 19.0)).unwrap();
            if let Some(q) = &prev {
                assert!(b.omegas[0] <= q.omegas[0]);
                assert!(b.omegas[1] >= q.omegas[1]);
            }
            prev = Some(b);
        }
    }
}

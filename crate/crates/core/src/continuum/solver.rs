//! Linear solves for the assembled continuum system.
//!
//! Direct factorization (faer): Bunch-Kaufman on the real equivalent when the
//! matrix is symmetric, sparse LU otherwise. Under [`SolverKind::Auto`] grids
//! above [`SYMMETRIC_DIRECT_NODE_LIMIT`] or [`DIRECT_NODE_LIMIT`] nodes use
//! restarted GMRES with an ILU(0) preconditioner. Both paths must reach the
//! requested relative residual or fail.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::perm::PermRef;
use faer::prelude::*;
use faer::sparse::linalg::amd;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, IntranodeLbltRef, SymbolicCholesky,
    SymmetricOrdering,
};
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::linalg::SupernodalThreshold;
use faer::sparse::{SparseColMat, SymbolicSparseColMatRef, Triplet};
use faer::{c64, Conj, Par, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::operator::{assemble_operator, norm, unknown, SparseSystem};
use super::scene::ContinuumScene;
use super::{ComplexField, ContinuumError};
use crate::exec::Execution;

/// Node limit for the LU path under [`SolverKind::Auto`]; about 4 GB at the limit.
pub const DIRECT_NODE_LIMIT: usize = 420 * 420;
/// Node limit for the symmetric path under [`SolverKind::Auto`]; about 4.5 GB at the limit.
pub const SYMMETRIC_DIRECT_NODE_LIMIT: usize = 600 * 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    #[default]
    Auto,
    Direct,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub kind: SolverKind,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub restart: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            kind: SolverKind::Auto,
            tolerance: 1e-6,
            max_iterations: 5000,
            restart: 80,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub field: ComplexField,
    pub residual: f64,
    /// Relative residual after each refinement step or Krylov iteration.
    pub history: Vec<f64>,
    pub method: SolverKind,
}

/// Assembles and solves the scene.
pub fn solve(scene: &ContinuumScene, exec: Execution) -> Result<Solution, ContinuumError> {
    let system = assemble_operator(scene, exec)?;
    let opts = scene.config.solver;
    let kind = match opts.kind {
        SolverKind::Auto => {
            let limit = if system.is_symmetric() {
                SYMMETRIC_DIRECT_NODE_LIMIT
            } else {
                DIRECT_NODE_LIMIT
            };
            if scene.grid.len() <= limit {
                SolverKind::Direct
            } else {
                SolverKind::Iterative
            }
        }
        k => k,
    };
    let (x, history) = solve_system(&system, kind, &opts, exec)?;
    let g = &scene.grid;
    let mut field = ComplexField::zeros(*g);
    for j in 1..g.n - 1 {
        for i in 1..g.n - 1 {
            let idx = g.index(i, j);
            field.u1[idx] = x[unknown(g, i, j, 0)];
            field.u2[idx] = x[unknown(g, i, j, 1)];
        }
    }
    Ok(Solution {
        field,
        residual: *history.last().unwrap_or(&0.0),
        history,
        method: kind,
    })
}

/// Solves `A x = b`, returning `x` and the residual history.
pub fn solve_system(
    system: &SparseSystem,
    kind: SolverKind,
    opts: &SolverOptions,
    exec: Execution,
) -> Result<(Vec<Complex64>, Vec<f64>), ContinuumError> {
    if norm(&system.rhs) == 0.0 {
        return Ok((vec![Complex64::new(0.0, 0.0); system.dim], vec![0.0]));
    }
    match kind {
        SolverKind::Iterative => gmres(system, opts, exec),
        _ => direct(system, opts, exec),
    }
}

fn direct(
    system: &SparseSystem,
    opts: &SolverOptions,
    exec: Execution,
) -> Result<(Vec<Complex64>, Vec<f64>), ContinuumError> {
    // Sequential factorization keeps results bitwise reproducible.
    faer::set_global_parallelism(Par::Seq);
    let factor = if system.is_symmetric() {
        DirectFactor::Lblt(RealLblt::new(system)?)
    } else {
        DirectFactor::Lu(complex_lu(system)?)
    };
    let mut x = factor.solve(&system.rhs);
    let mut history = vec![system.relative_residual(&x, exec)];
    // Iterative refinement against the assembled matrix.
    for _ in 0..3 {
        if *history.last().unwrap() <= 1e-3 * opts.tolerance {
            break;
        }
        let ax = system.matvec(&x, exec);
        let r: Vec<Complex64> = system.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let dx = factor.solve(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        history.push(system.relative_residual(&x, exec));
    }
    let residual = *history.last().unwrap();
    if !(residual <= opts.tolerance) {
        return Err(ContinuumError::Residual {
            residual,
            tolerance: opts.tolerance,
        });
    }
    Ok((x, history))
}

fn factorization_error(e: impl std::fmt::Debug) -> ContinuumError {
    ContinuumError::Factorization(format!("{e:?}"))
}

enum DirectFactor {
    Lu(Lu<usize, c64>),
    Lblt(RealLblt),
}

impl DirectFactor {
    fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        match self {
            DirectFactor::Lu(lu) => {
                let sol = lu.solve(Mat::<c64>::from_fn(b.len(), 1, |r, _| b[r]));
                (0..b.len()).map(|r| sol[(r, 0)]).collect()
            }
            DirectFactor::Lblt(f) => f.solve(b),
        }
    }
}

fn complex_lu(system: &SparseSystem) -> Result<Lu<usize, c64>, ContinuumError> {
    let mut triplets = Vec::with_capacity(system.nnz());
    for r in 0..system.dim {
        for p in system.indptr[r]..system.indptr[r + 1] {
            triplets.push(Triplet::new(r, system.indices[p], system.values[p]));
        }
    }
    let a = SparseColMat::<usize, c64>::try_new_from_triplets(system.dim, system.dim, &triplets)
        .map_err(factorization_error)?;
    a.sp_lu().map_err(factorization_error)
}

/// Supernodal Bunch-Kaufman factorization of the real equivalent of a complex
/// symmetric matrix.
///
/// `(Ar + i Ai)(xr + i xi) = br + i bi` is solved as the real symmetric system
/// `[[Ar, Ai], [Ai, -Ar]] [xr; -xi] = [br; bi]`, interleaved per unknown. The
/// fill-reducing order is computed on the complex pattern and applied to both
/// halves of each unknown.
struct RealLblt {
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
    subdiag: Vec<f64>,
    perm_fwd: Vec<usize>,
    perm_inv: Vec<usize>,
}

impl RealLblt {
    fn new(system: &SparseSystem) -> Result<Self, ContinuumError> {
        let n = system.dim;
        // A symmetric pattern reads the same as CSR or CSC.
        let pattern =
            SymbolicSparseColMatRef::new_checked(n, n, &system.indptr, None, &system.indices);
        let (mut fwd, mut inv) = (vec![0usize; n], vec![0usize; n]);
        let mut mem = MemBuffer::try_new(amd::order_scratch::<usize>(n, system.nnz()))
            .map_err(factorization_error)?;
        amd::order(
            &mut fwd,
            &mut inv,
            pattern,
            amd::Control::default(),
            MemStack::new(&mut mem),
        )
        .map_err(factorization_error)?;
        drop(mem);
        let n2 = 2 * n;
        let mut fwd2 = vec![0usize; n2];
        let mut inv2 = vec![0usize; n2];
        for (k, &f) in fwd.iter().enumerate() {
            fwd2[2 * k] = 2 * f;
            fwd2[2 * k + 1] = 2 * f + 1;
        }
        for (k, &f) in fwd2.iter().enumerate() {
            inv2[f] = k;
        }
        let mut triplets = Vec::with_capacity(2 * system.nnz() + n);
        for r in 0..n {
            for p in system.indptr[r]..system.indptr[r + 1] {
                let c = system.indices[p];
                let (ar, ai) = (system.values[p].re, system.values[p].im);
                if c < r {
                    triplets.push(Triplet::new(2 * r, 2 * c, ar));
                    triplets.push(Triplet::new(2 * r, 2 * c + 1, ai));
                    triplets.push(Triplet::new(2 * r + 1, 2 * c, ai));
                    triplets.push(Triplet::new(2 * r + 1, 2 * c + 1, -ar));
                } else if c == r {
                    triplets.push(Triplet::new(2 * r, 2 * r, ar));
                    triplets.push(Triplet::new(2 * r + 1, 2 * r, ai));
                    triplets.push(Triplet::new(2 * r + 1, 2 * r + 1, -ar));
                }
            }
        }
        let lower = SparseColMat::<usize, f64>::try_new_from_triplets(n2, n2, &triplets)
            .map_err(factorization_error)?;
        drop(triplets);
        let perm = PermRef::new_checked(&fwd2, &inv2, n2);
        let params = CholeskySymbolicParams {
            supernodal_flop_ratio_threshold: SupernodalThreshold::FORCE_SUPERNODAL,
            ..Default::default()
        };
        let symbolic = factorize_symbolic_cholesky(
            lower.symbolic(),
            Side::Lower,
            SymmetricOrdering::Custom(perm),
            params,
        )
        .map_err(factorization_error)?;
        let mut values = vec![0.0; symbolic.len_val()];
        let mut subdiag = vec![0.0; n2];
        let (mut perm_fwd, mut perm_inv) = (vec![0usize; n2], vec![0usize; n2]);
        let lblt_params = Default::default();
        let mut mem = MemBuffer::try_new(
            symbolic.factorize_numeric_intranode_lblt_scratch::<f64>(Par::Seq, lblt_params),
        )
        .map_err(factorization_error)?;
        symbolic.factorize_numeric_intranode_lblt(
            &mut values,
            &mut subdiag,
            &mut perm_fwd,
            &mut perm_inv,
            lower.rb(),
            Side::Lower,
            Par::Seq,
            MemStack::new(&mut mem),
            lblt_params,
        );
        if values.iter().chain(&subdiag).any(|v| !v.is_finite()) {
            return Err(ContinuumError::Factorization(
                "LBLT: non-finite factor".into(),
            ));
        }
        Ok(RealLblt {
            symbolic,
            values,
            subdiag,
            perm_fwd,
            perm_inv,
        })
    }

    fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n2 = 2 * b.len();
        let mut rhs =
            Mat::<f64>::from_fn(
                n2,
                1,
                |r, _| if r % 2 == 0 { b[r / 2].re } else { b[r / 2].im },
            );
        let perm = PermRef::new_checked(&self.perm_fwd, &self.perm_inv, n2);
        let factor = IntranodeLbltRef::new(&self.symbolic, &self.values, &self.subdiag, perm);
        let mut mem = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
        factor.solve_in_place_with_conj(Conj::No, rhs.as_mut(), Par::Seq, MemStack::new(&mut mem));
        (0..b.len())
            .map(|r| Complex64::new(rhs[(2 * r, 0)], -rhs[(2 * r + 1, 0)]))
            .collect()
    }
}

/// Incomplete LU factorization with the sparsity pattern of `A`.
struct Ilu0 {
    values: Vec<Complex64>,
    diag: Vec<usize>,
}

impl Ilu0 {
    fn new(a: &SparseSystem) -> Result<Self, ContinuumError> {
        let mut values = a.values.clone();
        let mut diag = vec![usize::MAX; a.dim];
        for (r, d) in diag.iter_mut().enumerate() {
            if let Ok(p) = a.indices[a.indptr[r]..a.indptr[r + 1]].binary_search(&r) {
                *d = a.indptr[r] + p;
            }
        }
        if let Some(r) = diag.iter().position(|&d| d == usize::MAX) {
            return Err(ContinuumError::Factorization(format!(
                "ILU(0): empty diagonal in row {r}"
            )));
        }
        for r in 0..a.dim {
            let (start, end) = (a.indptr[r], a.indptr[r + 1]);
            for p in start..end {
                let k = a.indices[p];
                if k >= r {
                    break;
                }
                let pivot = values[diag[k]];
                if pivot.norm() == 0.0 {
                    return Err(ContinuumError::Factorization(format!(
                        "ILU(0): zero pivot in row {k}"
                    )));
                }
                let factor = values[p] / pivot;
                values[p] = factor;
                // Row r -= factor * row k, restricted to the pattern of row r.
                let mut q = p + 1;
                for kp in diag[k] + 1..a.indptr[k + 1] {
                    let col = a.indices[kp];
                    while q < end && a.indices[q] < col {
                        q += 1;
                    }
                    if q < end && a.indices[q] == col {
                        let upper = values[kp];
                        values[q] -= factor * upper;
                    }
                }
            }
        }
        Ok(Ilu0 { values, diag })
    }

    fn apply(&self, a: &SparseSystem, b: &[Complex64]) -> Vec<Complex64> {
        let mut y = b.to_vec();
        for r in 0..a.dim {
            let mut acc = y[r];
            for p in a.indptr[r]..self.diag[r] {
                acc -= self.values[p] * y[a.indices[p]];
            }
            y[r] = acc;
        }
        for r in (0..a.dim).rev() {
            let mut acc = y[r];
            for p in self.diag[r] + 1..a.indptr[r + 1] {
                acc -= self.values[p] * y[a.indices[p]];
            }
            y[r] = acc / self.values[self.diag[r]];
        }
        y
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Right-preconditioned restarted GMRES.
fn gmres(
    system: &SparseSystem,
    opts: &SolverOptions,
    exec: Execution,
) -> Result<(Vec<Complex64>, Vec<f64>), ContinuumError> {
    let n = system.dim;
    let m = opts.restart.max(1);
    let ilu = Ilu0::new(system)?;
    let b_norm = norm(&system.rhs);
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    let mut history = Vec::new();
    let zero = Complex64::new(0.0, 0.0);
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        let ax = system.matvec(&x, exec);
        let r: Vec<Complex64> = system.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        if beta / b_norm <= opts.tolerance {
            history.push(beta / b_norm);
            return Ok((x, history));
        }
        let mut v: Vec<Vec<Complex64>> = vec![r.iter().map(|z| z / beta).collect()];
        let mut hess = vec![vec![zero; m]; m + 1];
        let (mut cs, mut sn) = (vec![zero; m], vec![zero; m]);
        let mut g = vec![zero; m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..m {
            iterations += 1;
            let z = ilu.apply(system, &v[k]);
            let mut w = system.matvec(&z, exec);
            for (i, vi) in v.iter().enumerate() {
                let hik = dot(vi, &w);
                hess[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(vi) {
                    *wj -= hik * vj;
                }
            }
            let wn = norm(&w);
            hess[k + 1][k] = Complex64::new(wn, 0.0);
            for i in 0..k {
                let t = cs[i].conj() * hess[i][k] + sn[i].conj() * hess[i + 1][k];
                hess[i + 1][k] = -sn[i] * hess[i][k] + cs[i] * hess[i + 1][k];
                hess[i][k] = t;
            }
            let (a, bb) = (hess[k][k], hess[k + 1][k]);
            let den = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            let (c, s) = if den == 0.0 {
                (Complex64::new(1.0, 0.0), zero)
            } else {
                (a / den, bb / den)
            };
            cs[k] = c;
            sn[k] = s;
            hess[k][k] = c.conj() * a + s.conj() * bb;
            hess[k + 1][k] = zero;
            g[k + 1] = -s * g[k];
            g[k] = c.conj() * g[k];
            k_used = k + 1;
            let rel = g[k + 1].norm() / b_norm;
            history.push(rel);
            if rel <= opts.tolerance * 0.5 || wn == 0.0 || iterations >= opts.max_iterations {
                break;
            }
            v.push(w.iter().map(|z| z / wn).collect());
        }
        // Back substitution for the Krylov coefficients.
        let mut y = vec![zero; k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in i + 1..k_used {
                acc -= hess[i][j] * y[j];
            }
            y[i] = acc / hess[i][i];
        }
        let mut update = vec![zero; n];
        for (j, yj) in y.iter().enumerate() {
            for (u, vj) in update.iter_mut().zip(&v[j]) {
                *u += yj * vj;
            }
        }
        let dx = ilu.apply(system, &update);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
    }
    let final_residual = system.relative_residual(&x, exec);
    if final_residual <= opts.tolerance {
        history.push(final_residual);
        return Ok((x, history));
    }
    Err(ContinuumError::NoConvergence {
        final_residual,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuum::scene::{build_scene, SceneConfig, SourcePosition};

    fn small(alpha: f64) -> SceneConfig {
        SceneConfig {
            side_wavelengths: 3.0,
            points_per_wavelength: 12.0,
            pml_cells: 8,
            ..SceneConfig::uniform_force(alpha)
        }
    }

    #[test]
    fn zero_source_gives_zero_field() {
        let mut cfg = small(0.3);
        cfg.source.magnitude = 1.0;
        let scene = build_scene(&cfg).unwrap();
        let mut system = assemble_operator(&scene, Execution::Sequential).unwrap();
        system
            .rhs
            .iter_mut()
            .for_each(|z| *z = Complex64::new(0.0, 0.0));
        let (x, _) = solve_system(
            &system,
            SolverKind::Direct,
            &SolverOptions::default(),
            Execution::Sequential,
        )
        .unwrap();
        assert!(x.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn direct_meets_residual_and_is_deterministic() {
        let scene = build_scene(&small(0.6)).unwrap();
        let a = solve(&scene, Execution::Parallel).unwrap();
        let b = solve(&scene, Execution::Parallel).unwrap();
        assert!(a.residual <= 1e-6);
        assert_eq!(a.field, b.field);
        assert!(a.field.is_finite());
    }

    #[test]
    fn gmres_agrees_with_direct() {
        let mut cfg = small(0.4);
        cfg.side_wavelengths = 2.5;
        cfg.pml_cells = 6;
        let scene = build_scene(&cfg).unwrap();
        let system = assemble_operator(&scene, Execution::Parallel).unwrap();
        let opts = SolverOptions {
            tolerance: 1e-9,
            ..SolverOptions::default()
        };
        let (xd, _) =
            solve_system(&system, SolverKind::Direct, &opts, Execution::Parallel).unwrap();
        let (xi, hist) =
            solve_system(&system, SolverKind::Iterative, &opts, Execution::Parallel).unwrap();
        assert!(*hist.last().unwrap() <= 1e-9);
        let diff: Vec<Complex64> = xd.iter().zip(&xi).map(|(a, b)| a - b).collect();
        assert!(norm(&diff) <= 1e-6 * norm(&xd));
    }

    #[test]
    fn gmres_reports_history_on_failure() {
        let scene = build_scene(&small(0.0)).unwrap();
        let system = assemble_operator(&scene, Execution::Parallel).unwrap();
        let opts = SolverOptions {
            tolerance: 1e-12,
            max_iterations: 3,
            restart: 3,
            ..SolverOptions::default()
        };
        match solve_system(&system, SolverKind::Iterative, &opts, Execution::Parallel) {
            Err(ContinuumError::NoConvergence { history, .. }) => assert_eq!(history.len(), 3),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn off_centre_source_is_accepted() {
        let mut cfg = small(0.0);
        cfg.source.position = SourcePosition::At(0.8, 1.1);
        let scene = build_scene(&cfg).unwrap();
        assert!(solve(&scene, Execution::Parallel).unwrap().residual <= 1e-6);
    }

    #[test]
    fn symmetric_factor_matches_lu() {
        let scene = build_scene(&small(0.0)).unwrap();
        let system = assemble_operator(&scene, Execution::Parallel).unwrap();
        assert!(system.is_symmetric());
        assert!(
            !assemble_operator(&build_scene(&small(0.3)).unwrap(), Execution::Parallel)
                .unwrap()
                .is_symmetric()
        );
        let xs = RealLblt::new(&system).unwrap().solve(&system.rhs);
        let xl = DirectFactor::Lu(complex_lu(&system).unwrap()).solve(&system.rhs);
        assert!(system.relative_residual(&xs, Execution::Parallel) <= 1e-9);
        let diff: Vec<Complex64> = xs.iter().zip(&xl).map(|(a, b)| a - b).collect();
        assert!(norm(&diff) <= 1e-9 * norm(&xl));
    }
}

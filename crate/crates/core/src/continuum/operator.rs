//! Finite-difference assembly of the stretched Navier operator.
//!
//! After multiplying by `s_x s_y` the equations read
//!
//! ```text
//! ∂x((λ+2μ) s_y/s_x ∂x u1 + λ ∂y u2) + ∂y(μ (s_x/s_y ∂y u1 + ∂x u2)) + s_x s_y ω² ((ρ + Σ) U)_1 = −s_x s_y F1
//! ∂x(μ (∂y u1 + s_y/s_x ∂x u2)) + ∂y(λ ∂x u1 + (λ+2μ) s_x/s_y ∂y u2) + s_x s_y ω² ((ρ + Σ) U)_2 = −s_x s_y F2
//! ```
//!
//! Normal-derivative fluxes use harmonic means of the nodal moduli at half nodes;
//! mixed derivatives are central with the coefficient taken at the outer nodes,
//! which keeps the stencil matrix complex symmetric apart from `Σ`.

use num_complex::Complex64;

use super::scene::{ContinuumScene, SourceKind};
use super::{ComplexField, ContinuumError, Grid};
use crate::exec::Execution;

/// Sparse complex system `A u = b` over the non-boundary nodes, in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    pub dim: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<Complex64>,
    pub rhs: Vec<Complex64>,
}

impl SparseSystem {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn matvec(&self, x: &[Complex64], exec: Execution) -> Vec<Complex64> {
        exec.map_range(self.dim, |r| {
            (self.indptr[r]..self.indptr[r + 1])
                .map(|p| self.values[p] * x[self.indices[p]])
                .sum()
        })
    }

    /// `A[r, c]`, zero if not stored.
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let cols = &self.indices[self.indptr[r]..self.indptr[r + 1]];
        cols.binary_search(&c)
            .map(|p| self.values[self.indptr[r] + p])
            .unwrap_or_default()
    }

    /// `A[r, c] = A[c, r]` to 1e-12 relative for every stored entry, with a symmetric pattern.
    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|r| {
            (self.indptr[r]..self.indptr[r + 1]).all(|p| {
                let c = self.indices[p];
                let cols = &self.indices[self.indptr[c]..self.indptr[c + 1]];
                cols.binary_search(&r).is_ok_and(|q| {
                    (self.values[p] - self.values[self.indptr[c] + q]).norm()
                        <= 1e-12 * self.values[p].norm()
                })
            })
        })
    }

    /// `‖b − A x‖ / ‖b‖`, or `‖A x‖` when `b = 0`.
    pub fn relative_residual(&self, x: &[Complex64], exec: Execution) -> f64 {
        let ax = self.matvec(x, exec);
        let r = ax
            .iter()
            .zip(&self.rhs)
            .map(|(a, b)| (b - a).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let b = norm(&self.rhs);
        if b == 0.0 {
            r
        } else {
            r / b
        }
    }
}

pub(crate) fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Index of unknown component `c` at non-boundary node `(i, j)`.
pub(crate) fn unknown(grid: &Grid, i: usize, j: usize, c: usize) -> usize {
    2 * ((j - 1) * (grid.n - 2) + (i - 1)) + c
}

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Calls `emit(row_component, node_i, node_j, column_component, value)` for every
/// stencil entry of the two equations at non-boundary node `(i, j)`.
fn stencil(
    scene: &ContinuumScene,
    i: usize,
    j: usize,
    mut emit: impl FnMut(usize, usize, usize, usize, Complex64),
) {
    let g = &scene.grid;
    let at = |f: &[f64], a: usize, b: usize| f[g.index(a, b)];
    let modulus = |a: usize, b: usize| at(&scene.lambda, a, b) + 2.0 * at(&scene.mu, a, b);
    let (fi, fj) = (i as f64, j as f64);
    let s = |t: f64| scene.pml.stretch(t);
    let (sxi, syj) = (s(fi), s(fj));
    let (sx_e, sx_w, sy_n, sy_s) = (s(fi + 0.5), s(fi - 0.5), s(fj + 0.5), s(fj - 0.5));
    let h2 = g.h * g.h;
    let q = 4.0 * h2;
    let r = |x: f64| Complex64::new(x, 0.0);

    // Normal fluxes: (component, modulus along x, modulus along y).
    for comp in 0..2 {
        let (ax_e, ax_w, ay_n, ay_s) = if comp == 0 {
            (
                harmonic(modulus(i, j), modulus(i + 1, j)),
                harmonic(modulus(i, j), modulus(i - 1, j)),
                harmonic(at(&scene.mu, i, j), at(&scene.mu, i, j + 1)),
                harmonic(at(&scene.mu, i, j), at(&scene.mu, i, j - 1)),
            )
        } else {
            (
                harmonic(at(&scene.mu, i, j), at(&scene.mu, i + 1, j)),
                harmonic(at(&scene.mu, i, j), at(&scene.mu, i - 1, j)),
                harmonic(modulus(i, j), modulus(i, j + 1)),
                harmonic(modulus(i, j), modulus(i, j - 1)),
            )
        };
        let e = syj / sx_e * ax_e / h2;
        let w = syj / sx_w * ax_w / h2;
        let n = sxi / sy_n * ay_n / h2;
        let so = sxi / sy_s * ay_s / h2;
        emit(comp, i + 1, j, comp, e);
        emit(comp, i - 1, j, comp, w);
        emit(comp, i, j + 1, comp, n);
        emit(comp, i, j - 1, comp, so);
        emit(comp, i, j, comp, -(e + w + n + so));
    }

    // Mixed terms. Row 0 couples to u2 through ∂x(λ ∂y u2) + ∂y(μ ∂x u2);
    // row 1 couples to u1 through ∂x(μ ∂y u1) + ∂y(λ ∂x u1).
    for (row, col, fx, fy) in [
        (0, 1, &scene.lambda, &scene.mu),
        (1, 0, &scene.mu, &scene.lambda),
    ] {
        let (ce, cw) = (at(fx, i + 1, j) / q, at(fx, i - 1, j) / q);
        let (cn, cs) = (at(fy, i, j + 1) / q, at(fy, i, j - 1) / q);
        emit(row, i + 1, j + 1, col, r(ce + cn));
        emit(row, i + 1, j - 1, col, r(-ce - cs));
        emit(row, i - 1, j + 1, col, r(-cw - cn));
        emit(row, i - 1, j - 1, col, r(cw + cs));
    }

    let inertia = sxi * syj * scene.omega * scene.omega;
    let rho = at(&scene.rho, i, j);
    let alpha = at(&scene.alpha, i, j);
    emit(0, i, j, 0, inertia * rho);
    emit(1, i, j, 1, inertia * rho);
    if alpha != 0.0 {
        emit(0, i, j, 1, inertia * Complex64::new(0.0, -alpha));
        emit(1, i, j, 0, inertia * Complex64::new(0.0, alpha));
    }
}

/// Body-force density on the full node grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyForce {
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
}

impl BodyForce {
    fn zeros(len: usize) -> Self {
        BodyForce {
            f1: vec![0.0; len],
            f2: vec![0.0; len],
        }
    }

    /// Net force `(Σ f1, Σ f2) h²`.
    pub fn net_force(&self, h: f64) -> (f64, f64) {
        (
            self.f1.iter().sum::<f64>() * h * h,
            self.f2.iter().sum::<f64>() * h * h,
        )
    }

    /// Net torque about `(x, y)`.
    pub fn net_torque(&self, grid: &Grid, x: f64, y: f64) -> f64 {
        let mut t = 0.0;
        for j in 0..grid.n {
            for i in 0..grid.n {
                let idx = grid.index(i, j);
                t += (grid.x(i) - x) * self.f2[idx] - (grid.y(j) - y) * self.f1[idx];
            }
        }
        t * grid.h * grid.h
    }
}

/// Point force spread over the four surrounding nodes with bilinear weights.
pub fn point_force_source(
    grid: &Grid,
    position: (f64, f64),
    direction: (f64, f64),
    magnitude: f64,
) -> BodyForce {
    let mut f = BodyForce::zeros(grid.len());
    let (fi, fj) = grid.locate(position.0, position.1);
    let (i0, j0) = (fi.floor(), fj.floor());
    let (tx, ty) = (fi - i0, fj - j0);
    let (i0, j0) = (i0 as usize, j0 as usize);
    let density = magnitude / (grid.h * grid.h);
    for (di, dj, w) in [
        (0, 0, (1.0 - tx) * (1.0 - ty)),
        (1, 0, tx * (1.0 - ty)),
        (0, 1, (1.0 - tx) * ty),
        (1, 1, tx * ty),
    ] {
        let idx = grid.index(i0 + di, j0 + dj);
        f.f1[idx] += density * w * direction.0;
        f.f2[idx] += density * w * direction.1;
    }
    f
}

/// Concentrated moment as tangential forces on the nodes within `2h` of the
/// source node (excluding it): zero net force, net torque `magnitude`.
pub fn point_moment_source(grid: &Grid, position: (f64, f64), magnitude: f64) -> BodyForce {
    let mut f = BodyForce::zeros(grid.len());
    let (fi, fj) = grid.locate(position.0, position.1);
    let (ci, cj) = (fi.round() as i64, fj.round() as i64);
    let ring: Vec<(i64, i64)> = (-2i64..=2)
        .flat_map(|dj| (-2i64..=2).map(move |di| (di, dj)))
        .filter(|&(di, dj)| {
            let d2 = di * di + dj * dj;
            d2 > 0 && d2 <= 4
        })
        .collect();
    let lever: f64 = ring
        .iter()
        .map(|&(di, dj)| ((di * di + dj * dj) as f64).sqrt())
        .sum();
    // Force magnitude per node, so that Σ r·w = magnitude with r in units of h.
    let w = magnitude / (lever * grid.h);
    let density = w / (grid.h * grid.h);
    for (di, dj) in ring {
        let r = ((di * di + dj * dj) as f64).sqrt();
        let idx = grid.index((ci + di) as usize, (cj + dj) as usize);
        f.f1[idx] += -density * dj as f64 / r;
        f.f2[idx] += density * di as f64 / r;
    }
    f
}

/// Body force of the scene's source.
pub fn scene_source(scene: &ContinuumScene) -> BodyForce {
    match scene.source.kind {
        SourceKind::PointForce {
            direction,
            magnitude,
        } => point_force_source(&scene.grid, scene.source.position, direction, magnitude),
        SourceKind::PointMoment { magnitude } => {
            point_moment_source(&scene.grid, scene.source.position, magnitude)
        }
    }
}

/// Assembles `A u = −s_x s_y F` over the non-boundary nodes.
pub fn assemble_operator(
    scene: &ContinuumScene,
    exec: Execution,
) -> Result<SparseSystem, ContinuumError> {
    let g = &scene.grid;
    if g.n < 3 {
        return Err(ContinuumError::Parameter {
            name: "grid nodes",
            value: g.n as f64,
            reason: "need at least one interior node",
        });
    }
    let inner = g.n - 2;
    let dim = 2 * inner * inner;
    let rows: Vec<[Vec<(usize, Complex64)>; 2]> = exec.map_range(inner * inner, |node| {
        let (i, j) = (node % inner + 1, node / inner + 1);
        let mut out: [Vec<(usize, Complex64)>; 2] =
            [Vec::with_capacity(13), Vec::with_capacity(13)];
        stencil(scene, i, j, |rc, ni, nj, cc, v| {
            if ni > 0 && nj > 0 && ni < g.n - 1 && nj < g.n - 1 {
                out[rc].push((unknown(g, ni, nj, cc), v));
            }
        });
        for row in &mut out {
            row.sort_by_key(|e| e.0);
            row.dedup_by(|next, kept| {
                if next.0 == kept.0 {
                    kept.1 += next.1;
                    true
                } else {
                    false
                }
            });
        }
        out
    });
    let mut indptr = Vec::with_capacity(dim + 1);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    indptr.push(0);
    for node in rows {
        for row in node {
            for (c, v) in row {
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
    }
    let force = scene_source(scene);
    let mut rhs = vec![Complex64::new(0.0, 0.0); dim];
    for j in 1..g.n - 1 {
        for i in 1..g.n - 1 {
            let idx = g.index(i, j);
            let scale = scene.pml.stretch(i as f64) * scene.pml.stretch(j as f64);
            rhs[unknown(g, i, j, 0)] = -scale * force.f1[idx];
            rhs[unknown(g, i, j, 1)] = -scale * force.f2[idx];
        }
    }
    Ok(SparseSystem {
        dim,
        indptr,
        indices,
        values,
        rhs,
    })
}

/// `L U` at every non-boundary node of a full-grid field, boundary values included.
pub fn apply_operator(
    scene: &ContinuumScene,
    field: &ComplexField,
) -> Result<ComplexField, ContinuumError> {
    let g = &scene.grid;
    if field.u1.len() != g.len() || field.u2.len() != g.len() {
        return Err(ContinuumError::Dimension {
            expected: g.len(),
            got: field.u1.len(),
        });
    }
    let mut out = ComplexField::zeros(*g);
    for j in 1..g.n - 1 {
        for i in 1..g.n - 1 {
            let idx = g.index(i, j);
            let mut acc = [Complex64::new(0.0, 0.0); 2];
            stencil(scene, i, j, |rc, ni, nj, cc, v| {
                let u = if cc == 0 { &field.u1 } else { &field.u2 };
                acc[rc] += v * u[g.index(ni, nj)];
            });
            out.u1[idx] = acc[0];
            out.u2[idx] = acc[1];
        }
    }
    Ok(out)
}

//! Dispersion surfaces over the reciprocal cell, total band gaps, α-sweeps along
//! `k1 = k2` and slowness contours.

use std::collections::HashMap;

use serde::Serialize;

use crate::dispersion::{dispersion, DispersionError, Regime};
use crate::exec::Execution;
use crate::lattice::{BlochVector, KGrid, LatticeError, LatticeSpec};

/// Smallest reciprocal-cell resolution accepted by [`compute_surfaces`].
pub const MIN_RESOLUTION: usize = 16;
/// Resolution below which gap edges are not trusted.
pub const GAP_RESOLUTION: usize = 64;
/// Default gap-width threshold, in units of `sqrt(c / m_min)`.
pub const DEFAULT_GAP_THRESHOLD: f64 = 1e-3;

/// Sampled dispersion surfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct BandSurfaces {
    pub spec: LatticeSpec,
    pub grid: KGrid,
    /// `true` when the grid tiles one reciprocal cell, so samples wrap around.
    pub periodic: bool,
    /// Sorted propagating frequencies per grid point, `i` fastest. Ragged.
    pub branches: Vec<Vec<f64>>,
    pub regime: Regime,
}

impl BandSurfaces {
    pub fn resolution(&self) -> usize {
        self.grid.n1
    }

    pub fn points(&self) -> Vec<BlochVector> {
        self.grid.points()
    }

    pub fn max_branches(&self) -> usize {
        self.branches.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn value(&self, branch: usize, i: usize, j: usize) -> Option<f64> {
        self.branches[j * self.grid.n1 + i].get(branch).copied()
    }

    fn wrapped(&self, branch: usize, i: usize, j: usize) -> Option<f64> {
        if self.periodic {
            self.value(branch, i % self.grid.n1, j % self.grid.n2)
        } else {
            self.value(branch, i, j)
        }
    }

    /// `[min, max]` of one branch over the samples where it exists.
    pub fn branch_range(&self, branch: usize) -> Option<(f64, f64)> {
        self.branches
            .iter()
            .filter_map(|b| b.get(branch))
            .fold(None, |acc, &w| match acc {
                None => Some((w, w)),
                Some((lo, hi)) => Some((lo.min(w), hi.max(w))),
            })
    }

    /// Bilinear interpolation of one branch at fractional grid coordinates.
    pub fn interpolate(&self, branch: usize, fi: f64, fj: f64) -> Option<f64> {
        let (i0, j0) = (fi.floor(), fj.floor());
        let (i, j) = if self.periodic {
            (
                i0.rem_euclid(self.grid.n1 as f64) as usize,
                j0.rem_euclid(self.grid.n2 as f64) as usize,
            )
        } else {
            if i0 < 0.0
                || j0 < 0.0
                || fi > (self.grid.n1 - 1) as f64
                || fj > (self.grid.n2 - 1) as f64
            {
                return None;
            }
            // The last node row belongs to the last cell.
            (
                (i0 as usize).min(self.grid.n1 - 2),
                (j0 as usize).min(self.grid.n2 - 2),
            )
        };
        let tx = if self.periodic {
            fi - i0
        } else {
            fi - i as f64
        };
        let ty = if self.periodic {
            fj - j0
        } else {
            fj - j as f64
        };
        let v00 = self.wrapped(branch, i, j)?;
        let v10 = self.wrapped(branch, i + 1, j)?;
        let v01 = self.wrapped(branch, i, j + 1)?;
        let v11 = self.wrapped(branch, i + 1, j + 1)?;
        Some((1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BandError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
}

impl From<BandError> for crate::Error {
    fn from(e: BandError) -> Self {
        match e {
            BandError::Lattice(e) => e.into(),
            BandError::Dispersion(e) => e.into(),
        }
    }
}

/// Dispersion surfaces on a `resolution × resolution` sampling of the reciprocal cell.
pub fn compute_surfaces(
    spec: &LatticeSpec,
    resolution: usize,
    exec: Execution,
) -> Result<BandSurfaces, BandError> {
    if resolution < MIN_RESOLUTION {
        return Err(LatticeError::Resolution {
            min: MIN_RESOLUTION,
            got: resolution,
        }
        .into());
    }
    let grid = KGrid::reciprocal_cell(spec, resolution)?;
    compute_surfaces_on(spec, grid, true, exec)
}

/// Dispersion surfaces on an arbitrary grid.
pub fn compute_surfaces_on(
    spec: &LatticeSpec,
    grid: KGrid,
    periodic: bool,
    exec: Execution,
) -> Result<BandSurfaces, BandError> {
    spec.validate()?;
    let points = grid.points();
    let solved = exec.try_map(&points, |&k| dispersion(k, spec))?;
    let regime = crate::dispersion::classify_regime(spec);
    Ok(BandSurfaces {
        spec: *spec,
        grid,
        periodic,
        branches: solved.into_iter().map(|b| b.omegas).collect(),
        regime,
    })
}

/// A total band gap `(lower, upper)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandGap {
    pub lower: f64,
    pub upper: f64,
}

impl BandGap {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, omega: f64) -> bool {
        omega > self.lower && omega < self.upper
    }
}

/// Range of one branch with its extrema polished by local search, so that
/// gap edges do not depend on whether the true extremum happens to be sampled.
pub fn refined_branch_range(s: &BandSurfaces, branch: usize) -> Option<(f64, f64)> {
    let (lo, hi) = s.branch_range(branch)?;
    let value = |fi: f64, fj: f64| -> Option<f64> {
        dispersion(s.grid.at(fi, fj), &s.spec)
            .ok()
            .and_then(|b| b.omegas.get(branch).copied())
    };
    let start = |pick: fn(f64, f64) -> bool| {
        let mut best: Option<(usize, f64)> = None;
        for (idx, b) in s.branches.iter().enumerate() {
            if let Some(&w) = b.get(branch) {
                if best.is_none_or(|(_, v)| pick(w, v)) {
                    best = Some((idx, w));
                }
            }
        }
        best.map(|(idx, w)| ((idx % s.grid.n1) as f64, (idx / s.grid.n1) as f64, w))
    };
    let (mut lo, mut hi) = (lo, hi);
    if let Some((i, j, w)) = start(|a, b| a < b) {
        lo = lo.min(compass_search(&value, i, j, w, |a, b| a < b));
    }
    if let Some((i, j, w)) = start(|a, b| a > b) {
        hi = hi.max(compass_search(&value, i, j, w, |a, b| a > b));
    }
    Some((lo, hi))
}

fn compass_search(
    f: &impl Fn(f64, f64) -> Option<f64>,
    mut i: f64,
    mut j: f64,
    mut best: f64,
    better: fn(f64, f64) -> bool,
) -> f64 {
    let mut step = 0.5;
    while step > 1e-6 {
        let mut moved = false;
        for (di, dj) in [
            (1.0, 0.0),
            (-1.0, 0.0),
            (0.0, 1.0),
            (0.0, -1.0),
            (1.0, 1.0),
            (-1.0, -1.0),
            (1.0, -1.0),
            (-1.0, 1.0),
        ] {
            if let Some(v) = f(i + di * step, j + dj * step) {
                if better(v, best) {
                    best = v;
                    i += di * step;
                    j += dj * step;
                    moved = true;
                    break;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    best
}

/// Total band gaps below `omega_max`: the complement of the union of branch ranges.
///
/// Gaps narrower than `threshold · sqrt(c / m_min)` are dropped as sampling noise.
/// Accuracy is only meaningful for resolutions of at least [`GAP_RESOLUTION`].
pub fn band_gaps(s: &BandSurfaces, omega_max: f64, threshold: f64) -> Vec<BandGap> {
    if s.resolution() < GAP_RESOLUTION {
        log::warn!(
            "band gaps on resolution {} are below the accuracy floor {GAP_RESOLUTION}",
            s.resolution()
        );
    }
    let mut ranges: Vec<(f64, f64)> = (0..s.max_branches())
        .filter_map(|b| refined_branch_range(s, b))
        .collect();
    ranges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let min_width = threshold * s.spec.omega_scale();
    let mut gaps = Vec::new();
    let mut covered = 0.0f64;
    for (lo, hi) in ranges {
        let upper = lo.min(omega_max);
        if upper - covered > min_width {
            gaps.push(BandGap {
                lower: covered,
                upper,
            });
        }
        covered = covered.max(hi);
        if covered >= omega_max {
            break;
        }
    }
    gaps
}

/// `ω(α, k)` along the diagonal `k1·l = k2·l = κ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaSweep {
    pub alphas: Vec<f64>,
    pub kappas: Vec<f64>,
    /// `omegas[a][k]`: sorted propagating branches.
    pub omegas: Vec<Vec<Vec<f64>>>,
}

impl AlphaSweep {
    /// Branch `b` at every `(α, κ)`, `None` where it does not propagate.
    pub fn sheet(&self, b: usize) -> Vec<Vec<Option<f64>>> {
        self.omegas
            .iter()
            .map(|row| row.iter().map(|w| w.get(b).copied()).collect())
            .collect()
    }
}

pub fn alpha_sweep_diagonal(
    template: &LatticeSpec,
    alphas: &[f64],
    kappas: &[f64],
    exec: Execution,
) -> Result<AlphaSweep, BandError> {
    template.validate()?;
    let cells: Vec<(f64, f64)> = alphas
        .iter()
        .flat_map(|&a| kappas.iter().map(move |&k| (a, k)))
        .collect();
    let solved = exec.try_map(&cells, |&(a, kappa)| {
        let spec = template.with_alpha(a);
        dispersion(BlochVector::from_scaled(kappa, kappa, spec.l), &spec).map(|b| b.omegas)
    })?;
    let mut it = solved.into_iter();
    let omegas = alphas
        .iter()
        .map(|_| it.by_ref().take(kappas.len()).collect())
        .collect();
    Ok(AlphaSweep {
        alphas: alphas.to_vec(),
        kappas: kappas.to_vec(),
        omegas,
    })
}

/// Isofrequency polylines of one branch at one level, in `(k1·l, k2·l)` coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contour {
    pub branch: usize,
    pub level: f64,
    pub polylines: Vec<Vec<(f64, f64)>>,
}

impl Contour {
    pub fn is_empty(&self) -> bool {
        self.polylines.is_empty()
    }
}

/// Marching-squares isolines of branch `branch` at each level.
pub fn slowness_contours(s: &BandSurfaces, branch: usize, levels: &[f64]) -> Vec<Contour> {
    levels
        .iter()
        .map(|&level| Contour {
            branch,
            level,
            polylines: march(s, branch, level)
                .into_iter()
                .map(|line| {
                    line.into_iter()
                        .map(|(fi, fj)| s.grid.at(fi, fj).scaled(s.spec.l))
                        .collect()
                })
                .collect(),
        })
        .collect()
}

/// Cell edges are keyed by their lower-left node and orientation, so shared edges
/// between neighbouring cells match exactly when chaining.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct EdgeKey {
    i: usize,
    j: usize,
    horizontal: bool,
}

fn march(s: &BandSurfaces, branch: usize, level: f64) -> Vec<Vec<(f64, f64)>> {
    let (n1, n2) = (s.grid.n1, s.grid.n2);
    let (c1, c2) = if s.periodic {
        (n1, n2)
    } else {
        (n1 - 1, n2 - 1)
    };
    let wrap = |i: usize, j: usize| if s.periodic { (i % n1, j % n2) } else { (i, j) };
    let mut segments: Vec<[(EdgeKey, (f64, f64)); 2]> = Vec::new();
    for j in 0..c2 {
        for i in 0..c1 {
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let vals: Option<Vec<f64>> = corners
                .iter()
                .map(|&(a, b)| s.wrapped(branch, a, b))
                .collect();
            let Some(v) = vals else { continue };
            // Edges: bottom, right, top, left.
            let edges = [
                (
                    EdgeKey {
                        i,
                        j,
                        horizontal: true,
                    },
                    0,
                    1,
                ),
                (
                    EdgeKey {
                        i: i + 1,
                        j,
                        horizontal: false,
                    },
                    1,
                    2,
                ),
                (
                    EdgeKey {
                        i,
                        j: j + 1,
                        horizontal: true,
                    },
                    3,
                    2,
                ),
                (
                    EdgeKey {
                        i,
                        j,
                        horizontal: false,
                    },
                    0,
                    3,
                ),
            ];
            let mut hits = Vec::with_capacity(4);
            for (key, a, b) in edges {
                let (va, vb) = (v[a], v[b]);
                if (va < level) != (vb < level) {
                    let t = (level - va) / (vb - va);
                    let (pa, pb) = (corners[a], corners[b]);
                    let p = (
                        pa.0 as f64 + t * (pb.0 as f64 - pa.0 as f64),
                        pa.1 as f64 + t * (pb.1 as f64 - pa.1 as f64),
                    );
                    let (wi, wj) = wrap(key.i, key.j);
                    hits.push((
                        EdgeKey {
                            i: wi,
                            j: wj,
                            ..key
                        },
                        p,
                    ));
                }
            }
            match hits.len() {
                2 => segments.push([hits[0], hits[1]]),
                4 => {
                    // Saddle: pair by the cell-centre average.
                    let centre_above = v.iter().sum::<f64>() / 4.0 >= level;
                    let corner0_above = v[0] >= level;
                    if centre_above == corner0_above {
                        segments.push([hits[0], hits[1]]);
                        segments.push([hits[2], hits[3]]);
                    } else {
                        segments.push([hits[0], hits[3]]);
                        segments.push([hits[1], hits[2]]);
                    }
                }
                _ => {}
            }
        }
    }
    chain(segments)
}

fn chain(segments: Vec<[(EdgeKey, (f64, f64)); 2]>) -> Vec<Vec<(f64, f64)>> {
    let mut by_edge: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (idx, seg) in segments.iter().enumerate() {
        for (key, _) in seg {
            by_edge.entry(*key).or_default().push(idx);
        }
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let [a, b] = segments[start];
        let mut line = std::collections::VecDeque::from([a, b]);
        for forward in [true, false] {
            loop {
                let end = if forward {
                    *line.back().unwrap()
                } else {
                    *line.front().unwrap()
                };
                let next = by_edge[&end.0].iter().copied().find(|&s| !used[s]);
                let Some(n) = next else { break };
                used[n] = true;
                let [p, q] = segments[n];
                let other = if p.0 == end.0 { q } else { p };
                // Across a periodic seam the same edge has two positions; keep the
                // continuation's own coordinates so the polyline stays local.
                let (joint, other) = if p.0 == end.0 { (p, other) } else { (q, other) };
                if forward {
                    if joint.1 != end.1 {
                        lines.push(line.drain(..).map(|e| e.1).collect());
                        line.push_back(joint);
                    }
                    line.push_back(other);
                } else {
                    if joint.1 != end.1 {
                        lines.push(line.drain(..).map(|e| e.1).collect());
                        line.push_front(joint);
                    }
                    line.push_front(other);
                }
            }
        }
        lines.push(line.into_iter().map(|e| e.1).collect());
    }
    lines
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::reciprocal_basis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mono(alpha: f64) -> LatticeSpec {
        LatticeSpec::monatomic(1.0, alpha)
    }

    #[test]
    fn rejects_coarse_resolution() {
        assert!(matches!(
            compute_surfaces(&mono(0.0), 8, Execution::Sequential),
            Err(BandError::Lattice(LatticeError::Resolution {
                min: 16,
                got: 8
            }))
        ));
    }

    #[test]
    fn acoustic_minimum_at_origin() {
        let s = compute_surfaces(&mono(0.0), 16, Execution::Parallel).unwrap();
        assert_eq!(s.branches[0], vec![0.0, 0.0]);
        for b in 0..2 {
            assert_eq!(s.branch_range(b).unwrap().0, 0.0);
        }
    }

    #[test]
    fn branch_counts_by_regime() {
        let sub = compute_surfaces(&mono(0.5), 16, Execution::Parallel).unwrap();
        assert!(sub.branches.iter().all(|b| b.len() == 2));
        let sup = compute_surfaces(&mono(2.0), 16, Execution::Parallel).unwrap();
        assert!(sup.branches.iter().all(|b| b.len() == 1));
        assert!(sup
            .branches
            .iter()
            .all(|b| b.windows(2).all(|w| w[0] <= w[1])));
    }

    #[test]
    fn execution_modes_agree_exactly() {
        let spec = LatticeSpec::biatomic(1.0, 10.0, 0.5, 0.5);
        let a = compute_surfaces(&spec, 16, Execution::Sequential).unwrap();
        let b = compute_surfaces(&spec, 16, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn no_gap_inside_acoustic_range() {
        let s = compute_surfaces(&mono(0.0), 64, Execution::Parallel).unwrap();
        let (_, top) = s.branch_range(0).unwrap();
        assert!(band_gaps(&s, 0.9 * top, DEFAULT_GAP_THRESHOLD).is_empty());
    }

    #[test]
    fn gaps_are_sound_under_probing() {
        let spec = LatticeSpec::biatomic(1.0, 10.0, 0.0, 0.0);
        let s = compute_surfaces(&spec, 64, Execution::Parallel).unwrap();
        let gaps = band_gaps(&s, 5.0, DEFAULT_GAP_THRESHOLD);
        assert!(!gaps.is_empty());
        let [b1, b2] = reciprocal_basis(&spec);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..2000 {
            let k: BlochVector = (b1 * rng.random::<f64>() + b2 * rng.random::<f64>()).into();
            for w in dispersion(k, &spec).unwrap().omegas {
                assert!(
                    gaps.iter().all(|g| !g.contains(w)),
                    "ω = {w} inside {gaps:?}"
                );
            }
        }
    }

    #[test]
    fn bilinear_interpolation_converges_quadratically() {
        // Sup-norm error over probes kept away from the conical point at k = 0.
        let spec = mono(0.5);
        let [b1, b2] = reciprocal_basis(&spec);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let probes: Vec<(f64, f64)> = (0..200)
            .map(|_| (rng.random_range(0.25..0.75), rng.random_range(0.25..0.75)))
            .collect();
        let errs: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&r| {
                let s = compute_surfaces(&spec, r, Execution::Parallel).unwrap();
                probes
                    .iter()
                    .map(|&(u, v)| {
                        let k: BlochVector = (b1 * u + b2 * v).into();
                        let exact = dispersion(k, &spec).unwrap().omegas[1];
                        (s.interpolate(1, u * r as f64, v * r as f64).unwrap() - exact).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.7, "observed order {order}, errors {errs:?}");
        }
    }

    #[test]
    fn alpha_sweep_sheets() {
        let alphas: Vec<f64> = (0..=12).map(|i| i as f64 * 0.25).collect();
        let kappas = [0.5, 1.0, 1.5];
        let sw = alpha_sweep_diagonal(&mono(0.0), &alphas, &kappas, Execution::Parallel).unwrap();
        let upper = sw.sheet(1);
        for (a, row) in alphas.iter().zip(&upper) {
            assert_eq!(row.iter().all(Option::is_some), *a < 1.0, "alpha {a}");
        }
        let lower = sw.sheet(0);
        for pair in lower.windows(2) {
            for (next, prev) in pair[1].iter().zip(&pair[0]) {
                assert!(next.unwrap() <= prev.unwrap());
            }
        }
    }

    #[test]
    fn biatomic_pressure_sheets_disappear() {
        let template = LatticeSpec::biatomic(1.0, 10.0, 0.0, 0.0);
        let sw = alpha_sweep_diagonal(
            &template,
            &[0.5, 5.0, 12.0],
            &[0.7, 1.3],
            Execution::Parallel,
        )
        .unwrap();
        let counts: Vec<usize> = sw.omegas.iter().map(|row| row[0].len()).collect();
        assert_eq!(counts, vec![4, 3, 2]);
    }

    fn window_surfaces(alpha: f64, half: f64, n: usize) -> BandSurfaces {
        let spec = mono(alpha);
        let grid = KGrid::window(&spec, (-half, half), (-half, half), n, n).unwrap();
        compute_surfaces_on(&spec, grid, false, Execution::Parallel).unwrap()
    }

    #[test]
    fn low_level_contours_are_circles() {
        let s = window_surfaces(0.0, 0.3, 121);
        let level = dispersion(BlochVector::new(0.15, 0.0), &s.spec)
            .unwrap()
            .omegas[0];
        let c = &slowness_contours(&s, 0, &[level])[0];
        assert_eq!(c.polylines.len(), 1);
        let radii: Vec<f64> = c.polylines[0].iter().map(|p| p.0.hypot(p.1)).collect();
        let (lo, hi) = radii
            .iter()
            .fold((f64::MAX, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(hi <= 0.2);
        assert!((hi - lo) / hi <= 0.05, "radius spread {lo}..{hi}");
        let line = &c.polylines[0];
        assert_eq!(line.first(), line.last());
    }

    #[test]
    fn contour_above_range_is_empty() {
        let s = compute_surfaces(&mono(0.0), 32, Execution::Parallel).unwrap();
        let (_, top) = s.branch_range(1).unwrap();
        assert!(slowness_contours(&s, 1, &[top * 1.1])[0].is_empty());
    }

    #[test]
    fn contours_are_even() {
        let s = window_surfaces(0.5, 2.0, 81);
        let c = &slowness_contours(&s, 1, &[2.0])[0];
        assert!(!c.is_empty());
        let pts: Vec<(f64, f64)> = c.polylines.iter().flatten().copied().collect();
        for p in &pts {
            let d = pts
                .iter()
                .map(|q| (q.0 + p.0).hypot(q.1 + p.1))
                .fold(f64::MAX, f64::min);
            assert!(d < 1e-9, "no mirror for {p:?}");
        }
    }

    #[test]
    fn periodic_contours_close() {
        let s = compute_surfaces(&mono(0.0), 48, Execution::Parallel).unwrap();
        let (lo, hi) = s.branch_range(0).unwrap();
        for c in slowness_contours(&s, 0, &[lo + 0.5 * (hi - lo)]) {
            assert!(!c.is_empty());
            for line in c.polylines {
                assert!(line.len() >= 3);
            }
        }
    }
}

use std::f64::consts::TAU;

use num_complex::Complex64;

use super::scene::ContinuumScene;
use super::{ContinuumError, Grid};

pub const DEFAULT_PROFILE_SAMPLES: usize = 512;

/// Complex displacement amplitudes on the full node grid, `i` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: Grid,
    pub u1: Vec<Complex64>,
    pub u2: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: Grid) -> Self {
        let zero = vec![Complex64::new(0.0, 0.0); grid.len()];
        ComplexField {
            grid,
            u1: zero.clone(),
            u2: zero,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u1
            .iter()
            .chain(&self.u2)
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Bilinear interpolation of both components at a physical point inside the grid.
    pub fn sample(&self, x: f64, y: f64) -> Option<(Complex64, Complex64)> {
        let g = &self.grid;
        let (fi, fj) = g.locate(x, y);
        let last = (g.n - 1) as f64;
        if !(0.0..=last).contains(&fi) || !(0.0..=last).contains(&fj) {
            return None;
        }
        let (i, j) = (
            (fi.floor() as usize).min(g.n - 2),
            (fj.floor() as usize).min(g.n - 2),
        );
        let (tx, ty) = (fi - i as f64, fj - j as f64);
        let lerp = |u: &[Complex64]| {
            let v = |a, b| u[g.index(a, b)];
            (v(i, j) * (1.0 - tx) + v(i + 1, j) * tx) * (1.0 - ty)
                + (v(i, j + 1) * (1.0 - tx) + v(i + 1, j + 1) * tx) * ty
        };
        Some((lerp(&self.u1), lerp(&self.u2)))
    }

    fn amplitude_at(&self, idx: usize) -> f64 {
        (self.u1[idx].norm_sqr() + self.u2[idx].norm_sqr()).sqrt()
    }
}

/// Real values on the full node grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RealGrid {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl RealGrid {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        let g = &self.grid;
        let (fi, fj) = g.locate(x, y);
        let last = (g.n - 1) as f64;
        if !(0.0..=last).contains(&fi) || !(0.0..=last).contains(&fj) {
            return None;
        }
        let (i, j) = (
            (fi.floor() as usize).min(g.n - 2),
            (fj.floor() as usize).min(g.n - 2),
        );
        let (tx, ty) = (fi - i as f64, fj - j as f64);
        let v = |a, b| self.get(a, b);
        Some(
            (v(i, j) * (1.0 - tx) + v(i + 1, j) * tx) * (1.0 - ty)
                + (v(i, j + 1) * (1.0 - tx) + v(i + 1, j + 1) * tx) * ty,
        )
    }
}

/// `|U| = sqrt(|u1|² + |u2|²)` per node.
pub fn field_amplitude(f: &ComplexField) -> RealGrid {
    RealGrid {
        grid: f.grid,
        values: (0..f.grid.len()).map(|idx| f.amplitude_at(idx)).collect(),
    }
}

/// Points along the interior diagonal from the upper-left to the lower-right
/// corner, `samples` points uniformly spaced including both ends.
pub fn diagonal_points(grid: &Grid, samples: usize) -> Vec<(f64, f64)> {
    let (lo, hi) = grid.interior();
    let last = samples.saturating_sub(1).max(1) as f64;
    (0..samples)
        .map(|s| {
            let t = s as f64 / last;
            (lo + t * (hi - lo), hi - t * (hi - lo))
        })
        .collect()
}

/// Amplitude at [`diagonal_points`].
pub fn diagonal_profile(f: &ComplexField, samples: usize) -> Vec<f64> {
    let amp = field_amplitude(f);
    diagonal_points(&f.grid, samples)
        .into_iter()
        .map(|(x, y)| amp.sample(x, y).unwrap_or(0.0))
        .collect()
}

/// Annular wedge with apex `apex`, opening around unit `direction`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Sector {
    pub apex: (f64, f64),
    pub direction: (f64, f64),
    pub half_angle: f64,
    pub r_min: f64,
    pub r_max: f64,
}

impl Sector {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.apex.0, y - self.apex.1);
        let r = dx.hypot(dy);
        if r < self.r_min || r > self.r_max || r == 0.0 {
            return false;
        }
        let cos = (dx * self.direction.0 + dy * self.direction.1) / r;
        cos >= self.half_angle.cos()
    }
}

/// RMS amplitude over the nodes inside `sector`.
pub fn shadow_metric(f: &ComplexField, sector: &Sector) -> Result<f64, ContinuumError> {
    let g = &f.grid;
    let (mut sum, mut count) = (0.0, 0usize);
    for j in 0..g.n {
        for i in 0..g.n {
            if !sector.contains(g.x(i), g.y(j)) {
                continue;
            }
            if g.in_pml(i, j) {
                return Err(ContinuumError::InPml {
                    what: "shadow sector",
                });
            }
            sum += f.amplitude_at(g.index(i, j)).powi(2);
            count += 1;
        }
    }
    Ok(if count == 0 {
        0.0
    } else {
        (sum / count as f64).sqrt()
    })
}

/// Wavelength from the phase slope of the tangential displacement along `rays`
/// rays from `center`, over radii `[r0, r1]`.
///
/// Phases are unwrapped along each ray and fitted by least squares.
pub fn radial_wavelength(
    f: &ComplexField,
    center: (f64, f64),
    r0: f64,
    r1: f64,
    rays: usize,
) -> Option<f64> {
    let steps = ((r1 - r0) / f.grid.h * 2.0).ceil().max(8.0) as usize;
    let mut slopes = Vec::with_capacity(rays);
    for ray in 0..rays {
        let theta = TAU * (ray as f64 + 0.5) / rays as f64;
        let (c, s) = (theta.cos(), theta.sin());
        let mut rs = Vec::with_capacity(steps + 1);
        let mut phases: Vec<f64> = Vec::with_capacity(steps + 1);
        for k in 0..=steps {
            let r = r0 + (r1 - r0) * k as f64 / steps as f64;
            let (u1, u2) = f.sample(center.0 + r * c, center.1 + r * s)?;
            let tangential = -u1 * s + u2 * c;
            let mut p = tangential.arg();
            if let Some(&prev) = phases.last() {
                while p - prev > std::f64::consts::PI {
                    p -= TAU;
                }
                while p - prev < -std::f64::consts::PI {
                    p += TAU;
                }
            }
            rs.push(r);
            phases.push(p);
        }
        slopes.push(least_squares_slope(&rs, &phases));
    }
    let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
    (mean != 0.0).then(|| TAU / mean.abs())
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// `(max − min) / mean` of `|U|` on a circle.
pub fn angular_variation(
    f: &ComplexField,
    center: (f64, f64),
    radius: f64,
    samples: usize,
) -> Option<f64> {
    let amp = field_amplitude(f);
    let values: Option<Vec<f64>> = (0..samples)
        .map(|s| {
            let theta = TAU * s as f64 / samples as f64;
            amp.sample(
                center.0 + radius * theta.cos(),
                center.1 + radius * theta.sin(),
            )
        })
        .collect();
    let values = values?;
    let (lo, hi) = values
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Some((hi - lo) / mean)
}

/// Relative L2 difference between `|U|` and its reflection across the horizontal
/// line through node row `j_axis`, over interior nodes whose mirror is interior.
pub fn mirror_asymmetry(f: &ComplexField, j_axis: usize) -> f64 {
    let g = &f.grid;
    let amp = field_amplitude(f);
    let (mut diff, mut total) = (0.0, 0.0);
    for j in 0..g.n {
        let Some(mj) = (2 * j_axis).checked_sub(j) else {
            continue;
        };
        if mj >= g.n {
            continue;
        }
        for i in 0..g.n {
            if g.in_pml(i, j) || g.in_pml(i, mj) {
                continue;
            }
            let (a, b) = (amp.get(i, j), amp.get(i, mj));
            diff += (a - b).powi(2);
            total += a * a;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        (diff / total).sqrt()
    }
}

/// Wavelength of the strongest spatial frequency in uniformly spaced complex
/// samples, searched over wavelengths in `[min, max]`.
pub fn dominant_wavelength(samples: &[Complex64], spacing: f64, min: f64, max: f64) -> f64 {
    let (k_lo, k_hi) = (TAU / max, TAU / min);
    let steps = 4000;
    let mut best = (0.0, k_lo);
    let mean = samples.iter().sum::<Complex64>() / samples.len() as f64;
    for s in 0..=steps {
        let k = k_lo + (k_hi - k_lo) * s as f64 / steps as f64;
        let power = samples
            .iter()
            .enumerate()
            .map(|(n, z)| {
                let phase = Complex64::from_polar(1.0, -k * spacing * n as f64);
                (z - mean) * phase
            })
            .sum::<Complex64>()
            .norm();
        if power > best.0 {
            best = (power, k);
        }
    }
    TAU / best.1
}

/// Scene-level convenience: the default sector behind the inclusion.
pub fn default_shadow_metric(
    f: &ComplexField,
    scene: &ContinuumScene,
) -> Result<f64, ContinuumError> {
    shadow_metric(f, &scene.default_sector())
}

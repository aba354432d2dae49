use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use serde::{Deserialize, Serialize};

use super::pml::Pml;
use super::solver::SolverOptions;
use super::{ContinuumError, Grid};

/// Fewest points per ambient shear wavelength accepted by [`build_scene`].
pub const MIN_POINTS_PER_WAVELENGTH: f64 = 10.0;

/// Homogeneous material parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Medium {
    pub rho: f64,
    pub mu: f64,
    pub lambda: f64,
    pub alpha: f64,
}

impl Default for Medium {
    fn default() -> Self {
        Medium {
            rho: 1.0,
            mu: 1.0,
            lambda: 1.0,
            alpha: 0.0,
        }
    }
}

impl Medium {
    pub fn shear_wavelength(&self, omega: f64) -> f64 {
        TAU * (self.mu / self.rho).sqrt() / omega
    }

    pub fn pressure_speed(&self) -> f64 {
        ((self.lambda + 2.0 * self.mu) / self.rho).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    /// Unit direction, magnitude.
    PointForce {
        direction: (f64, f64),
        magnitude: f64,
    },
    PointMoment {
        magnitude: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub kind: SourceKind,
    pub position: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoatingSign {
    /// `+α` on the left of the axis (looking from the source towards the centre).
    #[default]
    Plus,
    Minus,
}

/// Inclusion with a two-semi-ring chiral coating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoatedInclusion {
    pub center: (f64, f64),
    pub r_inner: f64,
    pub r_outer: f64,
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
    /// Magnitude of the coating spinner constant.
    pub alpha: f64,
    pub sign: CoatingSign,
    /// Unit vector from the source through the centre.
    pub axis: (f64, f64),
}

impl CoatedInclusion {
    /// Spinner constant of the coating at a point, 0 off the coating and on the axis.
    pub fn coating_alpha(&self, x: f64, y: f64) -> Option<f64> {
        self.coating_alpha_at_offset(x - self.center.0, y - self.center.1)
    }

    fn coating_alpha_at_offset(&self, dx: f64, dy: f64) -> Option<f64> {
        let r = dx.hypot(dy);
        if r <= self.r_inner || r > self.r_outer {
            return None;
        }
        let side = self.axis.0 * dy - self.axis.1 * dx;
        let side = if side.abs() <= 1e-12 * r { 0.0 } else { side };
        let sign = match self.sign {
            CoatingSign::Plus => 1.0,
            CoatingSign::Minus => -1.0,
        };
        Some(if side == 0.0 {
            0.0
        } else {
            sign * side.signum() * self.alpha
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourcePosition {
    /// Three coating radii from the centre, towards the upper-left corner.
    Default,
    Center,
    At(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub moment: bool,
    pub position: SourcePosition,
    /// `None` points a force towards the domain centre, or along `+x` from the centre.
    pub direction: Option<(f64, f64)>,
    pub magnitude: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            moment: false,
            position: SourcePosition::Default,
            direction: None,
            magnitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InclusionConfig {
    /// Defaults to one ambient shear wavelength.
    pub r_inner: Option<f64>,
    /// Defaults to `1.5 · r_inner`.
    pub r_outer: Option<f64>,
    pub lambda: f64,
    pub mu: f64,
    /// Defaults to the ambient density.
    pub rho: Option<f64>,
    pub coating_alpha: f64,
    pub coating_sign: CoatingSign,
}

impl Default for InclusionConfig {
    fn default() -> Self {
        InclusionConfig {
            r_inner: None,
            r_outer: None,
            lambda: 23.0,
            mu: 12.0,
            rho: None,
            coating_alpha: 0.0,
            coating_sign: CoatingSign::Plus,
        }
    }
}

/// Everything needed to build a [`ContinuumScene`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub omega: f64,
    /// Interior side length; defaults to `side_wavelengths` ambient shear wavelengths.
    pub side: Option<f64>,
    pub side_wavelengths: f64,
    pub points_per_wavelength: f64,
    pub pml_cells: usize,
    pub pml_order: f64,
    pub pml_reflection: f64,
    pub medium: Medium,
    pub source: SourceConfig,
    pub inclusion: Option<InclusionConfig>,
    pub profile_samples: usize,
    pub solver: SolverOptions,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            omega: 10.0,
            side: None,
            side_wavelengths: 12.0,
            points_per_wavelength: 30.0,
            pml_cells: 20,
            pml_order: 3.0,
            pml_reflection: 1e-6,
            medium: Medium::default(),
            source: SourceConfig::default(),
            inclusion: None,
            profile_samples: super::DEFAULT_PROFILE_SAMPLES,
            solver: SolverOptions::default(),
        }
    }
}

impl SceneConfig {
    /// Uniform medium driven by a point moment at the centre.
    pub fn uniform_moment(alpha: f64) -> Self {
        SceneConfig {
            medium: Medium {
                alpha,
                ..Medium::default()
            },
            source: SourceConfig {
                moment: true,
                position: SourcePosition::Center,
                ..SourceConfig::default()
            },
            ..SceneConfig::default()
        }
    }

    /// Uniform medium driven by a horizontal point force at the centre.
    pub fn uniform_force(alpha: f64) -> Self {
        SceneConfig {
            medium: Medium {
                alpha,
                ..Medium::default()
            },
            source: SourceConfig {
                position: SourcePosition::Center,
                direction: Some((1.0, 0.0)),
                ..SourceConfig::default()
            },
            ..SceneConfig::default()
        }
    }

    /// Default cloaking geometry with a coating of spinner constant `alpha`.
    pub fn coated(alpha: f64, moment: bool) -> Self {
        SceneConfig {
            source: SourceConfig {
                moment,
                ..SourceConfig::default()
            },
            inclusion: Some(InclusionConfig {
                coating_alpha: alpha,
                ..InclusionConfig::default()
            }),
            ..SceneConfig::default()
        }
    }

    /// Full-size variant at ω = 50 with the geometry kept fixed in wavelengths.
    pub fn full_scale(mut self) -> Self {
        self.omega = 50.0;
        self.side = None;
        self
    }
}

/// Rasterized scene, ready for assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumScene {
    pub config: SceneConfig,
    pub grid: Grid,
    pub omega: f64,
    pub center: (f64, f64),
    pub shear_wavelength: f64,
    /// Per-node coefficients, `i` fastest.
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub rho: Vec<f64>,
    pub alpha: Vec<f64>,
    pub pml: Pml,
    pub source: Source,
    pub inclusion: Option<CoatedInclusion>,
}

impl ContinuumScene {
    /// Default sector behind the inclusion as seen from the source.
    pub fn default_sector(&self) -> super::Sector {
        let (r_outer, axis) = match &self.inclusion {
            Some(inc) => (inc.r_outer, inc.axis),
            None => (1.5 * self.shear_wavelength, self.axis()),
        };
        super::Sector {
            apex: self.center,
            direction: axis,
            half_angle: 30f64.to_radians(),
            r_min: r_outer,
            r_max: 3.0 * r_outer,
        }
    }

    /// Unit vector from the source to the centre, `+x` if they coincide.
    pub fn axis(&self) -> (f64, f64) {
        unit_towards(self.source.position, self.center).unwrap_or((1.0, 0.0))
    }
}

fn unit_towards(from: (f64, f64), to: (f64, f64)) -> Option<(f64, f64)> {
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    let r = dx.hypot(dy);
    (r > 0.0).then(|| (dx / r, dy / r))
}

fn positive(name: &'static str, value: f64) -> Result<(), ContinuumError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ContinuumError::Parameter {
            name,
            value,
            reason: "must be positive and finite",
        })
    }
}

/// Rasterizes a scene configuration onto the node grid.
///
/// Coefficients are painted ambient, inclusion, coating; each node takes the
/// value of the last shape containing it.
pub fn build_scene(config: &SceneConfig) -> Result<ContinuumScene, ContinuumError> {
    let c = config;
    positive("omega", c.omega)?;
    positive("points_per_wavelength", c.points_per_wavelength)?;
    positive("side_wavelengths", c.side_wavelengths)?;
    positive("pml_order", c.pml_order)?;
    positive("rho", c.medium.rho)?;
    positive("mu", c.medium.mu)?;
    positive("source magnitude", c.source.magnitude)?;
    if !(c.pml_reflection > 0.0 && c.pml_reflection < 1.0) {
        return Err(ContinuumError::Parameter {
            name: "pml_reflection",
            value: c.pml_reflection,
            reason: "must lie in (0, 1)",
        });
    }
    let wavelength = c.medium.shear_wavelength(c.omega);
    let side = c.side.unwrap_or(c.side_wavelengths * wavelength);
    positive("side", side)?;

    // Even cell count so the centre is a node.
    let mut cells = (side / (wavelength / c.points_per_wavelength)).ceil() as usize;
    cells += cells % 2;
    let h = side / cells as f64;
    let ppw = wavelength / h;
    if ppw < MIN_POINTS_PER_WAVELENGTH {
        return Err(ContinuumError::UnderResolved {
            points_per_wavelength: ppw,
            min: MIN_POINTS_PER_WAVELENGTH,
        });
    }
    let pml_cells = c.pml_cells;
    let n = cells + 2 * pml_cells + 1;
    let grid = Grid {
        n,
        h,
        origin: (-(pml_cells as f64) * h, -(pml_cells as f64) * h),
        pml_cells,
    };
    let center = (side / 2.0, side / 2.0);
    let inside = |x: f64, y: f64, margin: f64| {
        x - margin >= 0.0 && y - margin >= 0.0 && x + margin <= side && y + margin <= side
    };

    let (r_inner, r_outer) = match &c.inclusion {
        Some(inc) => {
            let ri = inc.r_inner.unwrap_or(wavelength);
            let ro = inc.r_outer.unwrap_or(1.5 * ri);
            positive("r_inner", ri)?;
            if !(ro >= ri) {
                return Err(ContinuumError::Parameter {
                    name: "r_outer",
                    value: ro,
                    reason: "must not be smaller than r_inner",
                });
            }
            positive("inclusion mu", inc.mu)?;
            if !inside(center.0, center.1, ro) {
                return Err(ContinuumError::InPml {
                    what: "coated inclusion",
                });
            }
            (ri, ro)
        }
        None => (wavelength, 1.5 * wavelength),
    };

    let mut position = match c.source.position {
        SourcePosition::Default => {
            let d = 3.0 * r_outer;
            (center.0 - d * FRAC_1_SQRT_2, center.1 + d * FRAC_1_SQRT_2)
        }
        SourcePosition::Center => center,
        SourcePosition::At(x, y) => (x, y),
    };
    if c.source.moment {
        let (fi, fj) = grid.locate(position.0, position.1);
        position = (grid.x(fi.round() as usize), grid.y(fj.round() as usize));
    }
    if !inside(position.0, position.1, wavelength) {
        return Err(ContinuumError::SourcePlacement {
            x: position.0,
            y: position.1,
        });
    }
    let axis = unit_towards(position, center).unwrap_or((1.0, 0.0));
    let kind = if c.source.moment {
        SourceKind::PointMoment {
            magnitude: c.source.magnitude,
        }
    } else {
        let direction = match c.source.direction {
            Some(d) => unit_towards((0.0, 0.0), d).ok_or(ContinuumError::Parameter {
                name: "source direction",
                value: 0.0,
                reason: "must be nonzero",
            })?,
            None => axis,
        };
        SourceKind::PointForce {
            direction,
            magnitude: c.source.magnitude,
        }
    };

    let inclusion = c.inclusion.as_ref().map(|inc| CoatedInclusion {
        center,
        r_inner,
        r_outer,
        lambda: inc.lambda,
        mu: inc.mu,
        rho: inc.rho.unwrap_or(c.medium.rho),
        alpha: inc.coating_alpha,
        sign: inc.coating_sign,
        axis,
    });

    let len = grid.len();
    let mut lambda = vec![c.medium.lambda; len];
    let mut mu = vec![c.medium.mu; len];
    let mut rho = vec![c.medium.rho; len];
    let mut alpha = vec![c.medium.alpha; len];
    if let Some(inc) = &inclusion {
        // Offsets from the centre node are exact multiples of h, which keeps the
        // raster symmetric under reflections through the centre.
        let mid = (pml_cells + cells / 2) as f64;
        for j in 0..n {
            for i in 0..n {
                let (dx, dy) = ((i as f64 - mid) * h, (j as f64 - mid) * h);
                let idx = grid.index(i, j);
                if dx.hypot(dy) <= inc.r_inner {
                    lambda[idx] = inc.lambda;
                    mu[idx] = inc.mu;
                    rho[idx] = inc.rho;
                    alpha[idx] = 0.0;
                }
                if let Some(a) = inc.coating_alpha_at_offset(dx, dy) {
                    lambda[idx] = c.medium.lambda;
                    mu[idx] = c.medium.mu;
                    rho[idx] = c.medium.rho;
                    alpha[idx] = a;
                }
            }
        }
    }
    for (name, field) in [("mu", &mu), ("rho", &rho)] {
        if let Some(idx) = field.iter().position(|v| !(*v > 0.0)) {
            return Err(ContinuumError::NonPositiveCoefficient {
                name,
                i: idx % n,
                j: idx / n,
                value: field[idx],
            });
        }
    }

    let speed = lambda
        .iter()
        .zip(&mu)
        .zip(&rho)
        .map(|((l, m), r)| ((l + 2.0 * m) / r).sqrt())
        .fold(0.0, f64::max);
    let pml = Pml::new(
        pml_cells,
        c.pml_order,
        c.pml_reflection,
        speed,
        c.omega,
        n,
        h,
    );
    Ok(ContinuumScene {
        config: c.clone(),
        grid,
        omega: c.omega,
        center,
        shear_wavelength: wavelength,
        lambda,
        mu,
        rho,
        alpha,
        pml,
        source: Source { kind, position },
        inclusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_is_near_400() {
        let s = build_scene(&SceneConfig::default()).unwrap();
        assert!((380..=420).contains(&s.grid.n), "n = {}", s.grid.n);
        assert!((s.shear_wavelength / s.grid.h - 30.0).abs() < 0.5);
        let (lo, hi) = s.grid.interior();
        assert!(lo.abs() < 1e-12);
        assert!((hi - 12.0 * s.shear_wavelength).abs() < 1e-9);
        let c = s.grid.locate(s.center.0, s.center.1);
        assert_eq!(c.0.fract(), 0.0);
    }

    #[test]
    fn empty_scene_is_uniform() {
        let s = build_scene(&SceneConfig::uniform_force(0.0)).unwrap();
        assert!(s.mu.iter().all(|&m| m == 1.0));
        assert!(s.alpha.iter().all(|&a| a == 0.0));
        assert!(s.lambda.iter().all(|&l| l == 1.0));
    }

    #[test]
    fn inclusion_moduli_inside() {
        let s = build_scene(&SceneConfig::coated(1.5, false)).unwrap();
        let inc = s.inclusion.unwrap();
        for j in 0..s.grid.n {
            for i in 0..s.grid.n {
                let r = (s.grid.x(i) - s.center.0).hypot(s.grid.y(j) - s.center.1);
                let idx = s.grid.index(i, j);
                if r < inc.r_inner - 1e-9 {
                    assert_eq!((s.mu[idx], s.lambda[idx]), (12.0, 23.0));
                } else if r > inc.r_outer + 1e-9 {
                    assert_eq!((s.mu[idx], s.alpha[idx]), (1.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn coating_antisymmetric_across_axis() {
        let s = build_scene(&SceneConfig::coated(2.0, true)).unwrap();
        let inc = s.inclusion.unwrap();
        assert!(
            (inc.axis.0 - FRAC_1_SQRT_2).abs() < 1e-12
                && (inc.axis.1 + FRAC_1_SQRT_2).abs() < 1e-12
        );
        let c = s.grid.locate(s.center.0, s.center.1);
        let (ci, cj) = (c.0 as i64, c.1 as i64);
        let mut seen = 0;
        for j in 0..s.grid.n as i64 {
            for i in 0..s.grid.n as i64 {
                // Reflection about the anti-diagonal through the centre.
                let (mi, mj) = (ci - (j - cj), cj - (i - ci));
                let a = s.alpha[s.grid.index(i as usize, j as usize)];
                let b = s.alpha[s.grid.index(mi as usize, mj as usize)];
                assert_eq!(a, -b);
                if a != 0.0 {
                    seen += 1;
                }
            }
        }
        assert!(seen > 100);
    }

    #[test]
    fn rejects_bad_scenes() {
        let coarse = SceneConfig {
            points_per_wavelength: 8.0,
            ..SceneConfig::default()
        };
        assert!(matches!(
            build_scene(&coarse),
            Err(ContinuumError::UnderResolved { .. })
        ));
        let mut big = SceneConfig::coated(1.0, false);
        big.inclusion.as_mut().unwrap().r_inner = Some(5.0);
        assert_eq!(
            build_scene(&big),
            Err(ContinuumError::InPml {
                what: "coated inclusion"
            })
        );
        let mut edge = SceneConfig::default();
        edge.source.position = SourcePosition::At(0.1, 3.0);
        assert!(matches!(
            build_scene(&edge),
            Err(ContinuumError::SourcePlacement { .. })
        ));
        let mut neg = SceneConfig::coated(1.0, false);
        neg.inclusion.as_mut().unwrap().mu = -1.0;
        assert!(matches!(
            build_scene(&neg),
            Err(ContinuumError::Parameter { .. })
        ));
    }

    #[test]
    fn default_source_upper_left() {
        let s = build_scene(&SceneConfig::coated(0.0, false)).unwrap();
        let (x, y) = s.source.position;
        let inc = s.inclusion.unwrap();
        assert!(x < s.center.0 && y > s.center.1);
        assert!(((x - s.center.0).hypot(y - s.center.1) - 3.0 * inc.r_outer).abs() < 1e-9);
        match s.source.kind {
            SourceKind::PointForce { direction, .. } => assert_eq!(direction, inc.axis),
            _ => panic!("expected a force"),
        }
    }
}

//! Run configuration: a flat `key = value` text format with `[section]` headers.
//!
//! ```text
//! command = bands
//! [lattice]
//! flavor = biatomic
//! m2 = 10
//! alpha1 = 0.5   # trailing comments are allowed
//! ```
//!
//! Keys before the first header belong to `[run]`. Every key has a default; unknown
//! and duplicate keys are rejected. [`RunConfig::to_text`] writes every resolved
//! value, and parsing that text yields an equal config.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::continuum::{
    CoatingSign, InclusionConfig, Medium, SceneConfig, SolverKind, SolverOptions, SourceConfig,
    SourcePosition,
};
use crate::gyro::SignBranch;
use crate::lattice::{Flavor, LatticeSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: unknown section [{section}]")]
    UnknownSection { section: String, line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("duplicate key `{key}` on lines {first} and {second}")]
    Duplicate {
        key: String,
        first: usize,
        second: usize,
    },
    #[error("line {line}: `{key}` = `{value}`: expected {expected}")]
    Value {
        key: String,
        line: usize,
        value: String,
        expected: &'static str,
    },
    #[error("unknown command `{0}`")]
    UnknownCommand(String),
    #[error("override `{0}` is not of the form section.key=value")]
    Override(String),
    #[error("`{key}` is required: {reason}")]
    Missing {
        key: &'static str,
        reason: &'static str,
    },
}

const SECTIONS: &[&str] = &[
    "run",
    "lattice",
    "gyro",
    "dispersion",
    "bands",
    "gaps",
    "sweep",
    "contours",
    "domain",
    "medium",
    "source",
    "inclusion",
    "coating",
    "solver",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Gyro,
    Dispersion,
    Bands,
    Gaps,
    SweepAlpha,
    Contours,
    Continuum,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Gyro,
        Command::Dispersion,
        Command::Bands,
        Command::Gaps,
        Command::SweepAlpha,
        Command::Contours,
        Command::Continuum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Gyro => "gyro",
            Command::Dispersion => "dispersion",
            Command::Bands => "bands",
            Command::Gaps => "gaps",
            Command::SweepAlpha => "sweep-alpha",
            Command::Contours => "contours",
            Command::Continuum => "continuum",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| ConfigError::UnknownCommand(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GyroParams {
    pub i0: f64,
    pub i: f64,
    pub h: f64,
    pub omega: f64,
    pub branch: SignBranch,
}

impl Default for GyroParams {
    fn default() -> Self {
        GyroParams {
            i0: 2.0,
            i: 1.0,
            h: 1.0,
            omega: 5.0,
            branch: SignBranch::Plus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersionParams {
    /// Wavevector in `k·l` units.
    pub k1l: f64,
    pub k2l: f64,
    /// Adds determinant-scan columns.
    pub oracle: bool,
    /// Scan bound; `None` uses the Gershgorin-type bound.
    pub omega_max: Option<f64>,
    pub steps: usize,
}

impl Default for DispersionParams {
    fn default() -> Self {
        DispersionParams {
            k1l: 0.0,
            k2l: 0.0,
            oracle: false,
            omega_max: None,
            steps: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandsParams {
    pub resolution: usize,
    /// `(k1l_min, k1l_max, k2l_min, k2l_max)`; `None` samples one reciprocal cell.
    pub window: Option<[f64; 4]>,
}

impl Default for BandsParams {
    fn default() -> Self {
        BandsParams {
            resolution: crate::bands::GAP_RESOLUTION,
            window: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapsParams {
    /// `None` searches up to the largest sampled frequency.
    pub omega_max: Option<f64>,
    pub threshold: f64,
}

impl Default for GapsParams {
    fn default() -> Self {
        GapsParams {
            omega_max: None,
            threshold: crate::bands::DEFAULT_GAP_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepParams {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_steps: usize,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub kappa_steps: usize,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            alpha_min: 0.0,
            alpha_max: 2.0,
            alpha_steps: 41,
            kappa_min: 0.0,
            kappa_max: std::f64::consts::PI,
            kappa_steps: 65,
        }
    }
}

impl SweepParams {
    pub fn alphas(&self) -> Vec<f64> {
        linspace(self.alpha_min, self.alpha_max, self.alpha_steps)
    }

    pub fn kappas(&self) -> Vec<f64> {
        linspace(self.kappa_min, self.kappa_max, self.kappa_steps)
    }
}

/// `n` points from `a` to `b` inclusive; a single point is `a`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourParams {
    pub branch: usize,
    pub levels: Vec<f64>,
}

impl Default for ContourParams {
    fn default() -> Self {
        ContourParams {
            branch: 0,
            levels: vec![0.25, 0.5, 1.0, 1.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub out: Option<PathBuf>,
    /// Whitespace-separated tables instead of CSV.
    pub plotdata: bool,
    pub lattice: LatticeSpec,
    pub gyro: GyroParams,
    pub dispersion: DispersionParams,
    pub bands: BandsParams,
    pub gaps: GapsParams,
    pub sweep: SweepParams,
    pub contours: ContourParams,
    pub scene: SceneConfig,
    /// Runs the continuum at ω = 50 with the geometry fixed in wavelengths.
    pub full_scale: bool,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            out: None,
            plotdata: false,
            lattice: LatticeSpec::default(),
            gyro: GyroParams::default(),
            dispersion: DispersionParams::default(),
            bands: BandsParams::default(),
            gaps: GapsParams::default(),
            sweep: SweepParams::default(),
            contours: ContourParams::default(),
            scene: SceneConfig::default(),
            full_scale: false,
        }
    }

    /// Scene with `full_scale` applied.
    pub fn resolved_scene(&self) -> SceneConfig {
        if self.full_scale {
            self.scene.clone().full_scale()
        } else {
            self.scene.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    /// 1-based source line; 0 for command-line overrides.
    line: usize,
}

/// Parsed but unresolved `section.key → value` map.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
        let mut section = "run".to_string();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = strip_comment(raw_line).trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line,
                    reason: "unterminated section header".into(),
                })?;
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(ConfigError::UnknownSection {
                        section: name.to_string(),
                        line,
                    });
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                reason: format!("expected `key = value`, found `{content}`"),
            })?;
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(ConfigError::Syntax {
                    line,
                    reason: format!("invalid key `{key}`"),
                });
            }
            let full = format!("{section}.{key}");
            if let Some(prev) = entries.get(&full) {
                return Err(ConfigError::Duplicate {
                    key: full,
                    first: prev.line,
                    second: line,
                });
            }
            entries.insert(
                full,
                Entry {
                    value: value.trim().to_string(),
                    line,
                },
            );
        }
        Ok(RawConfig { entries })
    }

    /// Applies a `section.key=value` override, replacing any existing value.
    pub fn set_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::Override(assignment.to_string());
        let (key, value) = assignment.split_once('=').ok_or_else(bad)?;
        let key = key.trim();
        let (section, name) = key.split_once('.').ok_or_else(bad)?;
        if !SECTIONS.contains(&section) {
            return Err(ConfigError::UnknownSection {
                section: section.to_string(),
                line: 0,
            });
        }
        if name.is_empty() {
            return Err(bad());
        }
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.trim().to_string(),
                line: 0,
            },
        );
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Resolves against defaults. `command` wins over `run.command` when given.
    pub fn resolve(mut self, command: Option<Command>) -> Result<RunConfig, ConfigError> {
        let named = self.take("run.command", "a command name", |s| s.parse().ok())?;
        let command = command.or(named).unwrap_or(Command::Dispersion);
        let mut c = RunConfig::new(command);
        let r = &mut self;

        c.out = r.take("run.out", "a path", |s| Some(PathBuf::from(s)))?;
        r.set(&mut c.plotdata, "run.plotdata", "true or false", parse_bool)?;

        let l = &mut c.lattice;
        r.set(
            &mut l.flavor,
            "lattice.flavor",
            "monatomic or biatomic",
            |s| match s {
                "monatomic" => Some(Flavor::Monatomic),
                "biatomic" => Some(Flavor::Biatomic),
                _ => None,
            },
        )?;
        r.set(&mut l.l, "lattice.l", NUMBER, parse_f64)?;
        r.set(&mut l.c, "lattice.c", NUMBER, parse_f64)?;
        r.set(&mut l.m1, "lattice.m1", NUMBER, parse_f64)?;
        // A monatomic lattice carries one mass; m2 mirrors m1 unless given.
        l.m2 = l.m1;
        r.set(&mut l.m2, "lattice.m2", NUMBER, parse_f64)?;
        r.set(&mut l.alpha1, "lattice.alpha1", NUMBER, parse_f64)?;
        l.alpha2 = l.alpha1;
        r.set(&mut l.alpha2, "lattice.alpha2", NUMBER, parse_f64)?;

        let g = &mut c.gyro;
        r.set(&mut g.i0, "gyro.i0", NUMBER, parse_f64)?;
        r.set(&mut g.i, "gyro.i", NUMBER, parse_f64)?;
        r.set(&mut g.h, "gyro.h", NUMBER, parse_f64)?;
        r.set(&mut g.omega, "gyro.omega", NUMBER, parse_f64)?;
        r.set(&mut g.branch, "gyro.branch", "plus or minus", parse_branch)?;

        let d = &mut c.dispersion;
        r.set(&mut d.k1l, "dispersion.k1l", NUMBER, parse_f64)?;
        r.set(&mut d.k2l, "dispersion.k2l", NUMBER, parse_f64)?;
        r.set(
            &mut d.oracle,
            "dispersion.oracle",
            "true or false",
            parse_bool,
        )?;
        r.set(
            &mut d.omega_max,
            "dispersion.omega_max",
            AUTO_NUMBER,
            parse_auto_f64,
        )?;
        r.set(&mut d.steps, "dispersion.steps", COUNT, parse_usize)?;

        r.set(
            &mut c.bands.resolution,
            "bands.resolution",
            COUNT,
            parse_usize,
        )?;
        r.set(
            &mut c.bands.window,
            "bands.window",
            "auto or four comma-separated numbers",
            |s| {
                if s == "auto" {
                    return Some(None);
                }
                let v = parse_list(s)?;
                <[f64; 4]>::try_from(v).ok().map(Some)
            },
        )?;

        r.set(
            &mut c.gaps.omega_max,
            "gaps.omega_max",
            AUTO_NUMBER,
            parse_auto_f64,
        )?;
        r.set(&mut c.gaps.threshold, "gaps.threshold", NUMBER, parse_f64)?;

        let s = &mut c.sweep;
        r.set(&mut s.alpha_min, "sweep.alpha_min", NUMBER, parse_f64)?;
        r.set(&mut s.alpha_max, "sweep.alpha_max", NUMBER, parse_f64)?;
        r.set(&mut s.alpha_steps, "sweep.alpha_steps", COUNT, parse_usize)?;
        r.set(&mut s.kappa_min, "sweep.kappa_min", NUMBER, parse_f64)?;
        r.set(&mut s.kappa_max, "sweep.kappa_max", NUMBER, parse_f64)?;
        r.set(&mut s.kappa_steps, "sweep.kappa_steps", COUNT, parse_usize)?;

        r.set(
            &mut c.contours.branch,
            "contours.branch",
            COUNT,
            parse_usize,
        )?;
        r.set(
            &mut c.contours.levels,
            "contours.levels",
            "comma-separated numbers",
            parse_list,
        )?;

        let sc = &mut c.scene;
        r.set(&mut sc.omega, "domain.omega", NUMBER, parse_f64)?;
        r.set(&mut sc.side, "domain.side", AUTO_NUMBER, parse_auto_f64)?;
        r.set(
            &mut sc.side_wavelengths,
            "domain.side_wavelengths",
            NUMBER,
            parse_f64,
        )?;
        r.set(
            &mut sc.points_per_wavelength,
            "domain.points_per_wavelength",
            NUMBER,
            parse_f64,
        )?;
        r.set(&mut sc.pml_cells, "domain.pml_cells", COUNT, parse_usize)?;
        r.set(&mut sc.pml_order, "domain.pml_order", NUMBER, parse_f64)?;
        r.set(
            &mut sc.pml_reflection,
            "domain.pml_reflection",
            NUMBER,
            parse_f64,
        )?;
        r.set(
            &mut sc.profile_samples,
            "domain.profile_samples",
            COUNT,
            parse_usize,
        )?;
        r.set(
            &mut c.full_scale,
            "domain.full_scale",
            "true or false",
            parse_bool,
        )?;

        let m: &mut Medium = &mut sc.medium;
        r.set(&mut m.rho, "medium.rho", NUMBER, parse_f64)?;
        r.set(&mut m.mu, "medium.mu", NUMBER, parse_f64)?;
        m.lambda = m.mu;
        r.set(&mut m.lambda, "medium.lambda", NUMBER, parse_f64)?;
        r.set(&mut m.alpha, "medium.alpha", NUMBER, parse_f64)?;

        let src: &mut SourceConfig = &mut sc.source;
        r.set(
            &mut src.moment,
            "source.kind",
            "force or moment",
            |s| match s {
                "force" => Some(false),
                "moment" => Some(true),
                _ => None,
            },
        )?;
        r.set(
            &mut src.position,
            "source.position",
            "default, center, or x,y",
            |s| match s {
                "default" => Some(SourcePosition::Default),
                "center" => Some(SourcePosition::Center),
                _ => parse_pair(s).map(|(x, y)| SourcePosition::At(x, y)),
            },
        )?;
        r.set(
            &mut src.direction,
            "source.direction",
            "auto or dx,dy",
            |s| {
                if s == "auto" {
                    Some(None)
                } else {
                    parse_pair(s).map(Some)
                }
            },
        )?;
        r.set(&mut src.magnitude, "source.magnitude", NUMBER, parse_f64)?;

        let mut enabled = false;
        r.set(
            &mut enabled,
            "inclusion.enabled",
            "true or false",
            parse_bool,
        )?;
        let mut inc = InclusionConfig::default();
        r.set(
            &mut inc.r_inner,
            "inclusion.r_inner",
            AUTO_NUMBER,
            parse_auto_f64,
        )?;
        r.set(
            &mut inc.r_outer,
            "inclusion.r_outer",
            AUTO_NUMBER,
            parse_auto_f64,
        )?;
        r.set(&mut inc.lambda, "inclusion.lambda", NUMBER, parse_f64)?;
        r.set(&mut inc.mu, "inclusion.mu", NUMBER, parse_f64)?;
        r.set(&mut inc.rho, "inclusion.rho", AUTO_NUMBER, parse_auto_f64)?;
        r.set(&mut inc.coating_alpha, "coating.alpha", NUMBER, parse_f64)?;
        r.set(
            &mut inc.coating_sign,
            "coating.sign",
            "plus or minus",
            |s| match s {
                "plus" => Some(CoatingSign::Plus),
                "minus" => Some(CoatingSign::Minus),
                _ => None,
            },
        )?;
        sc.inclusion = enabled.then_some(inc);

        let so: &mut SolverOptions = &mut sc.solver;
        r.set(
            &mut so.kind,
            "solver.kind",
            "auto, direct, or iterative",
            |s| match s {
                "auto" => Some(SolverKind::Auto),
                "direct" => Some(SolverKind::Direct),
                "iterative" => Some(SolverKind::Iterative),
                _ => None,
            },
        )?;
        r.set(&mut so.tolerance, "solver.tolerance", NUMBER, parse_f64)?;
        r.set(
            &mut so.max_iterations,
            "solver.max_iterations",
            COUNT,
            parse_usize,
        )?;
        r.set(&mut so.restart, "solver.restart", COUNT, parse_usize)?;

        if let Some((key, entry)) = self.entries.iter().min_by_key(|(_, e)| e.line) {
            return Err(ConfigError::UnknownKey {
                key: key.clone(),
                line: entry.line,
            });
        }
        Ok(c)
    }

    fn take<T>(
        &mut self,
        key: &str,
        expected: &'static str,
        parse: impl Fn(&str) -> Option<T>,
    ) -> Result<Option<T>, ConfigError> {
        let Some(entry) = self.entries.remove(key) else {
            return Ok(None);
        };
        parse(&entry.value).map(Some).ok_or(ConfigError::Value {
            key: key.to_string(),
            line: entry.line,
            value: entry.value,
            expected,
        })
    }

    fn set<T>(
        &mut self,
        slot: &mut T,
        key: &str,
        expected: &'static str,
        parse: impl Fn(&str) -> Option<T>,
    ) -> Result<(), ConfigError> {
        if let Some(v) = self.take(key, expected, parse)? {
            *slot = v;
        }
        Ok(())
    }
}

const NUMBER: &str = "a finite number";
const AUTO_NUMBER: &str = "auto or a finite number";
const COUNT: &str = "a non-negative integer";

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        Some(p) => &line[..p],
        None => line,
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

fn parse_auto_f64(s: &str) -> Option<Option<f64>> {
    if s == "auto" {
        Some(None)
    } else {
        parse_f64(s).map(Some)
    }
}

fn parse_usize(s: &str) -> Option<usize> {
    s.parse().ok()
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

fn parse_branch(s: &str) -> Option<SignBranch> {
    match s {
        "plus" => Some(SignBranch::Plus),
        "minus" => Some(SignBranch::Minus),
        _ => None,
    }
}

fn parse_list(s: &str) -> Option<Vec<f64>> {
    if s.is_empty() {
        return Some(Vec::new());
    }
    s.split(',').map(|p| parse_f64(p.trim())).collect()
}

fn parse_pair(s: &str) -> Option<(f64, f64)> {
    match parse_list(s)?.as_slice() {
        [a, b] => Some((*a, *b)),
        _ => None,
    }
}

/// Parses a full configuration; `run.command` selects the command.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    RawConfig::parse(text)?.resolve(None)
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn auto(x: Option<f64>) -> String {
    x.map_or_else(|| "auto".to_string(), num)
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    /// Every resolved value, in the input format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut section = |name: &str, items: Vec<(&str, String)>| {
            let _ = writeln!(out, "[{name}]");
            for (k, v) in items {
                let _ = writeln!(out, "{k} = {v}");
            }
            out.push('\n');
        };
        let mut run = vec![("command", self.command.to_string())];
        if let Some(p) = &self.out {
            run.push(("out", p.display().to_string()));
        }
        run.push(("plotdata", self.plotdata.to_string()));
        section("run", run);

        let l = &self.lattice;
        section(
            "lattice",
            vec![
                (
                    "flavor",
                    match l.flavor {
                        Flavor::Monatomic => "monatomic".into(),
                        Flavor::Biatomic => "biatomic".into(),
                    },
                ),
                ("l", num(l.l)),
                ("c", num(l.c)),
                ("m1", num(l.m1)),
                ("m2", num(l.m2)),
                ("alpha1", num(l.alpha1)),
                ("alpha2", num(l.alpha2)),
            ],
        );
        let g = &self.gyro;
        section(
            "gyro",
            vec![
                ("i0", num(g.i0)),
                ("i", num(g.i)),
                ("h", num(g.h)),
                ("omega", num(g.omega)),
                ("branch", branch_name(g.branch).into()),
            ],
        );
        let d = &self.dispersion;
        section(
            "dispersion",
            vec![
                ("k1l", num(d.k1l)),
                ("k2l", num(d.k2l)),
                ("oracle", d.oracle.to_string()),
                ("omega_max", auto(d.omega_max)),
                ("steps", d.steps.to_string()),
            ],
        );
        section(
            "bands",
            vec![
                ("resolution", self.bands.resolution.to_string()),
                (
                    "window",
                    self.bands
                        .window
                        .map_or_else(|| "auto".into(), |w| list(&w)),
                ),
            ],
        );
        section(
            "gaps",
            vec![
                ("omega_max", auto(self.gaps.omega_max)),
                ("threshold", num(self.gaps.threshold)),
            ],
        );
        let s = &self.sweep;
        section(
            "sweep",
            vec![
                ("alpha_min", num(s.alpha_min)),
                ("alpha_max", num(s.alpha_max)),
                ("alpha_steps", s.alpha_steps.to_string()),
                ("kappa_min", num(s.kappa_min)),
                ("kappa_max", num(s.kappa_max)),
                ("kappa_steps", s.kappa_steps.to_string()),
            ],
        );
        section(
            "contours",
            vec![
                ("branch", self.contours.branch.to_string()),
                ("levels", list(&self.contours.levels)),
            ],
        );
        let sc = &self.scene;
        section(
            "domain",
            vec![
                ("omega", num(sc.omega)),
                ("side", auto(sc.side)),
                ("side_wavelengths", num(sc.side_wavelengths)),
                ("points_per_wavelength", num(sc.points_per_wavelength)),
                ("pml_cells", sc.pml_cells.to_string()),
                ("pml_order", num(sc.pml_order)),
                ("pml_reflection", num(sc.pml_reflection)),
                ("profile_samples", sc.profile_samples.to_string()),
                ("full_scale", self.full_scale.to_string()),
            ],
        );
        let m = &sc.medium;
        section(
            "medium",
            vec![
                ("rho", num(m.rho)),
                ("mu", num(m.mu)),
                ("lambda", num(m.lambda)),
                ("alpha", num(m.alpha)),
            ],
        );
        let src = &sc.source;
        section(
            "source",
            vec![
                ("kind", if src.moment { "moment" } else { "force" }.into()),
                (
                    "position",
                    match src.position {
                        SourcePosition::Default => "default".into(),
                        SourcePosition::Center => "center".into(),
                        SourcePosition::At(x, y) => list(&[x, y]),
                    },
                ),
                (
                    "direction",
                    src.direction
                        .map_or_else(|| "auto".into(), |(x, y)| list(&[x, y])),
                ),
                ("magnitude", num(src.magnitude)),
            ],
        );
        let inc = sc.inclusion.unwrap_or_default();
        section(
            "inclusion",
            vec![
                ("enabled", sc.inclusion.is_some().to_string()),
                ("r_inner", auto(inc.r_inner)),
                ("r_outer", auto(inc.r_outer)),
                ("lambda", num(inc.lambda)),
                ("mu", num(inc.mu)),
                ("rho", auto(inc.rho)),
            ],
        );
        section(
            "coating",
            vec![
                ("alpha", num(inc.coating_alpha)),
                (
                    "sign",
                    match inc.coating_sign {
                        CoatingSign::Plus => "plus".into(),
                        CoatingSign::Minus => "minus".into(),
                    },
                ),
            ],
        );
        let so = &sc.solver;
        section(
            "solver",
            vec![
                (
                    "kind",
                    match so.kind {
                        SolverKind::Auto => "auto".into(),
                        SolverKind::Direct => "direct".into(),
                        SolverKind::Iterative => "iterative".into(),
                    },
                ),
                ("tolerance", num(so.tolerance)),
                ("max_iterations", so.max_iterations.to_string()),
                ("restart", so.restart.to_string()),
            ],
        );
        out.truncate(out.trim_end().len());
        out.push('\n');
        out
    }
}

fn branch_name(b: SignBranch) -> &'static str {
    match b {
        SignBranch::Plus => "plus",
        SignBranch::Minus => "minus",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_dispersion_config_uses_normalized_defaults() {
        let c = parse_config("command = dispersion\n").unwrap();
        assert_eq!(c.command, Command::Dispersion);
        let l = c.lattice;
        assert_eq!((l.m1, l.c, l.l, l.alpha1), (1.0, 1.0, 1.0, 0.0));
        assert_eq!(l.flavor, Flavor::Monatomic);
    }

    #[test]
    fn duplicate_key_names_both_lines() {
        let err = parse_config("[lattice]\nm1 = 1\n\nm1 = 2\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Duplicate {
                key: "lattice.m1".into(),
                first: 2,
                second: 4
            }
        );
        assert!(err.to_string().contains("lines 2 and 4"));
    }

    #[test]
    fn unknown_keys_and_bad_values_carry_lines() {
        assert_eq!(
            parse_config("[lattice]\nmass = 3\n").unwrap_err(),
            ConfigError::UnknownKey {
                key: "lattice.mass".into(),
                line: 2
            }
        );
        assert!(matches!(
            parse_config("[gyro]\n\ni0 = two\n").unwrap_err(),
            ConfigError::Value { line: 3, .. }
        ));
        assert!(matches!(
            parse_config("[nowhere]\n").unwrap_err(),
            ConfigError::UnknownSection { line: 1, .. }
        ));
        assert!(matches!(
            parse_config("just words\n").unwrap_err(),
            ConfigError::Syntax { line: 1, .. }
        ));
        assert_eq!(
            parse_config("command = plot\n").unwrap_err(),
            ConfigError::Value {
                key: "run.command".into(),
                line: 1,
                value: "plot".into(),
                expected: "a command name"
            }
        );
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut raw = RawConfig::parse("[lattice]\nalpha1 = 0.5\n").unwrap();
        raw.set_override("lattice.alpha1=2").unwrap();
        raw.set_override("gaps.threshold = 0.01").unwrap();
        let c = raw.resolve(Some(Command::Gaps)).unwrap();
        assert_eq!(c.lattice.alpha1, 2.0);
        assert_eq!(c.gaps.threshold, 0.01);
        let mut raw = RawConfig::default();
        assert!(raw.set_override("threshold=1").is_err());
    }

    #[test]
    fn scene_sections_resolve() {
        let text = "command = continuum\n[source]\nkind = moment\nposition = 1.5, 2\n[inclusion]\nenabled = true\nr_inner = 0.7\n[coating]\nalpha = 1.5\nsign = minus\n[solver]\nkind = iterative\n";
        let c = parse_config(text).unwrap();
        assert!(c.scene.source.moment);
        assert_eq!(c.scene.source.position, SourcePosition::At(1.5, 2.0));
        let inc = c.scene.inclusion.unwrap();
        assert_eq!(
            (inc.r_inner, inc.coating_alpha, inc.coating_sign),
            (Some(0.7), 1.5, CoatingSign::Minus)
        );
        assert_eq!(c.scene.solver.kind, SolverKind::Iterative);
    }

    #[test]
    fn default_round_trip() {
        for cmd in Command::ALL {
            let c = RunConfig::new(cmd);
            assert_eq!(parse_config(&c.to_text()).unwrap(), c);
        }
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![-1e6..1e6f64, Just(0.1), Just(1e-300), Just(-0.0)]
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(
            alpha in finite(), m2 in 0.01..100.0f64, k in finite(), res in 16usize..256,
            levels in proptest::collection::vec(finite(), 0..5), moment: bool, inclusion: bool,
            pos in proptest::option::of((finite(), finite())),
        ) {
            let mut c = RunConfig::new(Command::Bands);
            c.lattice = LatticeSpec::biatomic(1.0, m2, alpha, -alpha);
            c.dispersion.k2l = k;
            c.bands.resolution = res;
            c.contours.levels = levels;
            c.scene.source.moment = moment;
            if let Some((x, y)) = pos {
                c.scene.source.position = SourcePosition::At(x, y);
            }
            if inclusion {
                c.scene.inclusion = Some(InclusionConfig { coating_alpha: alpha, ..InclusionConfig::default() });
            }
            let text = c.to_text();
            let back = parse_config(&text).unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(back.to_text(), text);
        }
    }
}

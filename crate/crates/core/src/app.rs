//! Command dispatch shared by the CLI and tests.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::bands::{
    alpha_sweep_diagonal, band_gaps, compute_surfaces, compute_surfaces_on, refined_branch_range,
    slowness_contours, BandSurfaces,
};
use crate::config::{Command, ConfigError, RunConfig};
use crate::continuum::{
    self, build_scene, diagonal_profile, field_amplitude, radial_wavelength, shadow_metric,
};
use crate::dispersion::{dispersion, dispersion_det_scan, scan_bound, Regime};
use crate::exec::Execution;
use crate::export::{self, Cell, Table};
use crate::gyro::{signed_spinner_constant, spinner_rates, SignBranch, SpinnerBody};
use crate::lattice::{BlochVector, KGrid};
use crate::Result;

/// Result of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    /// Primary table, rendered as CSV or plotdata.
    pub table: String,
    /// Machine-readable summary, if the command has one.
    pub summary: Option<Value>,
    /// Files written, when an output directory was given.
    pub files: Vec<PathBuf>,
}

pub fn run(cfg: &RunConfig, exec: Execution) -> Result<Output> {
    let (table, summary, extra) = match cfg.command {
        Command::Gyro => (gyro_table(cfg)?, None, Vec::new()),
        Command::Dispersion => (dispersion_table(cfg)?, None, Vec::new()),
        Command::Bands => {
            let s = surfaces(cfg, exec)?;
            let summary = band_summary(cfg, &s);
            (surface_table(&s), Some(summary), Vec::new())
        }
        Command::Gaps => {
            let s = surfaces(cfg, exec)?;
            let summary = band_summary(cfg, &s);
            let mut t = Table::new(["lower", "upper", "width"]);
            for g in gaps_of(cfg, &s) {
                t.push(vec![g.lower.into(), g.upper.into(), g.width().into()]);
            }
            (t, Some(summary), Vec::new())
        }
        Command::SweepAlpha => (sweep_table(cfg, exec)?, None, Vec::new()),
        Command::Contours => (contour_table(cfg, exec)?, None, Vec::new()),
        Command::Continuum => {
            let dir = cfg.out.as_deref().ok_or(ConfigError::Missing {
                key: "run.out",
                reason: "continuum writes grid files",
            })?;
            export::ensure_dir(dir)?;
            let (profile, report, files) = run_continuum(cfg, dir, exec)?;
            (profile, Some(report), files)
        }
    };
    let rendered = table.render(cfg.plotdata)?;
    let mut files = extra;
    if let Some(dir) = &cfg.out {
        export::ensure_dir(dir)?;
        let ext = if cfg.plotdata { "dat" } else { "csv" };
        let name = match cfg.command {
            Command::Continuum => "profile",
            c => c.name(),
        };
        let path = dir.join(format!("{name}.{ext}"));
        export::write_text(&path, &rendered)?;
        files.push(path);
        if let Some(s) = &summary {
            let path = dir.join(if cfg.command == Command::Continuum {
                "report.json"
            } else {
                "summary.json"
            });
            export::write_json(&path, s)?;
            files.push(path);
        }
        export::write_manifest(dir, cfg.command.name(), &cfg.to_text(), &files)?;
    }
    Ok(Output {
        table: rendered,
        summary,
        files,
    })
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Subcritical => "subcritical",
        Regime::Critical => "critical",
        Regime::Intercritical => "intercritical",
        Regime::Supercritical => "supercritical",
    }
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

fn gyro_table(cfg: &RunConfig) -> Result<Table> {
    let g = &cfg.gyro;
    let body = SpinnerBody::new(g.i0, g.i, g.h, g.branch)?;
    let rates = spinner_rates(&body, g.omega)?;
    let mut t = Table::new([
        "i0",
        "i",
        "h",
        "omega",
        "branch",
        "phi_dot",
        "spin_rate",
        "alpha",
    ]);
    t.push(vec![
        g.i0.into(),
        g.i.into(),
        g.h.into(),
        g.omega.into(),
        match g.branch {
            SignBranch::Plus => "plus",
            SignBranch::Minus => "minus",
        }
        .into(),
        rates.phi_dot.into(),
        rates.omega_spin.into(),
        signed_spinner_constant(&body).into(),
    ]);
    Ok(t)
}

fn dispersion_table(cfg: &RunConfig) -> Result<Table> {
    let spec = &cfg.lattice;
    spec.validate()?;
    let d = &cfg.dispersion;
    let k = BlochVector::from_scaled(d.k1l, d.k2l, spec.l);
    let n = spec.flavor.dofs();
    let branches = dispersion(k, spec)?;
    let mut header: Vec<String> = ["k1l", "k2l", "regime"].map(String::from).to_vec();
    header.extend(numbered("omega", n));
    let mut row: Vec<Cell> = vec![
        d.k1l.into(),
        d.k2l.into(),
        regime_name(branches.regime).into(),
    ];
    row.extend((0..n).map(|b| Cell::from(branches.omegas.get(b).copied())));
    if d.oracle {
        let bound = d.omega_max.unwrap_or_else(|| scan_bound(k, spec));
        let scan = dispersion_det_scan(k, spec, bound, d.steps)?;
        header.extend(numbered("det_omega", n));
        header.push("max_root_diff".into());
        row.extend((0..n).map(|b| Cell::from(scan.omegas.get(b).copied())));
        let diff = if scan.omegas.len() == branches.omegas.len() {
            Cell::Num(
                scan.omegas
                    .iter()
                    .zip(&branches.omegas)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max),
            )
        } else {
            Cell::Empty
        };
        row.push(diff);
    }
    let mut t = Table::new(header);
    t.push(row);
    Ok(t)
}

fn surfaces(cfg: &RunConfig, exec: Execution) -> Result<BandSurfaces> {
    let res = cfg.bands.resolution;
    Ok(match cfg.bands.window {
        None => compute_surfaces(&cfg.lattice, res, exec)?,
        Some([a, b, c, d]) => {
            let grid = KGrid::window(&cfg.lattice, (a, b), (c, d), res, res)?;
            compute_surfaces_on(&cfg.lattice, grid, false, exec)?
        }
    })
}

fn surface_table(s: &BandSurfaces) -> Table {
    let mut header: Vec<String> = vec!["k1l".into(), "k2l".into()];
    header.extend(numbered("omega", s.max_branches()));
    let mut t = Table::new(header);
    for (k, omegas) in s.points().iter().zip(&s.branches) {
        let (k1l, k2l) = k.scaled(s.spec.l);
        let mut row: Vec<Cell> = vec![k1l.into(), k2l.into()];
        row.extend(omegas.iter().map(|&w| Cell::from(w)));
        t.push(row);
    }
    t
}

fn gaps_of(cfg: &RunConfig, s: &BandSurfaces) -> Vec<crate::bands::BandGap> {
    let top = s.branches.iter().flatten().copied().fold(0.0, f64::max);
    band_gaps(s, cfg.gaps.omega_max.unwrap_or(top), cfg.gaps.threshold)
}

#[derive(Serialize)]
struct BranchRange {
    branch: usize,
    min: f64,
    max: f64,
}

fn band_summary(cfg: &RunConfig, s: &BandSurfaces) -> Value {
    let ranges: Vec<BranchRange> = (0..s.max_branches())
        .filter_map(|b| {
            refined_branch_range(s, b).map(|(min, max)| BranchRange {
                branch: b + 1,
                min,
                max,
            })
        })
        .collect();
    json!({
        "regime": regime_name(s.regime),
        "resolution": s.resolution(),
        "points": s.branches.len(),
        "branch_ranges": ranges,
        "gap_threshold": cfg.gaps.threshold,
        "gaps": gaps_of(cfg, s),
    })
}

fn sweep_table(cfg: &RunConfig, exec: Execution) -> Result<Table> {
    let sweep = alpha_sweep_diagonal(&cfg.lattice, &cfg.sweep.alphas(), &cfg.sweep.kappas(), exec)?;
    let mut header: Vec<String> = vec!["alpha".into(), "kappa".into()];
    header.extend(numbered("omega", cfg.lattice.flavor.dofs()));
    let mut t = Table::new(header);
    for (a, row) in sweep.alphas.iter().zip(&sweep.omegas) {
        for (k, omegas) in sweep.kappas.iter().zip(row) {
            let mut cells: Vec<Cell> = vec![(*a).into(), (*k).into()];
            cells.extend(omegas.iter().map(|&w| Cell::from(w)));
            t.push(cells);
        }
    }
    Ok(t)
}

fn contour_table(cfg: &RunConfig, exec: Execution) -> Result<Table> {
    let s = surfaces(cfg, exec)?;
    let mut t = Table::new(["branch", "level", "polyline", "point", "k1l", "k2l"]);
    for c in slowness_contours(&s, cfg.contours.branch, &cfg.contours.levels) {
        for (p, line) in c.polylines.iter().enumerate() {
            for (q, &(x, y)) in line.iter().enumerate() {
                t.push(vec![
                    (c.branch + 1).into(),
                    c.level.into(),
                    p.into(),
                    q.into(),
                    x.into(),
                    y.into(),
                ]);
            }
        }
    }
    Ok(t)
}

fn run_continuum(
    cfg: &RunConfig,
    dir: &Path,
    exec: Execution,
) -> Result<(Table, Value, Vec<PathBuf>)> {
    let scene = build_scene(&cfg.resolved_scene())?;
    let solution = continuum::solve(&scene, exec)?;
    let g = scene.grid;
    let amp = field_amplitude(&solution.field);
    let mut files = Vec::new();

    export::write_raw_grid(
        dir,
        "amplitude",
        &amp.values,
        [g.n, g.n],
        g.h,
        [g.origin.0, g.origin.1],
    )?;
    files.push(dir.join("amplitude.f64"));
    files.push(dir.join("amplitude.json"));
    let mut grid_table = Table::new(["x", "y", "amplitude"]);
    for j in 0..g.n {
        for i in 0..g.n {
            grid_table.push(vec![g.x(i).into(), g.y(j).into(), amp.get(i, j).into()]);
        }
    }
    let path = dir.join("amplitude.csv");
    export::write_text(&path, &grid_table.to_csv()?)?;
    files.push(path);

    let samples = scene.config.profile_samples;
    let profile = diagonal_profile(&solution.field, samples);
    let (lo, hi) = g.interior();
    let mut t = Table::new(["t", "x", "y", "amplitude"]);
    for (s, a) in profile.iter().enumerate() {
        let u = s as f64 / samples.saturating_sub(1).max(1) as f64;
        t.push(vec![
            u.into(),
            (lo + u * (hi - lo)).into(),
            (hi - u * (hi - lo)).into(),
            (*a).into(),
        ]);
    }

    let sector = scene.default_sector();
    let shadow = match shadow_metric(&solution.field, &sector) {
        Ok(v) => json!(v),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let lam = scene.shear_wavelength;
    let src = scene.source.position;
    let wavelength = radial_wavelength(&solution.field, src, 2.0 * lam, 5.0 * lam, 32);
    let report = json!({
        "grid": { "n": g.n, "h": g.h, "origin": [g.origin.0, g.origin.1], "pml_cells": g.pml_cells },
        "omega": scene.omega,
        "solver": { "method": scene_method(&solution), "residual": solution.residual, "history": solution.history },
        "shadow_sector": sector,
        "shadow_metric": shadow,
        "shear_wavelength": lam,
        "radial_wavelength_estimate": wavelength,
        "profile_samples": samples,
    });
    Ok((t, report, files))
}

fn scene_method(s: &continuum::Solution) -> &'static str {
    match s.method {
        continuum::SolverKind::Direct => "direct",
        continuum::SolverKind::Iterative => "iterative",
        continuum::SolverKind::Auto => "auto",
    }
}

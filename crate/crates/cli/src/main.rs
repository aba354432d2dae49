//! `gyrolattice` command-line front end.
//!
//! Each subcommand reads an optional config file, applies `--set section.key=value`
//! overrides and the subcommand's own flags, then runs. Tables go to stdout unless
//! `--out` is given. Failures print a JSON error object to stderr and exit with 1.
//! The rayon pool honours `RAYON_NUM_THREADS`.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gyrolattice::app;
use gyrolattice::config::{Command, RawConfig};
use gyrolattice::exec::Execution;
use gyrolattice::Error;
use serde_json::json;

#[derive(Parser, Debug)]
#[command(
    name = "gyrolattice",
    version,
    about = "Dispersion of gyroscopic triangular lattices and chiral continuum scattering"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Config file (flat `key = value` with `[section]` headers).
    #[arg(long, visible_aliases = ["spec", "scene"], value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set lattice.alpha1=0.5`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Write artifacts, a summary and a manifest into this directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Emit whitespace-separated tables instead of CSV.
    #[arg(long)]
    plotdata: bool,
    /// Evaluate sweeps on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Spinner rates and spinner constant of a gyroscope.
    Gyro {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        i0: Option<f64>,
        #[arg(long)]
        i: Option<f64>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        omega: Option<f64>,
        /// `plus` or `minus`.
        #[arg(long)]
        branch: Option<String>,
    },
    /// Dispersion branches at one wavevector.
    Dispersion {
        #[command(flatten)]
        common: Common,
        /// Wavevector `k1l,k2l` in units of the bond length.
        #[arg(long, value_name = "K1L,K2L", allow_hyphen_values = true)]
        k: Option<String>,
        /// Add determinant-scan columns.
        #[arg(long)]
        oracle: bool,
    },
    /// Dispersion surfaces over the reciprocal cell or a window.
    Bands {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Total band gaps.
    Gaps {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        omega_max: Option<f64>,
    },
    /// ω(α, κ) along the diagonal k1·l = k2·l = κ.
    #[command(name = "sweep-alpha")]
    SweepAlpha {
        #[command(flatten)]
        common: Common,
    },
    /// Slowness (isofrequency) contours.
    Contours {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        resolution: Option<usize>,
        /// Comma-separated ω levels.
        #[arg(long)]
        levels: Option<String>,
        /// 1-based branch index.
        #[arg(long)]
        branch: Option<usize>,
    },
    /// Frequency-domain chiral continuum solve.
    Continuum {
        #[command(flatten)]
        common: Common,
        /// Run at ω = 50 with the geometry fixed in wavelengths.
        #[arg(long)]
        full_scale: bool,
    },
}

fn push<T: ToString>(sets: &mut Vec<String>, key: &str, v: Option<T>) {
    if let Some(v) = v {
        sets.push(format!("{key}={}", v.to_string()));
    }
}

fn split(cmd: Cmd) -> (Command, Common, Vec<String>) {
    let mut sets = Vec::new();
    let (command, common) = match cmd {
        Cmd::Gyro {
            common,
            i0,
            i,
            h,
            omega,
            branch,
        } => {
            push(&mut sets, "gyro.i0", i0);
            push(&mut sets, "gyro.i", i);
            push(&mut sets, "gyro.h", h);
            push(&mut sets, "gyro.omega", omega);
            push(&mut sets, "gyro.branch", branch);
            (Command::Gyro, common)
        }
        Cmd::Dispersion { common, k, oracle } => {
            if let Some(k) = k {
                let mut parts = k.splitn(2, ',');
                push(&mut sets, "dispersion.k1l", parts.next().map(str::trim));
                push(
                    &mut sets,
                    "dispersion.k2l",
                    Some(parts.next().unwrap_or("").trim()),
                );
            }
            if oracle {
                sets.push("dispersion.oracle=true".into());
            }
            (Command::Dispersion, common)
        }
        Cmd::Bands { common, resolution } => {
            push(&mut sets, "bands.resolution", resolution);
            (Command::Bands, common)
        }
        Cmd::Gaps {
            common,
            resolution,
            omega_max,
        } => {
            push(&mut sets, "bands.resolution", resolution);
            push(&mut sets, "gaps.omega_max", omega_max);
            (Command::Gaps, common)
        }
        Cmd::SweepAlpha { common } => (Command::SweepAlpha, common),
        Cmd::Contours {
            common,
            resolution,
            levels,
            branch,
        } => {
            push(&mut sets, "bands.resolution", resolution);
            push(&mut sets, "contours.levels", levels);
            push(
                &mut sets,
                "contours.branch",
                branch.map(|b| b.saturating_sub(1)),
            );
            (Command::Contours, common)
        }
        Cmd::Continuum { common, full_scale } => {
            if full_scale {
                sets.push("domain.full_scale=true".into());
            }
            (Command::Continuum, common)
        }
    };
    (command, common, sets)
}

fn execute(cli: Cli) -> Result<(), Error> {
    let (command, common, flag_sets) = split(cli.command);
    let mut raw = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            RawConfig::parse(&text)?
        }
        None => RawConfig::default(),
    };
    for s in common.overrides.iter().chain(&flag_sets) {
        raw.set_override(s)?;
    }
    let mut cfg = raw.resolve(Some(command))?;
    if let Some(out) = common.out {
        cfg.out = Some(out);
    }
    cfg.plotdata |= common.plotdata;
    let exec = if common.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let output = app::run(&cfg, exec)?;
    let mut stdout = std::io::stdout().lock();
    let result = if cfg.out.is_some() {
        output
            .files
            .iter()
            .try_for_each(|f| writeln!(stdout, "{}", f.display()))
    } else {
        stdout.write_all(output.table.as_bytes())
    };
    result.map_err(|e| Error::io("<stdout>", e))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let payload = json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}

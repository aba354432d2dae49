//! Output formats: CSV, whitespace tables, raw `f64` grids and JSON.
//!
//! Floats are written with 17 significant digits so every value round-trips.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::{Error, Result};

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_float(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

/// Header plus possibly ragged rows; short rows are padded with empty cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }

    fn width(&self) -> usize {
        self.rows
            .iter()
            .map(Vec::len)
            .fold(self.header.len(), usize::max)
    }

    fn padded(&self) -> Vec<Vec<String>> {
        let w = self.width();
        self.rows
            .iter()
            .map(|r| {
                (0..w)
                    .map(|c| r.get(c).map_or_else(String::new, Cell::render))
                    .collect()
            })
            .collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .flexible(false)
            .from_writer(Vec::new());
        let mut header = self.header.clone();
        header.resize(self.width(), String::new());
        w.write_record(&header)?;
        for row in self.padded() {
            w.write_record(&row)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| csv::Error::from(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    /// Whitespace-separated columns with a `#` header line. Missing cells are `NaN`,
    /// which gnuplot skips.
    pub fn to_plotdata(&self) -> String {
        let mut out = format!("# {}\n", self.header.join(" "));
        for row in self.padded() {
            let cells: Vec<String> = row
                .into_iter()
                .map(|c| {
                    if c.is_empty() {
                        "NaN".to_string()
                    } else if c.contains(char::is_whitespace) {
                        format!("\"{c}\"")
                    } else {
                        c
                    }
                })
                .collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn render(&self, plotdata: bool) -> Result<String> {
        if plotdata {
            Ok(self.to_plotdata())
        } else {
            self.to_csv()
        }
    }
}

/// `%.17g`-style formatting: plain decimal for exponents in `[-5, 17)`, scientific
/// otherwise, trailing zeros removed.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// JSON sidecar describing a raw grid file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawGridHeader {
    pub file: String,
    pub dtype: &'static str,
    /// `[nx, ny]`; values are stored with `x` varying fastest.
    pub dims: [usize; 2],
    pub spacing: f64,
    pub origin: [f64; 2],
}

/// Writes `values` as little-endian `f64` to `<stem>.f64` and the header to `<stem>.json`.
pub fn write_raw_grid(
    dir: &Path,
    stem: &str,
    values: &[f64],
    dims: [usize; 2],
    spacing: f64,
    origin: [f64; 2],
) -> Result<()> {
    assert_eq!(
        values.len(),
        dims[0] * dims[1],
        "grid dims do not match the data"
    );
    let bin = dir.join(format!("{stem}.f64"));
    let file = File::create(&bin).map_err(|e| Error::io(&bin, e))?;
    let mut w = BufWriter::new(file);
    for v in values {
        w.write_all(&v.to_le_bytes())
            .map_err(|e| Error::io(&bin, e))?;
    }
    w.flush().map_err(|e| Error::io(&bin, e))?;
    write_json(
        &dir.join(format!("{stem}.json")),
        &RawGridHeader {
            file: format!("{stem}.f64"),
            dtype: "float64-le",
            dims,
            spacing,
            origin,
        },
    )
}

pub fn read_raw_grid(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

/// Run record written next to every set of artifacts. Only `created_unix` varies
/// between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub version: &'static str,
    pub command: String,
    /// Resolved configuration; re-run with `--config <dir>/config.conf`.
    pub config_file: String,
    pub config: String,
    pub artifacts: Vec<String>,
    pub created_unix: u64,
}

/// Writes `config.conf` and `manifest.json` into `dir`.
pub fn write_manifest(
    dir: &Path,
    command: &str,
    config_text: &str,
    artifacts: &[PathBuf],
) -> Result<()> {
    write_text(&dir.join("config.conf"), config_text)?;
    let created_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let manifest = Manifest {
        version: crate::VERSION,
        command: command.to_string(),
        config_file: "config.conf".into(),
        config: config_text.to_string(),
        artifacts: artifacts
            .iter()
            .map(|p| {
                p.file_name()
                    .map_or_else(String::new, |n| n.to_string_lossy().into_owned())
            })
            .collect(),
        created_unix,
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(format_float(0.1), "0.10000000000000001");
        assert_eq!(format_float(1.0), "1");
        assert_eq!(format_float(-2.5), "-2.5");
        assert_eq!(format_float(1e-7), "9.9999999999999995e-8");
        assert_eq!(format_float(1e300), "1.0000000000000001e300");
        assert_eq!(format_float(0.0), "0");
    }

    proptest! {
        #[test]
        fn floats_round_trip(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            let back: f64 = format_float(x).parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn ragged_rows_pad_with_empty_fields() {
        let mut t = Table::new(["k1l", "k2l", "omega_1", "omega_2"]);
        t.push(vec![0.0.into(), 0.5.into(), 1.0.into(), 2.0.into()]);
        t.push(vec![0.0.into(), 1.0.into(), 1.5.into()]);
        let csv = t.to_csv().unwrap();
        assert_eq!(csv, "k1l,k2l,omega_1,omega_2\n0,0.5,1,2\n0,1,1.5,\n");
        assert!(t.to_plotdata().ends_with("0 1 1.5 NaN\n"));
    }

    #[test]
    fn header_is_always_present() {
        let t = Table::new(["a", "b"]);
        assert_eq!(t.to_csv().unwrap(), "a,b\n");
        assert_eq!(t.to_plotdata(), "# a b\n");
    }

    #[test]
    fn raw_grid_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let values = vec![0.1, -3.0, f64::MAX, 1e-300, 2.0, 7.5];
        write_raw_grid(dir.path(), "amp", &values, [3, 2], 0.25, [0.0, -1.0]).unwrap();
        assert_eq!(read_raw_grid(&dir.path().join("amp.f64")).unwrap(), values);
        let header: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("amp.json")).unwrap())
                .unwrap();
        assert_eq!(header["dims"], serde_json::json!([3, 2]));
        assert_eq!(header["dtype"], "float64-le");
    }

    #[test]
    fn io_errors_name_the_path() {
        let err = write_text(Path::new("/nonexistent-dir/x.csv"), "a").unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }
}

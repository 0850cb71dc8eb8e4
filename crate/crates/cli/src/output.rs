//! CSV tables with 12 significant digits and their JSON sidecars.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_significant(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Bool(b) => b.to_string(),
        }
    }
}

/// `%.12g`-style rendering: 12 significant digits, trailing zeros dropped,
/// scientific notation outside `[1e-5, 1e12)`.
pub fn format_significant(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_fraction(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_fraction(mantissa))
    }
}

fn trim_fraction(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Result of one experiment: a table plus a free-form summary for the sidecar.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: serde_json::Value,
}

impl Artifact {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    config: &'a ExperimentConfig,
    version: &'static str,
    seed: u64,
    wall_time_s: f64,
    summary: &'a serde_json::Value,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

/// Writes `<out>` and `<out>.json`.
pub fn write_files(artifact: &Artifact, config: &ExperimentConfig, seed: u64, wall_time_s: f64, out: &Path) -> Result<(), CliError> {
    artifact.write_csv(std::fs::File::create(out)?)?;
    let sidecar = Sidecar {
        config,
        version: env!("CARGO_PKG_VERSION"),
        seed,
        wall_time_s,
        summary: &artifact.summary,
    };
    let text = serde_json::to_string_pretty(&sidecar).map_err(|e| CliError::Verification(e.to_string()))?;
    std::fs::write(sidecar_path(out), text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_significant(0.0), "0");
        assert_eq!(format_significant(1.0), "1");
        assert_eq!(format_significant(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_significant(2.0 / 3.0 * 1e6), "666666.666667");
        assert_eq!(format_significant(-1.5), "-1.5");
        assert_eq!(format_significant(1.234e-7), "1.234e-7");
        assert_eq!(format_significant(6.02214076e23), "6.02214076e23");
        assert_eq!(format_significant(128.0), "128");
    }

    #[test]
    fn csv_layout() {
        let a = Artifact {
            header: vec!["x", "n", "ok"],
            rows: vec![vec![Cell::Num(0.5), Cell::Int(3), Cell::Bool(true)]],
            summary: serde_json::Value::Null,
        };
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,n,ok\n0.5,3,true\n");
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar_path(Path::new("out/a.csv")), PathBuf::from("out/a.csv.json"));
    }
}

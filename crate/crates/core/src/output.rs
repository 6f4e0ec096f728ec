//! CSV writers and readers for maps, scans and spectra.
//!
//! Numbers use Rust's `{:e}` formatting with nine significant digits, which is
//! locale independent and always uses a period as the decimal separator.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use crate::error::{Error, Result};
use crate::oracle::TrajectoryRun;
use crate::regression::CorrelationMap;
use crate::scan::{ScanResult, Spectrum};
use crate::units::UnitContext;

pub const DEFAULT_SIGNIFICANT_DIGITS: usize = 9;

/// Formats `v` in scientific notation with `digits` significant digits.
pub fn format_sig(v: f64, digits: usize) -> String {
    format!("{:.*e}", digits.max(1) - 1, v)
}

/// Comment lines written at the top of every output file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Header {
    pub config_hash: String,
    pub entries: Vec<(String, String)>,
}

impl Header {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Self { config_hash: config_hash.into(), entries: Vec::new() }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.entries.push((key.into(), value.into()));
        self
    }

    fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        writeln!(w, "# config_hash={}", self.config_hash)?;
        for (k, v) in &self.entries {
            writeln!(w, "# {k}={v}")?;
        }
        Ok(())
    }
}

/// Writes a map as `t1_fs,t2_fs,value`, `t₁`-major.
pub fn write_map_csv(w: &mut impl Write, map: &CorrelationMap, header: &Header, digits: usize) -> io::Result<()> {
    let u = UnitContext::default();
    header.write_to(w)?;
    writeln!(w, "t1_fs,t2_fs,value")?;
    let mut line = String::new();
    for (i, j, v) in map.iter() {
        line.clear();
        let _ = write!(
            line,
            "{},{},{}",
            format_sig(u.time_au_to_fs(map.grid.time(i)), digits),
            format_sig(u.time_au_to_fs(map.grid.time(j)), digits),
            format_sig(v, digits)
        );
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Writes a scan as `T_fs,c_Hz,f_Hz`.
pub fn write_scan_csv(w: &mut impl Write, scan: &ScanResult, header: &Header, digits: usize) -> io::Result<()> {
    let u = UnitContext::default();
    header.write_to(w)?;
    writeln!(w, "T_fs,c_Hz,f_Hz")?;
    for p in &scan.points {
        writeln!(
            w,
            "{},{},{}",
            format_sig(u.time_au_to_fs(p.delay), digits),
            format_sig(p.coincidence, digits),
            format_sig(p.fluorescence, digits)
        )?;
    }
    Ok(())
}

/// Writes a spectrum as `omega_au,omega_eV,magnitude`.
pub fn write_spectrum_csv(w: &mut impl Write, s: &Spectrum, header: &Header, digits: usize) -> io::Result<()> {
    let u = UnitContext::default();
    header.write_to(w)?;
    writeln!(w, "omega_au,omega_eV,magnitude")?;
    for (om, m) in s.omega.iter().zip(&s.magnitude) {
        writeln!(
            w,
            "{},{},{}",
            format_sig(*om, digits),
            format_sig(u.energy_au_to_ev(*om), digits),
            format_sig(*m, digits)
        )?;
    }
    Ok(())
}

/// Writes click records as `trajectory_id,time_fs,channel_id`.
pub fn write_clicks_csv(w: &mut impl Write, run: &TrajectoryRun, header: &Header, digits: usize) -> io::Result<()> {
    let u = UnitContext::default();
    header.write_to(w)?;
    writeln!(w, "trajectory_id,time_fs,channel_id")?;
    for (id, rec) in run.records.iter().enumerate() {
        for c in rec {
            writeln!(w, "{id},{},{}", format_sig(u.time_au_to_fs(c.time), digits), c.channel)?;
        }
    }
    Ok(())
}

/// A scan read back from CSV; delays in a.u., rates in s⁻¹.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScanTable {
    pub delays: Vec<f64>,
    pub coincidence: Vec<f64>,
    pub fluorescence: Vec<f64>,
    pub comments: Vec<String>,
}

pub fn read_scan_csv(r: impl BufRead) -> Result<ScanTable> {
    let u = UnitContext::default();
    let mut table = ScanTable::default();
    let mut seen_header = false;
    for (lineno, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::InvalidParameter(format!("reading scan CSV: {e}")))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            table.comments.push(c.trim().to_string());
            continue;
        }
        if !seen_header {
            if line != "T_fs,c_Hz,f_Hz" {
                return Err(Error::InvalidParameter(format!("unexpected scan CSV header `{line}`")));
            }
            seen_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("line {}: bad number `{s}`", lineno + 1)))
        };
        if fields.len() != 3 {
            return Err(Error::InvalidParameter(format!("line {}: expected 3 columns", lineno + 1)));
        }
        table.delays.push(u.time_fs_to_au(parse(fields[0])?));
        table.coincidence.push(parse(fields[1])?);
        table.fluorescence.push(parse(fields[2])?);
    }
    if !seen_header {
        return Err(Error::InvalidParameter("scan CSV has no header line".into()));
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_sig(1.0, 9), "1.00000000e0");
        assert_eq!(format_sig(-1.23456789012e-5, 9), "-1.23456789e-5");
        assert_eq!(format_sig(0.0, 9), "0.00000000e0");
        assert_eq!(format_sig(123456.0, 3), "1.23e5");
    }

    #[test]
    fn scan_table_parses_and_rejects() {
        let text = "# config_hash=abc\nT_fs,c_Hz,f_Hz\n0.00000000e0,1.0e5,2.0e6\n2.50000000e-1,1.1e5,2.0e6\n";
        let t = read_scan_csv(text.as_bytes()).unwrap();
        assert_eq!(t.coincidence, vec![1.0e5, 1.1e5]);
        assert_eq!(t.comments, vec!["config_hash=abc"]);
        assert!((UnitContext::default().time_au_to_fs(t.delays[1]) - 0.25).abs() < 1e-12);
        assert!(read_scan_csv("a,b,c\n1,2,3\n".as_bytes()).is_err());
        assert!(read_scan_csv("T_fs,c_Hz,f_Hz\n1,2\n".as_bytes()).is_err());
    }
}

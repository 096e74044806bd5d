//! Report envelopes and CSV helpers.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::linalg::C64;

/// Provenance block embedded in every report.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_sha256: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    /// Acceptance limit for `value`, when the check is a threshold test.
    pub threshold: Option<f64>,
    pub pass: bool,
    pub details: serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub header: Header,
    pub dim: usize,
    pub horizon: f64,
    pub subdivision: Vec<f64>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Locale-free real number with exact round trip.
pub fn real(x: f64) -> String {
    format!("{x:e}")
}

/// Complex number as `re+imi`.
pub fn complex(z: C64) -> String {
    format!("{:e}{:+e}i", z.re, z.im)
}

pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            text: format!("{}\n", columns.join(",")),
        }
    }

    pub fn row(&mut self, cells: impl IntoIterator<Item = String>) {
        let cells: Vec<String> = cells.into_iter().collect();
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, &self.text)?;
        Ok(())
    }
}

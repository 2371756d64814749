use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(CliError::Config(format!("unknown format `{other}` (json|csv)"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Csv => "csv",
        })
    }
}

/// Discretization, tolerances and output settings shared by every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub l_max: usize,
    pub n_theta: usize,
    pub n_phi: usize,
    pub tol_el: f64,
    pub tol_c: f64,
    /// Slack allowed on fuzzed inequality margins.
    pub tol_report: f64,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            l_max: 24,
            n_theta: 48,
            n_phi: 96,
            tol_el: 1e-8,
            tol_c: 1e-10,
            tol_report: 1e-6,
            seed: 0,
            output_path: None,
            format: Format::Json,
        }
    }
}

/// Parses `48x96` into `(48, 96)`.
pub fn parse_grid(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Config(format!("grid must look like 48x96, got `{s}`"));
    let (a, b) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

/// Parses a decimal or a fraction such as `2/3`.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| format!("bad numerator in `{s}`"))?;
            let q: f64 = q.trim().parse().map_err(|_| format!("bad denominator in `{s}`"))?;
            p / q
        }
        None => s.parse().map_err(|_| format!("not a number: `{s}`"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("not a finite number: `{s}`"))
    }
}

fn parse_tol(key: &str, v: &str) -> Result<f64, CliError> {
    parse_real(v).map_err(|e| CliError::Config(format!("{key}: {e}")))
}

fn parse_int<T: FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim().parse().map_err(|_| CliError::Config(format!("{key}: not an integer: `{v}`")))
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key.trim() {
            "lmax" | "l_max" => self.l_max = parse_int(key, value)?,
            "n_theta" => self.n_theta = parse_int(key, value)?,
            "n_phi" => self.n_phi = parse_int(key, value)?,
            "grid" => (self.n_theta, self.n_phi) = parse_grid(value)?,
            "tol_el" => self.tol_el = parse_tol(key, value)?,
            "tol_c" => self.tol_c = parse_tol(key, value)?,
            "tol_report" => self.tol_report = parse_tol(key, value)?,
            "seed" => self.seed = parse_int(key, value)?,
            "out" | "output_path" => self.output_path = Some(PathBuf::from(value.trim())),
            "format" => self.format = value.parse()?,
            other => return Err(CliError::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Reads `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_file_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        self.apply_file_text(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.l_max == 0 {
            return Err(CliError::Config("lmax must be positive".into()));
        }
        if self.n_theta < self.l_max {
            return Err(CliError::Config(format!(
                "n_theta = {} is below lmax = {}; the transform would alias",
                self.n_theta, self.l_max
            )));
        }
        if self.n_phi < 2 * self.l_max + 1 {
            return Err(CliError::Config(format!("n_phi = {} must be at least 2·lmax + 1", self.n_phi)));
        }
        for (name, t) in [("tol_el", self.tol_el), ("tol_c", self.tol_c), ("tol_report", self.tol_report)] {
            if !(t > 0.0) || !t.is_finite() {
                return Err(CliError::Config(format!("{name} must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

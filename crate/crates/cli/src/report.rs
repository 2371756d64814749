use std::io;
use std::time::Instant;

use serde::ser::Serialize;
use serde::{Deserialize, Serialize as SerializeDerive};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::config::RunConfig;

/// How a measured value is compared with its expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, SerializeDerive, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    /// `|measured − expected| ≤ tolerance`.
    Eq,
    /// `measured ≥ expected − tolerance`.
    Ge,
    /// `measured ≤ expected + tolerance`.
    Le,
    /// Recorded for reference, always passes.
    Info,
}

#[derive(Debug, Clone, PartialEq, SerializeDerive, Deserialize)]
pub struct Record {
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub pass: bool,
}

impl Record {
    pub fn new(name: impl Into<String>, measured: f64, expected: f64, tolerance: f64, relation: Relation) -> Self {
        let pass = match relation {
            Relation::Eq => (measured - expected).abs() <= tolerance,
            Relation::Ge => measured >= expected - tolerance,
            Relation::Le => measured <= expected + tolerance,
            Relation::Info => true,
        };
        Self { name: name.into(), measured, expected, tolerance, relation, pass }
    }

    pub fn eq(name: impl Into<String>, measured: f64, expected: f64, tol: f64) -> Self {
        Self::new(name, measured, expected, tol, Relation::Eq)
    }

    pub fn ge(name: impl Into<String>, measured: f64, bound: f64, tol: f64) -> Self {
        Self::new(name, measured, bound, tol, Relation::Ge)
    }

    pub fn le(name: impl Into<String>, measured: f64, bound: f64, tol: f64) -> Self {
        Self::new(name, measured, bound, tol, Relation::Le)
    }

    pub fn info(name: impl Into<String>, measured: f64) -> Self {
        Self::new(name, measured, f64::NAN, 0.0, Relation::Info)
    }

    /// A yes/no outcome stored as `1`/`0` against an expectation of `1`.
    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self::new(name, if ok { 1.0 } else { 0.0 }, 1.0, 0.0, Relation::Eq)
    }
}

#[derive(Debug, Clone, PartialEq, SerializeDerive, Deserialize)]
pub struct Report {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    /// Command-specific inputs such as the `a` list.
    pub params: serde_json::Value,
    pub records: Vec<Record>,
    pub pass: bool,
    pub wall_time: f64,
}

impl Report {
    pub fn new(command: &str, config: &RunConfig, params: serde_json::Value, records: Vec<Record>, started: Instant) -> Self {
        let pass = records.iter().all(|r| r.pass);
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            params,
            records,
            pass,
            wall_time: started.elapsed().as_secs_f64(),
        }
    }

    pub fn n_failed(&self) -> usize {
        self.records.iter().filter(|r| !r.pass).count()
    }

    pub fn to_json(&self) -> String {
        to_json_17(self)
    }

    pub fn records_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["name", "measured", "expected", "tolerance", "relation", "pass"])?;
        for r in &self.records {
            w.write_record([
                r.name.clone(),
                fmt17(r.measured),
                fmt17(r.expected),
                fmt17(r.tolerance),
                serde_json::to_value(r.relation).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(),
                r.pass.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// 17 significant digits in exponent form.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

struct SigDigits<'a>(PrettyFormatter<'a>);

impl Formatter for SigDigits<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt17(v).as_bytes())
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty JSON with every float written to 17 significant digits; non-finite
/// values become `null`.
pub fn to_json_17<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigits(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("report values serialize");
    buf.push(b'\n');
    String::from_utf8(buf).expect("json output is utf-8")
}

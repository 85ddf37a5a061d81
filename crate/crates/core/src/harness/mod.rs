//! Experiment specs, table and figure generators, and the acceptance checks.
//!
//! Every generator returns a [`Table`]: named columns, rows of JSON values,
//! the resolved spec that produced it, and the pass/fail checks it ran.
//! Tables print as CSV (with `#` metadata lines) or as one JSON document.
//! Nothing in the output depends on wall-clock time.

pub mod acceptance;
mod published;
mod tables;

use std::fmt;
use std::io::{self, Write};
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::sim::SimConfig;

pub use published::{published, Published, Table2Cell, Table3Row};
pub use tables::{cmd_fig5, cmd_fig6, cmd_params, cmd_simulate, cmd_table2, cmd_table3, run_spec};

/// Version stamp embedded in every artifact.
pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), "/", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format `{s}`, expected csv or json")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Params,
    Table2,
    Table3,
    Fig5,
    Fig6,
    Simulate,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExperimentKind::Params => "params",
            ExperimentKind::Table2 => "table2",
            ExperimentKind::Table3 => "table3",
            ExperimentKind::Fig5 => "fig5",
            ExperimentKind::Fig6 => "fig6",
            ExperimentKind::Simulate => "simulate",
        };
        f.write_str(s)
    }
}

/// Parameter axes. Empty axes are filled with the kind's defaults by
/// [`ExperimentSpec::resolved`]; axes a kind does not use are ignored.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub alpha: Vec<f64>,
    /// Confirmation depths.
    pub k: Vec<u32>,
    /// Network delay bounds in seconds.
    pub delta: Vec<f64>,
    /// Fractions of offline honest voters.
    pub gamma_off: Vec<f64>,
    /// Share of honest power mining on the adversary's block in a tie.
    pub gamma_tie: Vec<f64>,
    pub window: Vec<u32>,
    pub committee: Vec<u32>,
    /// Committee failure probabilities.
    pub epsilon: Vec<f64>,
    /// Withheld run lengths.
    pub l: Vec<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// Where to write the table; standard output when absent.
    pub path: Option<PathBuf>,
    pub format: Format,
    /// Directory for per-run JSONL traces (`simulate` only).
    pub traces: Option<PathBuf>,
}

/// One experiment, as read from a TOML spec file.
///
/// ```toml
/// kind = "table3"
/// seed = 7
/// trials = 1000000
///
/// [grid]
/// alpha = [0.1, 0.3]
/// k = [2, 6]
/// delta = [0.0]
///
/// [output]
/// path = "table3.csv"
/// format = "csv"
/// ```
///
/// `simulate` specs also take a `[sim]` table with any [`SimConfig`]
/// field; its `alpha` and `delta` are overridden by the grid when given,
/// and `runs` seeds are drawn per grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    /// Monte Carlo trials (or blocks) per cell; zero means the kind's default.
    #[serde(default)]
    pub trials: u64,
    #[serde(default)]
    pub grid: Grid,
    /// Seeds per grid cell for `simulate`.
    #[serde(default = "one")]
    pub runs: u32,
    #[serde(default)]
    pub sim: Option<SimConfig>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("spec is not valid TOML: {0}")]
    Syntax(String),
    #[error("{path}: {message}")]
    Field { path: String, message: String },
    #[error("grid axis `{0}` is empty")]
    EmptyAxis(&'static str),
    #[error("grid axis `{axis}` has out-of-range value {value}")]
    OutOfRange { axis: &'static str, value: f64 },
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("runs must be at least 1")]
    NoRuns,
    #[error("sim config: {0}")]
    Sim(#[from] crate::sim::ConfigError),
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentSpec {
            kind,
            seed: 0,
            trials: 0,
            grid: Grid::default(),
            runs: 1,
            sim: None,
            output: OutputSpec::default(),
        }
    }

    /// Parses a TOML spec, reporting the offending field path on error.
    pub fn from_toml(text: &str) -> Result<Self, SpecError> {
        let de = toml::Deserializer::parse(text).map_err(|e| SpecError::Syntax(e.to_string()))?;
        let spec: ExperimentSpec = serde_path_to_error::deserialize(de).map_err(|e| SpecError::Field {
            path: e.path().to_string(),
            message: e.inner().message().to_string(),
        })?;
        Ok(spec)
    }

    /// Default trials per cell for this kind.
    pub fn default_trials(kind: ExperimentKind) -> u64 {
        match kind {
            ExperimentKind::Params | ExperimentKind::Simulate => 1,
            ExperimentKind::Table2 | ExperimentKind::Table3 | ExperimentKind::Fig5 | ExperimentKind::Fig6 => 1_000_000,
        }
    }

    /// Fills every empty axis the kind uses and validates the result.
    pub fn resolved(&self) -> Result<Self, SpecError> {
        let mut s = self.clone();
        let g = &mut s.grid;
        let fill_f = |axis: &mut Vec<f64>, d: &[f64]| {
            if axis.is_empty() {
                *axis = d.to_vec();
            }
        };
        let fill_u = |axis: &mut Vec<u32>, d: &[u32]| {
            if axis.is_empty() {
                *axis = d.to_vec();
            }
        };
        let steps = |n: u32, step: f64| (0..=n).map(|i| (i as f64 * step * 1e6).round() / 1e6).collect::<Vec<_>>();
        match s.kind {
            ExperimentKind::Params => {
                fill_f(&mut g.alpha, &steps(8, 0.05)[1..]);
                fill_u(&mut g.window, &[1008, 2016, 3024, 4032]);
                fill_f(&mut g.epsilon, &[1e-4]);
            }
            ExperimentKind::Table2 => {
                fill_f(&mut g.epsilon, &[1e-2, 1e-3, 1e-4]);
                fill_u(&mut g.l, &[2, 3]);
            }
            ExperimentKind::Table3 => {
                fill_f(&mut g.alpha, &[0.1, 0.2, 0.3, 0.4, 0.45]);
                fill_u(&mut g.k, &[2, 4, 6, 8]);
                fill_f(&mut g.delta, &[0.0]);
            }
            ExperimentKind::Fig5 => {
                fill_f(&mut g.alpha, &steps(9, 0.05));
                fill_f(&mut g.gamma_tie, &[0.5]);
                fill_f(&mut g.delta, &[0.0]);
            }
            ExperimentKind::Fig6 => {
                fill_f(&mut g.gamma_off, &steps(10, 0.02));
                fill_f(&mut g.alpha, &[0.35]);
                fill_u(&mut g.window, &[3024]);
                fill_u(&mut g.committee, &[500]);
            }
            ExperimentKind::Simulate => {
                let base = s.sim.get_or_insert_with(SimConfig::default);
                fill_f(&mut g.alpha, &[base.alpha]);
                fill_f(&mut g.delta, &[base.delta]);
            }
        }
        if s.trials == 0 {
            s.trials = Self::default_trials(s.kind);
        }
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<(), SpecError> {
        let g = &self.grid;
        let check = |axis: &'static str, v: &[f64], ok: &dyn Fn(f64) -> bool| -> Result<(), SpecError> {
            match v.iter().find(|x| !ok(**x)) {
                Some(&value) => Err(SpecError::OutOfRange { axis, value }),
                None => Ok(()),
            }
        };
        let nonempty = |axis: &'static str, len: usize| if len == 0 { Err(SpecError::EmptyAxis(axis)) } else { Ok(()) };
        match self.kind {
            ExperimentKind::Params => {
                nonempty("alpha", g.alpha.len())?;
                nonempty("window", g.window.len())?;
                nonempty("epsilon", g.epsilon.len())?;
            }
            ExperimentKind::Table2 => {
                nonempty("epsilon", g.epsilon.len())?;
                nonempty("l", g.l.len())?;
            }
            ExperimentKind::Table3 => {
                nonempty("alpha", g.alpha.len())?;
                nonempty("k", g.k.len())?;
                nonempty("delta", g.delta.len())?;
            }
            ExperimentKind::Fig5 => {
                nonempty("alpha", g.alpha.len())?;
                nonempty("gamma_tie", g.gamma_tie.len())?;
            }
            ExperimentKind::Fig6 => {
                nonempty("gamma_off", g.gamma_off.len())?;
                nonempty("window", g.window.len())?;
                nonempty("committee", g.committee.len())?;
            }
            ExperimentKind::Simulate => {
                let base = self.sim.clone().unwrap_or_default();
                for &alpha in &g.alpha {
                    for &delta in &g.delta {
                        SimConfig { alpha, delta, ..base.clone() }.validate()?;
                    }
                }
            }
        }
        check("alpha", &g.alpha, &|a| (0.0..0.5).contains(&a))?;
        check("delta", &g.delta, &|d| d >= 0.0 && d.is_finite())?;
        check("gamma_off", &g.gamma_off, &|x| (0.0..=1.0).contains(&x))?;
        check("gamma_tie", &g.gamma_tie, &|x| (0.0..=1.0).contains(&x))?;
        check("epsilon", &g.epsilon, &|x| (0.0..1.0).contains(&x))?;
        if g.k.contains(&0) {
            return Err(SpecError::OutOfRange { axis: "k", value: 0.0 });
        }
        if g.l.contains(&0) {
            return Err(SpecError::OutOfRange { axis: "l", value: 0.0 });
        }
        if g.window.contains(&0) {
            return Err(SpecError::OutOfRange { axis: "window", value: 0.0 });
        }
        if g.committee.iter().any(|&m| m == 0 || g.window.iter().any(|&w| m > w)) {
            let bad = g.committee.iter().copied().find(|&m| m == 0 || g.window.iter().any(|&w| m > w)).unwrap();
            return Err(SpecError::OutOfRange { axis: "committee", value: bad as f64 });
        }
        if self.trials == 0 {
            return Err(SpecError::NoTrials);
        }
        if self.runs == 0 {
            return Err(SpecError::NoRuns);
        }
        Ok(())
    }
}

/// A named pass/fail outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, detail: detail.into() }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Tabular experiment output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub version: String,
    /// The resolved spec, seed included.
    pub spec: ExperimentSpec,
    /// Free-form notes on methodology (sampling, truncation, conventions).
    pub notes: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub checks: Vec<Check>,
}

impl Table {
    pub fn new(name: impl Into<String>, spec: &ExperimentSpec, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            version: CODE_VERSION.to_string(),
            spec: spec.clone(),
            notes: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Index of a column by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of one column.
    pub fn values(&self, name: &str) -> Vec<&Value> {
        let i = self.column(name).unwrap_or_else(|| panic!("no column {name}"));
        self.rows.iter().map(|r| &r[i]).collect()
    }

    pub fn write<W: Write>(&self, format: Format, mut w: W) -> io::Result<()> {
        match format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut w, self)?;
                writeln!(w)
            }
            Format::Csv => {
                writeln!(w, "# table: {}", self.name)?;
                writeln!(w, "# version: {}", self.version)?;
                writeln!(w, "# spec: {}", serde_json::to_string(&self.spec)?)?;
                for n in &self.notes {
                    writeln!(w, "# note: {n}")?;
                }
                for c in &self.checks {
                    writeln!(w, "# check: {c}")?;
                }
                let mut csv = csv::Writer::from_writer(w);
                csv.write_record(&self.columns)?;
                for row in &self.rows {
                    csv.write_record(row.iter().map(cell_text))?;
                }
                csv.flush()
            }
        }
    }

    pub fn to_string(&self, format: Format) -> String {
        let mut buf = Vec::new();
        self.write(format, &mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8 output")
    }
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// JSON number or null for non-finite values.
pub(crate) fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

//! Reproducible experiments behind a common trait, selected by name.
//!
//! Each run writes, into the output directory:
//! - `<name>_<table>.csv` and a `<name>_<table>.json` mirror per data table,
//! - `<name>.report.json` with the measured values and verdict,
//! - `<name>.elements.json` when element dumps are requested.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

mod circle;
mod gram;
mod metric;
mod norm;
mod oracle;
pub mod report;
mod slices;

pub use report::{emit_report, write_report};

pub const REPORT_SUFFIX: &str = ".report.json";
pub const OUT_DIR_ENV: &str = "KSPACE_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "results";

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown experiment '{0}'")]
    UnknownExperiment(String),
    #[error("no results found in {}", .0.display())]
    NoResults(PathBuf),
    #[error("corrupt report file {}: {detail}", path.display())]
    CorruptReport { path: PathBuf, detail: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Library(#[from] crate::Error),
}

impl ExperimentError {
    /// 2 for bad input (config, missing or corrupt results), 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_)
            | ExperimentError::UnknownExperiment(_)
            | ExperimentError::NoResults(_)
            | ExperimentError::CorruptReport { .. } => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type ExpResult<T> = std::result::Result<T, ExperimentError>;

/// TOML run configuration.
///
/// ```toml
/// experiment = "norm-convergence"   # optional, must match the subcommand
/// seed = 7
/// [params]                          # experiment-specific, unknown keys rejected
/// scales = [1.0, 2.0]
/// [tolerances]
/// closed_form = 1e-10
/// [output]
/// dir = "results"
/// dump_elements = false
/// ```
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: toml::Table,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub dump_elements: bool,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> ExpResult<Self> {
        toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> ExpResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            ExperimentError::Config(m) => {
                ExperimentError::Config(format!("{}: {m}", path.display()))
            }
            other => other,
        })
    }
}

/// Direction of a pass condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtMost,
    AtLeast,
}

impl Bound {
    pub fn accepts(self, value: f64, limit: f64) -> bool {
        match self {
            Bound::AtMost => value <= limit,
            Bound::AtLeast => value >= limit,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Bound::AtMost => "<=",
            Bound::AtLeast => ">=",
        }
    }
}

/// A named pass condition with its default limit.
#[derive(Clone, Copy, Debug)]
pub struct ToleranceSpec {
    pub name: &'static str,
    pub bound: Bound,
    pub default: f64,
}

pub(crate) const fn at_most(name: &'static str, default: f64) -> ToleranceSpec {
    ToleranceSpec {
        name,
        bound: Bound::AtMost,
        default,
    }
}

pub(crate) const fn at_least(name: &'static str, default: f64) -> ToleranceSpec {
    ToleranceSpec {
        name,
        bound: Bound::AtLeast,
        default,
    }
}

/// Harness-measured wall time, checked when an experiment declares it.
pub const RUNTIME: &str = "runtime_s";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub limit: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub passed: bool,
    pub seed: u64,
    pub measurements: Vec<Measurement>,
    pub tolerances: BTreeMap<String, f64>,
    pub params: Value,
    pub wall_time_s: f64,
    pub version: String,
    pub files: Vec<String>,
}

impl ExperimentReport {
    pub fn failures(&self) -> impl Iterator<Item = &Measurement> {
        self.measurements.iter().filter(|m| !m.passed)
    }
}

/// Rows of plot data; cells are JSON numbers or strings.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn cell_text(v: &Value) -> String {
        match v {
            Value::String(s) => s.clone(),
            Value::Null => "NaN".into(),
            other => other.to_string(),
        }
    }

    pub fn to_csv(&self) -> ExpResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| ExperimentError::Config(format!("csv: {e}"));
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Self::cell_text))
                .map_err(csv_err)?;
        }
        w.into_inner()
            .map_err(|e| ExperimentError::Config(format!("csv: {e}")))
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    Value::Object(
                        self.header
                            .iter()
                            .cloned()
                            .zip(row.iter().cloned())
                            .collect(),
                    )
                })
                .collect(),
        )
    }
}

/// JSON number for finite values, `null` otherwise.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn text(s: impl Into<String>) -> Value {
    Value::String(s.into())
}

/// What an experiment hands back to the harness.
#[derive(Debug, Default)]
pub struct Outcome {
    pub values: Vec<(String, f64)>,
    pub tables: Vec<Table>,
    pub elements: BTreeMap<String, Value>,
    pub params: Value,
}

impl Outcome {
    pub fn measure(&mut self, name: &str, value: f64) {
        self.values.push((name.into(), value));
    }

    pub fn dump(&mut self, label: impl Into<String>, value: impl Serialize) {
        if let Ok(v) = serde_json::to_value(value) {
            self.elements.insert(label.into(), v);
        }
    }
}

/// Inputs available to an experiment.
#[derive(Clone, Debug)]
pub struct Context {
    pub seed: u64,
    pub params: toml::Table,
    pub dump_elements: bool,
}

impl Context {
    /// Deserialize the `[params]` table into the experiment's parameter type.
    pub fn params<T: DeserializeOwned>(&self) -> ExpResult<T> {
        toml::Value::Table(self.params.clone())
            .try_into()
            .map_err(|e: toml::de::Error| ExperimentError::Config(format!("params: {e}")))
    }
}

pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn tolerances(&self) -> &'static [ToleranceSpec];
    fn run(&self, ctx: &Context) -> ExpResult<Outcome>;
}

/// Experiments by subcommand name.
pub struct Registry {
    entries: BTreeMap<&'static str, Box<dyn Experiment>>,
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Self {
            entries: BTreeMap::new(),
        };
        r.register(Box::new(norm::NormConvergence));
        r.register(Box::new(metric::MetricRecovery));
        r.register(Box::new(gram::GramInvariance));
        r.register(Box::new(slices::SliceDynamics));
        r.register(Box::new(circle::CircleTopology));
        r.register(Box::new(oracle::OracleCheck));
        r
    }
}

impl Registry {
    pub fn register(&mut self, e: Box<dyn Experiment>) {
        self.entries.insert(e.name(), e);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> ExpResult<&dyn Experiment> {
        self.entries
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| ExperimentError::UnknownExperiment(name.into()))
    }
}

/// Command-line settings layered over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub tolerances: Vec<(String, f64)>,
    pub dump_elements: bool,
}

/// `NAME=VALUE` as given to `--tolerance`.
pub fn parse_tolerance(arg: &str) -> ExpResult<(String, f64)> {
    let (name, value) = arg
        .split_once('=')
        .ok_or_else(|| ExperimentError::Config(format!("tolerance '{arg}' is not NAME=VALUE")))?;
    let v: f64 = value
        .trim()
        .parse()
        .map_err(|_| ExperimentError::Config(format!("tolerance '{arg}': bad number")))?;
    Ok((name.trim().to_string(), v))
}

/// Output directory: flag, then config, then environment, then default.
pub fn resolve_out_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    flag.or(config)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn effective_tolerances(
    exp: &dyn Experiment,
    config: &BTreeMap<String, f64>,
    cli: &[(String, f64)],
) -> ExpResult<BTreeMap<String, f64>> {
    let mut tol: BTreeMap<String, f64> = exp
        .tolerances()
        .iter()
        .map(|t| (t.name.to_string(), t.default))
        .collect();
    for (name, value) in config.iter().chain(cli.iter().map(|(n, v)| (n, v))) {
        match tol.get_mut(name) {
            Some(slot) => *slot = *value,
            None => {
                return Err(ExperimentError::Config(format!(
                    "unknown tolerance '{name}' for {}; known: {}",
                    exp.name(),
                    exp.tolerances()
                        .iter()
                        .map(|t| t.name)
                        .collect::<Vec<_>>()
                        .join(", ")
                )))
            }
        }
    }
    Ok(tol)
}

/// Run one experiment in memory; nothing is written.
pub fn run(
    exp: &dyn Experiment,
    config: &ExperimentConfig,
    overrides: &Overrides,
) -> ExpResult<(ExperimentReport, Outcome)> {
    if let Some(named) = &config.experiment {
        if named != exp.name() {
            return Err(ExperimentError::Config(format!(
                "config is for '{named}', not '{}'",
                exp.name()
            )));
        }
    }
    let tolerances = effective_tolerances(exp, &config.tolerances, &overrides.tolerances)?;
    let ctx = Context {
        seed: overrides.seed.unwrap_or(config.seed),
        params: config.params.clone(),
        dump_elements: overrides.dump_elements || config.output.dump_elements,
    };
    let start = Instant::now();
    let outcome = exp.run(&ctx)?;
    let wall = start.elapsed().as_secs_f64();

    let mut values = outcome.values.clone();
    if tolerances.contains_key(RUNTIME) {
        values.push((RUNTIME.into(), wall));
    }
    let mut measurements = Vec::with_capacity(values.len());
    for spec in exp.tolerances() {
        let limit = tolerances[spec.name];
        let mut seen = false;
        for (name, value) in values.iter().filter(|(n, _)| n == spec.name) {
            seen = true;
            measurements.push(Measurement {
                name: name.clone(),
                value: *value,
                bound: spec.bound,
                limit,
                passed: spec.bound.accepts(*value, limit),
            });
        }
        if !seen {
            measurements.push(Measurement {
                name: spec.name.into(),
                value: f64::NAN,
                bound: spec.bound,
                limit,
                passed: false,
            });
        }
    }
    let report = ExperimentReport {
        experiment: exp.name().into(),
        passed: measurements.iter().all(|m| m.passed),
        seed: ctx.seed,
        measurements,
        tolerances,
        params: outcome.params.clone(),
        wall_time_s: wall,
        version: env!("CARGO_PKG_VERSION").into(),
        files: Vec::new(),
    };
    Ok((report, outcome))
}

fn write_file(path: &Path, bytes: &[u8]) -> ExpResult<()> {
    fs::write(path, bytes).map_err(|e| ExperimentError::io(path, e))
}

/// Run an experiment and write its tables, element dump and report.
pub fn run_and_write(
    exp: &dyn Experiment,
    config: &ExperimentConfig,
    overrides: &Overrides,
) -> ExpResult<(ExperimentReport, PathBuf)> {
    let dir = resolve_out_dir(overrides.out_dir.as_deref(), config.output.dir.as_deref());
    let (mut report, outcome) = run(exp, config, overrides)?;
    fs::create_dir_all(&dir).map_err(|e| ExperimentError::io(&dir, e))?;
    let name = exp.name();
    for table in &outcome.tables {
        let stem = format!("{name}_{}", table.name);
        write_file(&dir.join(format!("{stem}.csv")), &table.to_csv()?)?;
        let json = serde_json::to_vec_pretty(&table.to_json()).expect("table serializes");
        write_file(&dir.join(format!("{stem}.json")), &json)?;
        report.files.push(format!("{stem}.csv"));
        report.files.push(format!("{stem}.json"));
    }
    if !outcome.elements.is_empty() {
        let file = format!("{name}.elements.json");
        let json = serde_json::to_vec_pretty(&outcome.elements).expect("elements serialize");
        write_file(&dir.join(&file), &json)?;
        report.files.push(file);
    }
    let path = dir.join(format!("{name}{REPORT_SUFFIX}"));
    let json = serde_json::to_vec_pretty(&report).expect("report serializes");
    write_file(&path, &json)?;
    Ok((report, path))
}

/// Seeded generator shared by all experiments.
pub(crate) fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

/// Largest violation of `v[i] < v[i+1]`, zero for strictly increasing input.
pub(crate) fn monotone_violation(v: &[f64]) -> f64 {
    v.windows(2)
        .map(|w| {
            if w[1] > w[0] {
                0.0
            } else {
                w[0] - w[1] + f64::MIN_POSITIVE
            }
        })
        .fold(0.0, f64::max)
}

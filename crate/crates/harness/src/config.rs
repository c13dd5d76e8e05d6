//! Experiment configuration: a TOML tree with every key optional except the
//! experiment name, dotted-key overrides, and validation against the core types.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use wpi_core::{GridSpec, Symbol};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ValidateSymbol,
    DosFit,
    WpiCheck,
    Nash,
    DecayRun,
    Regimes,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::ValidateSymbol,
        Experiment::DosFit,
        Experiment::WpiCheck,
        Experiment::Nash,
        Experiment::DecayRun,
        Experiment::Regimes,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::ValidateSymbol => "validate-symbol",
            Experiment::DosFit => "dos-fit",
            Experiment::WpiCheck => "wpi-check",
            Experiment::Nash => "nash",
            Experiment::DecayRun => "decay-run",
            Experiment::Regimes => "regimes",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "one")]
    pub d: usize,
    /// Defaults per dimension when absent.
    pub n: Option<usize>,
    #[serde(rename = "L")]
    pub box_len: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { d: 1, n: None, box_len: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Gaussian,
    BandLimited,
    /// Flat band of lattice modes; probes the bare DoS of a symbol.
    Dirichlet,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    #[serde(default = "gaussian")]
    pub kind: FieldKind,
    #[serde(default = "unit")]
    pub sigma: f64,
    #[serde(default = "eight")]
    pub kmax: usize,
    /// Binary field snapshot for `kind = "file"`.
    pub path: Option<PathBuf>,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self { kind: FieldKind::Gaussian, sigma: 1.0, kmax: 8, path: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimesConfig {
    /// Window parameter; defaults to 1 for polynomial symbols, 0.1 otherwise.
    pub eta: Option<f64>,
    /// Start of the slope fit; defaults to `max(t_min, 5 sigma^m)`.
    pub fit_from: Option<f64>,
    /// Checked against the fitted `l2sq` slope when set, else the theoretical rate.
    pub expected_slope: Option<f64>,
    #[serde(default = "slope_tol")]
    pub slope_tolerance: f64,
}

impl Default for TimesConfig {
    fn default() -> Self {
        Self { eta: None, fit_from: None, expected_slope: None, slope_tolerance: slope_tol() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaConfig {
    /// Defaults to `32 lambda_1`, above the sparse lowest lattice shells.
    pub lo: Option<f64>,
    /// Defaults to a quarter of the largest lattice level (at most
    /// `10 / sigma^2` for Gaussian data).
    pub hi: Option<f64>,
    #[serde(default = "forty")]
    pub count: usize,
    /// Checked against the theoretical DoS exponent when set.
    pub alpha_tolerance: Option<f64>,
}

impl Default for LambdaConfig {
    fn default() -> Self {
        Self { lo: None, hi: None, count: 40, alpha_tolerance: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NashConfig {
    /// Random band-limited fields per run.
    #[serde(default = "hundred")]
    pub fields: usize,
    #[serde(default = "sixteen")]
    pub kmax_max: usize,
    #[serde(default = "half")]
    pub sigma_min: f64,
    #[serde(default = "four")]
    pub sigma_max: f64,
    #[serde(default = "fifteen")]
    pub sigma_count: usize,
}

impl Default for NashConfig {
    fn default() -> Self {
        Self { fields: 100, kmax_max: 16, sigma_min: 0.5, sigma_max: 4.0, sigma_count: 15 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    #[serde(default = "budget")]
    pub budget: usize,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self { budget: 4000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimesConfig {
    #[serde(default = "alphas")]
    pub alphas: Vec<f64>,
    /// Values of `beta / (1 + alpha)`.
    #[serde(default = "beta_ratios")]
    pub beta_ratios: Vec<f64>,
    #[serde(default = "unit")]
    pub c2: f64,
    #[serde(default = "unit")]
    pub var0: f64,
    #[serde(default = "unit")]
    pub nx_sq: f64,
    #[serde(default = "unit")]
    pub c1: f64,
    #[serde(default = "t_end")]
    pub t_max: f64,
    #[serde(default = "slope_tol_regimes")]
    pub slope_tolerance: f64,
}

impl Default for RegimesConfig {
    fn default() -> Self {
        Self {
            alphas: alphas(),
            beta_ratios: beta_ratios(),
            c2: 1.0,
            var0: 1.0,
            nx_sq: 1.0,
            c1: 1.0,
            t_max: t_end(),
            slope_tolerance: slope_tol_regimes(),
        }
    }
}

fn one() -> usize {
    1
}
fn eight() -> usize {
    8
}
fn sixteen() -> usize {
    16
}
fn fifteen() -> usize {
    15
}
fn forty() -> usize {
    40
}
fn hundred() -> usize {
    100
}
fn budget() -> usize {
    4000
}
fn unit() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn four() -> f64 {
    4.0
}
fn slope_tol() -> f64 {
    0.1
}
fn slope_tol_regimes() -> f64 {
    0.05
}
fn t_end() -> f64 {
    1e6
}
fn alphas() -> Vec<f64> {
    vec![-0.5, 0.0, 0.5, 1.0]
}
fn beta_ratios() -> Vec<f64> {
    vec![0.0, 0.5, 1.0, 2.0]
}
fn gaussian() -> FieldKind {
    FieldKind::Gaussian
}
fn laplacian() -> String {
    "laplacian".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default = "laplacian")]
    pub symbol: String,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub times: TimesConfig,
    #[serde(default)]
    pub lambdas: LambdaConfig,
    #[serde(default)]
    pub nash: NashConfig,
    #[serde(default)]
    pub validate: ValidateConfig,
    #[serde(default)]
    pub regimes: RegimesConfig,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to `runs/<experiment>`.
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let table: toml::Table = text.parse().map_err(|e| HarnessError::Config(format!("{e}")))?;
        Self::from_table(table)
    }

    pub fn from_table(table: toml::Table) -> Result<Self, HarnessError> {
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` (or starts from `experiment = name` alone), applies the
    /// `key=value` overrides, and validates.
    pub fn load(experiment: Experiment, path: Option<&Path>, overrides: &[String]) -> Result<Self, HarnessError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", p.display())))?;
                text.parse::<toml::Table>().map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        match table.get("experiment").and_then(|v| v.as_str()) {
            Some(name) if name != experiment.as_str() => {
                return Err(HarnessError::Config(format!("config is for `{name}`, not `{experiment}`")));
            }
            _ => {
                table.insert("experiment".into(), toml::Value::String(experiment.as_str().into()));
            }
        }
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(table)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.grid_spec()?;
        self.symbol()?;
        if self.field.kind == FieldKind::File && self.field.path.is_none() {
            return Err(HarnessError::Config("field.kind = \"file\" needs field.path".into()));
        }
        if !(self.field.sigma > 0.0) {
            return Err(HarnessError::Config(format!("field.sigma must be positive, got {}", self.field.sigma)));
        }
        if let Some(eta) = self.times.eta {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(HarnessError::Config(format!("times.eta must lie in (0, 1], got {eta}")));
            }
        }
        if self.lambdas.count < 5 {
            return Err(HarnessError::Config("lambdas.count must be at least 5".into()));
        }
        if self.nash.sigma_count == 0 || !(self.nash.sigma_min > 0.0 && self.nash.sigma_max >= self.nash.sigma_min) {
            return Err(HarnessError::Config("nash sigma range must be positive and nonempty".into()));
        }
        Ok(())
    }

    /// Grid defaults per dimension; the Nash sweep defaults to `L = 48` so
    /// that Gaussians up to `sigma = 4` fit the box.
    pub fn grid_spec(&self) -> Result<GridSpec, HarnessError> {
        let base = match (self.experiment, self.grid.d) {
            (Experiment::Nash, 1) => GridSpec::new(1, 1024, 48.0)?,
            (Experiment::Nash, 2) => GridSpec::new(2, 512, 48.0)?,
            (Experiment::Nash, 3) => GridSpec::new(3, 128, 48.0)?,
            (_, d) => GridSpec::default_for(d)?,
        };
        Ok(GridSpec::new(self.grid.d, self.grid.n.unwrap_or(base.n()), self.grid.box_len.unwrap_or(base.box_len()))?)
    }

    pub fn symbol(&self) -> Result<Symbol, HarnessError> {
        Ok(Symbol::from_name(&self.symbol, self.grid.d)?)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("runs").join(self.experiment.as_str()))
    }

    /// The config with every default filled in, as TOML.
    pub fn resolved(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }
}

/// Sets `a.b.c = value`, creating tables along the way. The value is read as
/// TOML (`3`, `0.5`, `true`, `[1, 2]`, `"x"`) and falls back to a bare string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), HarnessError> {
    let (key, raw) =
        spec.split_once('=').ok_or_else(|| HarnessError::Config(format!("override `{spec}` is not key=value")))?;
    let value = parse_value(raw.trim());
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(HarnessError::Config(format!("bad override key `{key}`")));
    }
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| HarnessError::Config(format!("override `{key}`: `{part}` is not a table")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

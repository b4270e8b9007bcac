//! Run configuration: schema validation, sweep expansion and typed access.

use std::path::Path;

use jsonschema::{Draft, JSONSchema};
use krylov::closed_forms::spectral_model_sequence;
use krylov::evolve::EvolveConfig;
use krylov::fit::{Weighting, DEFAULT_C_MIN};
use krylov::sequence::LanczosSequence;
use serde::Deserialize;
use serde_json::{Map, Value};
use thiserror::Error;

pub const SCHEMA: &str = include_str!("../../../docs/config.schema.json");

/// One schema violation, located by JSON pointer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub pointer: String,
    pub message: String,
}

impl std::fmt::Display for Issue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let at = if self.pointer.is_empty() { "(root)" } else { &self.pointer };
        write!(f, "{at}: {}", self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config{}:\n{}", point_suffix(.point), join(.issues))]
    Invalid { point: Option<String>, issues: Vec<Issue> },
}

fn point_suffix(point: &Option<String>) -> String {
    point.as_ref().map(|p| format!(" (sweep point {p})")).unwrap_or_default()
}

fn join(issues: &[Issue]) -> String {
    issues.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n")
}

impl ConfigError {
    fn at(pointer: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid { point: None, issues: vec![Issue { pointer: pointer.into(), message: message.into() }] }
    }
}

pub struct Validator {
    schema: JSONSchema,
}

impl Validator {
    pub fn new() -> Self {
        let doc: Value = serde_json::from_str(SCHEMA).expect("bundled schema is valid JSON");
        let schema = JSONSchema::options()
            .with_draft(Draft::Draft7)
            .compile(&doc)
            .expect("bundled schema compiles");
        Validator { schema }
    }

    pub fn check(&self, doc: &Value) -> Result<(), Vec<Issue>> {
        let mut issues: Vec<Issue> = match self.schema.validate(doc) {
            Ok(()) => return Ok(()),
            Err(errors) => errors
                .map(|e| Issue { pointer: e.instance_path.to_string(), message: e.to_string() })
                .collect(),
        };
        issues.sort_by(|a, b| a.pointer.cmp(&b.pointer).then(a.message.cmp(&b.message)));
        issues.dedup();
        Err(issues)
    }
}

impl Default for Validator {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSettings {
    pub dir: Option<String>,
    pub format: Option<Format>,
    pub plot: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSettings {
    pub c_min: f64,
    pub c_max: Option<f64>,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub lnln: bool,
    pub weighting: Weighting,
    pub bound_tol: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            c_min: DEFAULT_C_MIN,
            c_max: None,
            t_min: None,
            t_max: None,
            lnln: false,
            weighting: Weighting::UniformLnC,
            bound_tol: 0.05,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub path: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    ToLanczos,
    ToMoments,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArithmeticSetting {
    Exact,
    Float { bits: u32 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsSettings {
    pub direction: Direction,
    pub values: Vec<Value>,
    #[serde(default)]
    pub squares: bool,
    pub count: Option<usize>,
    #[serde(default = "exact")]
    pub arithmetic: ArithmeticSetting,
}

fn exact() -> ArithmeticSetting {
    ArithmeticSetting::Exact
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WSettings {
    pub depth: usize,
    pub tol: f64,
}

impl Default for WSettings {
    fn default() -> Self {
        WSettings { depth: 1 << 20, tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModesSettings {
    pub width: f64,
    pub omega_max: Option<f64>,
    pub points: usize,
}

impl Default for ModesSettings {
    fn default() -> Self {
        ModesSettings { width: 0.05, omega_max: None, points: 401 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub sequence: Option<Value>,
    #[serde(default)]
    pub evolve: EvolveConfig,
    pub fit: Option<FitSettings>,
    pub sweep: Option<Vec<Axis>>,
    #[serde(default)]
    pub output: OutputSettings,
    pub jobs: Option<usize>,
    pub series: Option<Vec<String>>,
    pub moments: Option<MomentsSettings>,
    #[serde(default)]
    pub wnumber: WSettings,
    #[serde(default)]
    pub modes: ModesSettings,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectralModelSpec {
    #[allow(dead_code)]
    kind: String,
    nu: u32,
    alpha: f64,
    #[serde(default = "default_exact_count")]
    exact_count: usize,
    #[serde(default = "default_tail_window")]
    tail_window: usize,
}

fn default_exact_count() -> usize {
    120
}

fn default_tail_window() -> usize {
    20
}

impl RunConfig {
    /// The Lanczos sequence named by the `sequence` section.
    pub fn build_sequence(&self) -> Result<LanczosSequence, ConfigError> {
        let Some(spec) = &self.sequence else {
            return Err(ConfigError::at("", "this command needs a \"sequence\" section"));
        };
        let seq = if spec.get("kind").and_then(Value::as_str) == Some("spectral_model") {
            let m: SpectralModelSpec = serde_json::from_value(spec.clone())?;
            spectral_model_sequence(m.nu, m.alpha, m.exact_count, m.tail_window)
                .map_err(|e| ConfigError::at("/sequence", e.to_string()))?
        } else {
            serde_json::from_value(spec.clone())?
        };
        seq.validate().map_err(|e| ConfigError::at("/sequence", e.to_string()))?;
        Ok(seq)
    }

    pub fn check_evolve(&self) -> Result<(), ConfigError> {
        self.evolve.validate().map_err(|e| ConfigError::at("/evolve", e.to_string()))
    }
}

/// A configuration with every sweep axis pinned to one value.
#[derive(Debug, Clone)]
pub struct Point {
    pub name: String,
    /// (JSON pointer, value) for each swept parameter.
    pub parameters: Vec<(String, Value)>,
    pub config: RunConfig,
    pub raw: Value,
}

pub fn load(path: &Path) -> Result<Value, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    Ok(serde_json::from_str(&text)?)
}

/// Validates `doc`, expands the sweep into points, and validates each point.
pub fn expand(doc: &Value, validator: &Validator) -> Result<Vec<Point>, ConfigError> {
    validator.check(doc).map_err(|issues| ConfigError::Invalid { point: None, issues })?;
    let base: RunConfig = serde_json::from_value(doc.clone())?;
    let axes = base.sweep.clone().unwrap_or_default();
    let total: usize = axes.iter().map(|a| a.values.len()).product();
    let mut points = Vec::with_capacity(total);
    for index in 0..total {
        let mut raw = doc.clone();
        let mut parameters = Vec::with_capacity(axes.len());
        let mut rest = index;
        // last axis varies fastest
        let mut picks = vec![0; axes.len()];
        for (k, axis) in axes.iter().enumerate().rev() {
            picks[k] = rest % axis.values.len();
            rest /= axis.values.len();
        }
        for (axis, &pick) in axes.iter().zip(&picks) {
            let value = axis.values[pick].clone();
            set_pointer(&mut raw, &axis.path, value.clone())?;
            parameters.push((axis.path.clone(), value));
        }
        let name = if axes.is_empty() { "run".to_string() } else { format!("point-{index:03}") };
        if let Some(map) = raw.as_object_mut() {
            map.remove("sweep");
        }
        validator
            .check(&raw)
            .map_err(|issues| ConfigError::Invalid { point: Some(name.clone()), issues })?;
        let config: RunConfig = serde_json::from_value(raw.clone())?;
        points.push(Point { name, parameters, config, raw });
    }
    Ok(points)
}

fn set_pointer(doc: &mut Value, pointer: &str, value: Value) -> Result<(), ConfigError> {
    let (parent, key) = pointer.rsplit_once('/').expect("schema enforces a leading slash");
    let key = key.replace("~1", "/").replace("~0", "~");
    // sections left at their defaults are created on demand
    let mut target = Some(&mut *doc);
    for seg in parent.split('/').skip(1) {
        let seg = seg.replace("~1", "/").replace("~0", "~");
        target = match target {
            Some(Value::Object(map)) => Some(map.entry(seg).or_insert_with(|| Value::Object(Map::new()))),
            Some(Value::Array(items)) => seg.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        };
    }
    match target {
        Some(Value::Object(map)) => {
            map.insert(key, value);
            Ok(())
        }
        Some(Value::Array(items)) => match key.parse::<usize>() {
            Ok(i) if i < items.len() => {
                items[i] = value;
                Ok(())
            }
            _ => Err(ConfigError::at(pointer, "sweep path indexes past the end of an array")),
        },
        _ => Err(ConfigError::at(pointer, "sweep path does not name a field of the config")),
    }
}

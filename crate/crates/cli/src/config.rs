//! Run configuration: JSON layered as preset, then config file, then
//! `key=value` overrides, deserialized into [`RunConfig`] and validated.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use periwave_core::evolution::Integrator;
use periwave_core::output::to_json_string;
use periwave_core::spectral::SymbolKind;
use periwave_core::waves::{Constraint, Nonlinearity, Variant};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub const PRESETS: &[(&str, &str)] = &[
    ("kdv-cnoidal", include_str!("../presets/kdv-cnoidal.json")),
    ("gkdv-p", include_str!("../presets/gkdv-p.json")),
    ("bo", include_str!("../presets/bo.json")),
    ("ilw", include_str!("../presets/ilw.json")),
    ("regularized-bbm-like", include_str!("../presets/regularized-bbm-like.json")),
];

pub const SCHEMA: &str = include_str!("../schema/run-config.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub equation: Option<EquationConfig>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub solve: Option<SolveConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub evolve: Option<EvolveConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationConfig {
    pub symbol: SymbolKind,
    pub nonlinearity: Nonlinearity,
    #[serde(default)]
    pub variant: Variant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "N")]
    pub nodes: usize,
}

/// Where the first Newton iterate comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GuessSpec {
    /// Closed-form KdV wave with elliptic modulus `k`.
    Cnoidal { k: f64 },
    /// Closed-form ILW wave with elliptic modulus `k`.
    Ilw { k: f64 },
    /// Follow the first-mode branch from the zero state up to `amplitude`.
    Branch {
        amplitude: f64,
        #[serde(default = "default_branch_steps")]
        steps: usize,
    },
    /// `base + amplitude cos(2 pi x / L)` solved at speed `omega`.
    Cosine { omega: f64, base: f64, amplitude: f64 },
}

fn default_branch_steps() -> usize {
    8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(default = "default_constraint")]
    pub constraint: Constraint,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    pub guess: GuessSpec,
}

fn default_constraint() -> Constraint {
    Constraint::ZeroMean
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    40
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    #[serde(rename = "omega")]
    Omega,
    #[serde(rename = "A")]
    A,
    #[serde(rename = "xi")]
    Xi,
}

/// Affine maps `omega = omega[0] + omega[1] xi`, `A = A[0] + A[1] xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XiMap {
    pub omega: [f64; 2],
    #[serde(rename = "A")]
    pub a: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub range: [f64; 2],
    pub count: usize,
    /// Range taken as offsets from the seed wave's parameter.
    #[serde(default)]
    pub relative: bool,
    #[serde(default)]
    pub xi_map: Option<XiMap>,
}

impl SweepConfig {
    pub fn values(&self, origin: f64) -> Vec<f64> {
        let shift = if self.relative { origin } else { 0.0 };
        let [a, b] = self.range;
        if self.count == 1 {
            return vec![shift + a];
        }
        (0..self.count).map(|i| shift + a + (b - a) * i as f64 / (self.count - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(default)]
    pub integrator: Integrator,
    pub amplitudes: Vec<f64>,
    pub seed: u64,
    #[serde(default = "default_kmax")]
    pub kmax: usize,
    #[serde(default)]
    pub dealias: bool,
    #[serde(default = "default_sample_interval")]
    pub sample_interval: f64,
    /// Lyapunov penalty; suggested from the operator when absent.
    #[serde(default)]
    pub sigma: Option<f64>,
    /// `(mu, nu)` of the auxiliary quantity; taken from the verdict when absent.
    #[serde(default)]
    pub mu_nu: Option<[f64; 2]>,
    /// Repeat the first amplitude at dt/2 and dt/4 and log the error ratio.
    #[serde(default)]
    pub convergence_check: bool,
}

fn default_kmax() -> usize {
    8
}

fn default_sample_interval() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: default_directory(), formats: default_formats() }
    }
}

fn default_directory() -> String {
    "periwave-out".into()
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl OutputConfig {
    pub fn csv(&self) -> bool {
        self.formats.contains(&Format::Csv)
    }

    pub fn json(&self) -> bool {
        self.formats.contains(&Format::Json)
    }
}

pub fn preset(name: &str) -> Result<Value> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| anyhow!("unknown preset '{name}' (available: {})", preset_names()))?;
    serde_json::from_str(text).with_context(|| format!("preset '{name}' is not valid JSON"))
}

pub fn preset_names() -> String {
    PRESETS.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
}

/// Recursively overlays `top` on `base`; objects merge, everything else replaces.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Applies `a.b.c=value`; the value is parsed as JSON and kept as a string
/// when that fails.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| anyhow!("override '{spec}' is not of the form key=value"))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        bail!("override key '{path}' has an empty component");
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        if !node.is_object() {
            *node = Value::Object(Map::new());
        }
        node = node.as_object_mut().expect("object").entry(key.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    if !node.is_object() {
        *node = Value::Object(Map::new());
    }
    node.as_object_mut().expect("object").insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Resolves preset, file and overrides into a validated config.
pub fn load(preset_name: Option<&str>, file: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let mut root = match preset_name {
        Some(name) => preset(name)?,
        None => Value::Object(Map::new()),
    };
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let v: Value = serde_json::from_str(&text).with_context(|| format!("config {} is not valid JSON", path.display()))?;
        merge(&mut root, v);
    }
    for o in overrides {
        apply_override(&mut root, o)?;
    }
    let cfg: RunConfig = serde_json::from_value(root).context("config does not match the run-config schema")?;
    cfg.validate()?;
    Ok(cfg)
}

fn positive(x: f64, what: &str) -> Result<()> {
    if !(x.is_finite() && x > 0.0) {
        bail!("{what} must be positive and finite, got {x}");
    }
    Ok(())
}

fn modulus(k: f64) -> Result<()> {
    if !(k > 0.0 && k < 1.0) {
        bail!("solve.guess.k must lie in (0, 1), got {k}");
    }
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(g) = &self.grid {
            positive(g.length, "grid.L")?;
            if g.nodes < 16 || g.nodes % 2 != 0 {
                bail!("grid.N must be even and at least 16, got {}", g.nodes);
            }
        }
        if let Some(eq) = &self.equation {
            match eq.symbol {
                SymbolKind::Ilw { delta } => positive(delta, "equation.symbol.delta")?,
                SymbolKind::Power { order } => positive(order, "equation.symbol.order")?,
                SymbolKind::SecondDerivative | SymbolKind::HilbertDerivative => {}
            }
            if let Nonlinearity::Power { p, c } = eq.nonlinearity {
                if p == 0 {
                    bail!("equation.nonlinearity.p must be at least 1");
                }
                if !(c.is_finite() && c != 0.0) {
                    bail!("equation.nonlinearity.c must be finite and nonzero, got {c}");
                }
            }
        }
        if let Some(s) = &self.solve {
            positive(s.tol, "solve.tol")?;
            if s.max_iter == 0 {
                bail!("solve.max_iter must be at least 1");
            }
            match s.guess {
                GuessSpec::Cnoidal { k } | GuessSpec::Ilw { k } => modulus(k)?,
                GuessSpec::Branch { amplitude, steps } => {
                    if !(amplitude.is_finite() && amplitude != 0.0) || steps == 0 {
                        bail!("solve.guess needs a nonzero amplitude and steps >= 1");
                    }
                }
                GuessSpec::Cosine { omega, base, amplitude } => {
                    if ![omega, base, amplitude].iter().all(|x| x.is_finite()) {
                        bail!("solve.guess values must be finite");
                    }
                }
            }
        }
        if let Some(s) = &self.sweep {
            if s.count == 0 {
                bail!("sweep.count must be at least 1");
            }
            if !s.range.iter().all(|x| x.is_finite()) {
                bail!("sweep.range must be finite");
            }
            if s.parameter == SweepParameter::Xi && s.xi_map.is_none() {
                bail!("sweep.parameter = xi needs sweep.xi_map");
            }
        }
        if let Some(e) = &self.evolve {
            positive(e.dt, "evolve.dt")?;
            positive(e.t_final, "evolve.T")?;
            if e.dt > e.t_final {
                bail!("evolve.dt must not exceed evolve.T");
            }
            positive(e.sample_interval, "evolve.sample_interval")?;
            if e.amplitudes.is_empty() || !e.amplitudes.iter().all(|a| a.is_finite() && *a >= 0.0) {
                bail!("evolve.amplitudes must be a nonempty list of nonnegative numbers");
            }
            if e.kmax == 0 {
                bail!("evolve.kmax must be at least 1");
            }
            if let Some(s) = e.sigma {
                if !(s.is_finite() && s >= 0.0) {
                    bail!("evolve.sigma must be nonnegative, got {s}");
                }
            }
        }
        if self.output.directory.is_empty() {
            bail!("output.directory must not be empty");
        }
        Ok(())
    }

    /// Canonical JSON of the resolved config (defaults filled in).
    pub fn canonical_json(&self) -> String {
        to_json_string(self).expect("config serializes")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

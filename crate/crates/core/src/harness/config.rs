//! Plain-text experiment configuration.
//!
//! One `key = value` per line, grouped under `[section]` headers. `#`
//! starts a comment. Every key must be known; misspellings are errors.
//!
//! ```text
//! [domain]
//! side = 1.0
//! nodes = 33
//!
//! [time]
//! horizon = 0.02
//! steps = 200
//! scheme = incoherent
//!
//! [kernel]
//! family = gaussian
//! sigma = 0.1
//!
//! [coupling]
//! family = plateau
//! value = 50
//!
//! [initial]
//! family = gaussian-packet
//! center = 0.5, 0.5
//! width = 0.1
//! momentum = 10, 0
//! ```

use crate::mesh::Mesh;
use crate::nonlocal::{ConvolutionPath, CouplingField, KernelSpec};
use crate::steppers::{FixedPointMap, SchemeKind};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("line {line}: key `{key}`: {message}")]
    Invalid {
        line: usize,
        key: String,
        message: String,
    },
    #[error("key `{key}`: {message}")]
    Validation { key: String, message: String },
}

/// External potential `v`.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    None,
    /// `k |x - c|²` about the centre `c` of the square, faded out smoothly
    /// within `margin` of the boundary when `margin > 0`.
    Harmonic { k: f64, margin: f64 },
    /// `-depth · exp(-|x - c|² / (2σ²))`.
    GaussianWell { depth: f64, sigma: f64 },
}

impl PotentialSpec {
    pub fn eval(&self, x: f64, y: f64, side: f64) -> f64 {
        let c = 0.5 * side;
        let r2 = (x - c).powi(2) + (y - c).powi(2);
        match *self {
            PotentialSpec::None => 0.0,
            PotentialSpec::Harmonic { k, margin } => {
                let fade = if margin > 0.0 {
                    CouplingField::Plateau { value: 1.0, margin }.eval(x, y, side)
                } else {
                    1.0
                };
                k * r2 * fade
            }
            PotentialSpec::GaussianWell { depth, sigma } => {
                -depth * (-r2 / (2.0 * sigma * sigma)).exp()
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            PotentialSpec::None => true,
            PotentialSpec::Harmonic { k, .. } => *k == 0.0,
            PotentialSpec::GaussianWell { depth, .. } => *depth == 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    Interpolate,
    Ritz,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Eigenmode {
        p: u32,
        q: u32,
        amplitude: f64,
    },
    GaussianPacket {
        center: [f64; 2],
        width: f64,
        momentum: [f64; 2],
        amplitude: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSpec {
    /// Absolute fixed-point tolerance; `None` means `1e-13 √M₀`.
    pub tolerance: Option<f64>,
    pub max_iterations: usize,
    pub guard_ratio: f64,
    pub map: FixedPointMap,
    pub extrapolate: bool,
    pub convolution: ConvolutionPath,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            tolerance: None,
            max_iterations: 200,
            guard_ratio: 1.0,
            map: FixedPointMap::LinearImplicit,
            extrapolate: false,
            convolution: ConvolutionPath::Fft,
        }
    }
}

/// A fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub side: f64,
    /// Nodes per side including the boundary.
    pub nodes: usize,
    pub horizon: f64,
    pub steps: usize,
    pub scheme: SchemeKind,
    pub potential: PotentialSpec,
    pub kernel: KernelSpec,
    pub coupling: CouplingField,
    pub initial: InitialCondition,
    pub projection: Projection,
    pub solver: SolverSpec,
    pub snapshot_stride: usize,
    pub output: PathBuf,
}

impl ProblemSpec {
    pub fn mesh(&self) -> Mesh {
        Mesh::new(self.side, self.nodes).expect("validated")
    }

    pub fn tau(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.horizon / self.steps as f64
        }
    }

    pub fn has_interaction(&self) -> bool {
        !self.kernel.is_zero() && !self.coupling.is_zero()
    }

    /// Linear, potential-free eigenmode problems have a closed-form solution.
    pub fn has_exact_solution(&self) -> bool {
        !self.has_interaction()
            && self.potential.is_zero()
            && matches!(self.initial, InitialCondition::Eigenmode { .. })
    }
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("domain", &["side", "nodes"]),
    ("time", &["horizon", "steps", "scheme"]),
    ("potential", &["family", "k", "margin", "depth", "sigma"]),
    (
        "kernel",
        &["family", "sigma", "radius", "width", "amplitude", "samples"],
    ),
    ("coupling", &["family", "value", "margin"]),
    (
        "initial",
        &[
            "family",
            "p",
            "q",
            "amplitude",
            "center",
            "width",
            "momentum",
            "projection",
        ],
    ),
    (
        "solver",
        &[
            "tolerance",
            "max_iterations",
            "guard_ratio",
            "map",
            "extrapolate",
            "convolution",
        ],
    ),
    ("output", &["directory", "snapshot_stride"]),
];

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

/// Raw `section.key → value` table with line numbers.
#[derive(Debug, Clone, Default)]
struct Table {
    entries: BTreeMap<String, Entry>,
}

fn parse_table(text: &str) -> Result<Table, ConfigError> {
    let mut table = Table::default();
    let mut section: Option<&str> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("unterminated section header `{content}`"),
            })?;
            let name = name.trim();
            let known = SCHEMA.iter().find(|(s, _)| *s == name).ok_or_else(|| {
                ConfigError::Syntax {
                    line,
                    message: format!("unknown section `[{name}]`"),
                }
            })?;
            section = Some(known.0);
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            message: format!("expected `key = value`, found `{content}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        let sec = section.ok_or_else(|| ConfigError::Syntax {
            line,
            message: format!("key `{key}` appears before any [section]"),
        })?;
        let full = format!("{sec}.{key}");
        let allowed = SCHEMA
            .iter()
            .find(|(s, _)| *s == sec)
            .map(|(_, keys)| keys.contains(&key))
            .unwrap_or(false);
        if !allowed {
            return Err(ConfigError::UnknownKey { line, key: full });
        }
        if value.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                message: format!("key `{full}` has no value"),
            });
        }
        if table.entries.contains_key(&full) {
            return Err(ConfigError::DuplicateKey { line, key: full });
        }
        table.entries.insert(
            full,
            Entry {
                line,
                value: value.to_string(),
            },
        );
    }
    Ok(table)
}

trait FromValue: Sized {
    fn from_value(s: &str) -> Result<Self, String>;
}

impl FromValue for f64 {
    fn from_value(s: &str) -> Result<Self, String> {
        let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("`{s}` is not finite"))
        }
    }
}

impl FromValue for usize {
    fn from_value(s: &str) -> Result<Self, String> {
        s.parse()
            .map_err(|_| format!("`{s}` is not a non-negative integer"))
    }
}

impl FromValue for u32 {
    fn from_value(s: &str) -> Result<Self, String> {
        s.parse()
            .map_err(|_| format!("`{s}` is not a non-negative integer"))
    }
}

impl FromValue for bool {
    fn from_value(s: &str) -> Result<Self, String> {
        match s {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(format!("`{s}` is not true or false")),
        }
    }
}

impl FromValue for String {
    fn from_value(s: &str) -> Result<Self, String> {
        Ok(s.to_string())
    }
}

impl FromValue for Vec<f64> {
    fn from_value(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|t| f64::from_value(t.trim()))
            .collect::<Result<Vec<_>, _>>()
    }
}

impl Table {
    fn get<T: FromValue>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => T::from_value(&e.value)
                .map(Some)
                .map_err(|message| ConfigError::Invalid {
                    line: e.line,
                    key: key.to_string(),
                    message,
                }),
        }
    }

    fn require<T: FromValue>(&self, key: &str) -> Result<T, ConfigError> {
        self.get(key)?
            .ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    fn or<T: FromValue>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn invalid(&self, key: &str, message: impl Into<String>) -> ConfigError {
        match self.entries.get(key) {
            Some(e) => ConfigError::Invalid {
                line: e.line,
                key: key.to_string(),
                message: message.into(),
            },
            None => ConfigError::Validation {
                key: key.to_string(),
                message: message.into(),
            },
        }
    }

    fn positive(&self, key: &str, v: f64) -> Result<f64, ConfigError> {
        if v > 0.0 {
            Ok(v)
        } else {
            Err(self.invalid(key, format!("must be positive, got {v}")))
        }
    }

    fn pair(&self, key: &str, default: Option<[f64; 2]>) -> Result<[f64; 2], ConfigError> {
        let v: Option<Vec<f64>> = self.get(key)?;
        match (v, default) {
            (Some(v), _) if v.len() == 2 => Ok([v[0], v[1]]),
            (Some(v), _) => Err(self.invalid(key, format!("expected two values, got {}", v.len()))),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(ConfigError::Missing(key.to_string())),
        }
    }

    /// Rejects keys that are legal in the section but meaningless for the
    /// chosen family.
    fn only(&self, section: &str, family: &str, allowed: &[&str]) -> Result<(), ConfigError> {
        let prefix = format!("{section}.");
        for (key, e) in &self.entries {
            if let Some(k) = key.strip_prefix(&prefix) {
                if k != "family" && !allowed.contains(&k) {
                    return Err(ConfigError::Invalid {
                        line: e.line,
                        key: key.clone(),
                        message: format!("not used by {section} family `{family}`"),
                    });
                }
            }
        }
        Ok(())
    }
}

pub fn parse_config(text: &str, base_dir: &Path) -> Result<ProblemSpec, ConfigError> {
    let t = parse_table(text)?;

    let side = t.positive("domain.side", t.require("domain.side")?)?;
    let nodes: usize = t.require("domain.nodes")?;
    if nodes < 3 {
        return Err(t.invalid("domain.nodes", format!("need at least 3 nodes per side, got {nodes}")));
    }

    let horizon: f64 = t.require("time.horizon")?;
    if horizon < 0.0 {
        return Err(t.invalid("time.horizon", "must be non-negative"));
    }
    let steps: usize = t.require("time.steps")?;
    let scheme: SchemeKind = t
        .or("time.scheme", "coherent".to_string())?
        .parse()
        .map_err(|m: String| t.invalid("time.scheme", m))?;

    let potential = match t.or("potential.family", "none".to_string())?.as_str() {
        "none" => {
            t.only("potential", "none", &[])?;
            PotentialSpec::None
        }
        "harmonic" => {
            t.only("potential", "harmonic", &["k", "margin"])?;
            let margin: f64 = t.or("potential.margin", 0.0)?;
            if margin < 0.0 || 4.0 * margin >= side {
                return Err(t.invalid("potential.margin", "must lie in [0, side/4)"));
            }
            PotentialSpec::Harmonic {
                k: t.require("potential.k")?,
                margin,
            }
        }
        "gaussian-well" => {
            t.only("potential", "gaussian-well", &["depth", "sigma"])?;
            PotentialSpec::GaussianWell {
                depth: t.require("potential.depth")?,
                sigma: t.positive("potential.sigma", t.require("potential.sigma")?)?,
            }
        }
        other => {
            return Err(t.invalid(
                "potential.family",
                format!("unknown family `{other}` (none, harmonic, gaussian-well)"),
            ))
        }
    };

    let kernel = match t.or("kernel.family", "none".to_string())?.as_str() {
        "none" => {
            t.only("kernel", "none", &[])?;
            KernelSpec::None
        }
        "gaussian" => {
            t.only("kernel", "gaussian", &["sigma", "amplitude"])?;
            KernelSpec::Gaussian {
                sigma: t.positive("kernel.sigma", t.require("kernel.sigma")?)?,
                amplitude: t.or("kernel.amplitude", 1.0)?,
            }
        }
        "smoothed-indicator" => {
            t.only("kernel", "smoothed-indicator", &["radius", "width", "amplitude"])?;
            KernelSpec::SmoothedIndicator {
                radius: t.positive("kernel.radius", t.require("kernel.radius")?)?,
                width: t.positive("kernel.width", t.require("kernel.width")?)?,
                amplitude: t.or("kernel.amplitude", 1.0)?,
            }
        }
        "table" => {
            t.only("kernel", "table", &["samples"])?;
            KernelSpec::Table {
                samples: t.require("kernel.samples")?,
            }
        }
        other => {
            return Err(t.invalid(
                "kernel.family",
                format!("unknown family `{other}` (none, gaussian, smoothed-indicator, table)"),
            ))
        }
    };
    if let KernelSpec::Table { .. } = kernel {
        kernel
            .samples(side / (nodes - 1) as f64, nodes)
            .map_err(|e| t.invalid("kernel.samples", e.to_string()))?;
    } else {
        kernel
            .validate()
            .map_err(|e| t.invalid("kernel.family", e.to_string()))?;
    }

    let coupling = match t.or("coupling.family", "constant".to_string())?.as_str() {
        "constant" => {
            t.only("coupling", "constant", &["value"])?;
            CouplingField::Constant(t.or("coupling.value", 0.0)?)
        }
        "plateau" => CouplingField::Plateau {
            value: t.require("coupling.value")?,
            margin: t.or("coupling.margin", 0.1 * side)?,
        },
        other => {
            return Err(t.invalid(
                "coupling.family",
                format!("unknown family `{other}` (constant, plateau)"),
            ))
        }
    };
    coupling
        .validate(side)
        .map_err(|e| t.invalid("coupling.margin", e.to_string()))?;

    let projection = match t.or("initial.projection", "interpolate".to_string())?.as_str() {
        "interpolate" => Projection::Interpolate,
        "ritz" => Projection::Ritz,
        other => {
            return Err(t.invalid(
                "initial.projection",
                format!("unknown projection `{other}` (interpolate, ritz)"),
            ))
        }
    };
    let family: String = t.require("initial.family")?;
    let initial = match family.as_str() {
        "eigenmode" => {
            t.only("initial", "eigenmode", &["p", "q", "amplitude", "projection"])?;
            let p: u32 = t.or("initial.p", 1)?;
            let q: u32 = t.or("initial.q", 1)?;
            if p < 1 {
                return Err(t.invalid("initial.p", "eigenmode indices must be at least 1"));
            }
            if q < 1 {
                return Err(t.invalid("initial.q", "eigenmode indices must be at least 1"));
            }
            InitialCondition::Eigenmode {
                p,
                q,
                amplitude: t.or("initial.amplitude", 1.0)?,
            }
        }
        "gaussian-packet" => {
            t.only(
                "initial",
                "gaussian-packet",
                &["center", "width", "momentum", "amplitude", "projection"],
            )?;
            InitialCondition::GaussianPacket {
                center: t.pair("initial.center", Some([0.5 * side, 0.5 * side]))?,
                width: t.positive("initial.width", t.require("initial.width")?)?,
                momentum: t.pair("initial.momentum", Some([0.0, 0.0]))?,
                amplitude: t.or("initial.amplitude", 1.0)?,
            }
        }
        other => {
            return Err(t.invalid(
                "initial.family",
                format!("unknown family `{other}` (eigenmode, gaussian-packet)"),
            ))
        }
    };

    let defaults = SolverSpec::default();
    let tolerance: Option<f64> = t.get("solver.tolerance")?;
    if let Some(tol) = tolerance {
        t.positive("solver.tolerance", tol)?;
    }
    let max_iterations = t.or("solver.max_iterations", defaults.max_iterations)?;
    if max_iterations < 2 {
        return Err(t.invalid("solver.max_iterations", "must be at least 2"));
    }
    let guard_ratio = t.positive(
        "solver.guard_ratio",
        t.or("solver.guard_ratio", defaults.guard_ratio)?,
    )?;
    let map = match t.or("solver.map", "implicit".to_string())?.as_str() {
        "implicit" => FixedPointMap::LinearImplicit,
        "banach" => FixedPointMap::Banach,
        other => {
            return Err(t.invalid(
                "solver.map",
                format!("unknown map `{other}` (implicit, banach)"),
            ))
        }
    };
    let convolution = match t.or("solver.convolution", "fft".to_string())?.as_str() {
        "fft" => ConvolutionPath::Fft,
        "direct" => ConvolutionPath::Direct,
        other => {
            return Err(t.invalid(
                "solver.convolution",
                format!("unknown path `{other}` (fft, direct)"),
            ))
        }
    };
    let solver = SolverSpec {
        tolerance,
        max_iterations,
        guard_ratio,
        map,
        extrapolate: t.or("solver.extrapolate", false)?,
        convolution,
    };

    let output: String = t.or("output.directory", "output".to_string())?;
    let output = Path::new(&output);
    let output = if output.is_absolute() {
        output.to_path_buf()
    } else {
        base_dir.join(output)
    };

    Ok(ProblemSpec {
        side,
        nodes,
        horizon,
        steps,
        scheme,
        potential,
        kernel,
        coupling,
        initial,
        projection,
        solver,
        snapshot_stride: t.or("output.snapshot_stride", 0)?,
        output,
    })
}

/// Reads and validates a config file. Relative output directories resolve
/// against `HFEM_OUTPUT_ROOT` when set, otherwise against the file's
/// directory.
pub fn load_config(path: &Path) -> Result<ProblemSpec, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = match std::env::var_os(super::OUTPUT_ROOT_ENV) {
        Some(root) => PathBuf::from(root),
        None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    parse_config(&text, &base)
}

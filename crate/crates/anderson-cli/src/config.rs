//! Run configuration: a JSON document, overridden key by key from the
//! command line, checked against a fixed schema before anything runs.

use std::fmt;
use std::path::Path;

use anderson_core::experiments::{BumpConfig, ExperimentConfig};
use anderson_core::renorm::ConstantsMethod;
use anderson_core::{BoundaryCondition, LatticeGrid};
use serde::Serialize;
use serde_json::{Map, Value};

pub const SCHEMA_VERSION: &str = "anderson-config/v1";

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: &str, message: impl Into<String>) -> Self {
        Self { path: path.to_string(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "config error: {}", self.message)
        } else {
            write!(f, "config error at `{}`: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Int,
    Number,
    Bool,
    Text,
    Numbers,
    Points,
    Section(&'static [Field]),
}

type Field = (&'static str, Kind);

const TAIL: &[Field] = &[("x_min", Kind::Number), ("thresholds", Kind::Int)];
const BUMP: &[Field] = &[("wells", Kind::Int), ("depth", Kind::Number), ("centres", Kind::Points)];
const KERNEL: &[Field] = &[("points", Kind::Int), ("levels", Kind::Int), ("order", Kind::Int), ("resolution", Kind::Int)];
const SOLVER: &[Field] = &[("residual_tol", Kind::Number)];
const OUTPUT: &[Field] = &[("dir", Kind::Text), ("plots", Kind::Bool), ("vectors", Kind::Bool), ("matrix", Kind::Bool)];

const ROOT: &[Field] = &[
    ("schema", Kind::Text),
    ("d", Kind::Int),
    ("L", Kind::Number),
    ("N", Kind::Int),
    ("bc", Kind::Text),
    ("eps", Kind::Numbers),
    ("eps_max", Kind::Number),
    ("eps_levels", Kind::Int),
    ("eps_ratio", Kind::Number),
    ("a", Kind::Number),
    ("b", Kind::Number),
    ("replicas", Kind::Int),
    ("seed", Kind::Int),
    ("method", Kind::Text),
    ("k", Kind::Int),
    ("noise", Kind::Bool),
    ("dilation", Kind::Number),
    ("tail", Kind::Section(TAIL)),
    ("bump", Kind::Section(BUMP)),
    ("kernel", Kind::Section(KERNEL)),
    ("solver", Kind::Section(SOLVER)),
    ("output", Kind::Section(OUTPUT)),
];

/// Every accepted key as a dotted path, for help texts.
pub fn schema_keys() -> Vec<String> {
    let mut out = Vec::new();
    for (name, kind) in ROOT {
        match kind {
            Kind::Section(fields) => out.extend(fields.iter().map(|(f, _)| format!("{name}.{f}"))),
            _ => out.push(name.to_string()),
        }
    }
    out
}

fn nearest(key: &str, fields: &[Field]) -> Option<&'static str> {
    fields
        .iter()
        .map(|(f, _)| (strsim::damerau_levenshtein(&key.to_lowercase(), &f.to_lowercase()), *f))
        .min()
        .map(|(_, f)| f)
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

fn check(obj: &Map<String, Value>, fields: &[Field], prefix: &str) -> Result<(), ConfigError> {
    for (key, value) in obj {
        let path = join(prefix, key);
        let Some((_, kind)) = fields.iter().find(|(f, _)| f == key) else {
            let hint = nearest(key, fields).map(|n| format!("; did you mean `{}`?", join(prefix, n))).unwrap_or_default();
            return Err(ConfigError::new(&path, format!("unknown key `{key}`{hint}")));
        };
        let ok = match kind {
            Kind::Int => value.as_u64().is_some(),
            Kind::Number => value.is_number(),
            Kind::Bool => value.is_boolean(),
            Kind::Text => value.is_string(),
            Kind::Numbers => value.as_array().is_some_and(|a| a.iter().all(Value::is_number)),
            Kind::Points => value
                .as_array()
                .is_some_and(|a| a.iter().all(|p| p.as_array().is_some_and(|c| (1..=3).contains(&c.len()) && c.iter().all(Value::is_number)))),
            Kind::Section(sub) => {
                let Some(inner) = value.as_object() else {
                    return Err(ConfigError::new(&path, format!("expected an object, found {}", type_name(value))));
                };
                check(inner, sub, &path)?;
                true
            }
        };
        if !ok {
            let expected = match kind {
                Kind::Int => "a non-negative integer",
                Kind::Number => "a number",
                Kind::Bool => "a boolean",
                Kind::Text => "a string",
                Kind::Numbers => "an array of numbers",
                Kind::Points => "an array of 1 to 3 component points",
                Kind::Section(_) => unreachable!(),
            };
            return Err(ConfigError::new(&path, format!("expected {expected}, found {}", type_name(value))));
        }
    }
    Ok(())
}

/// Sets `path` (dotted) in `doc`, creating sections as needed.
pub fn set_path(doc: &mut Map<String, Value>, path: &str, value: Value) {
    match path.split_once('.') {
        Some((head, rest)) => {
            let entry = doc.entry(head.to_string()).or_insert_with(|| Value::Object(Map::new()));
            if !entry.is_object() {
                *entry = Value::Object(Map::new());
            }
            set_path(entry.as_object_mut().unwrap(), rest, value);
        }
        None => {
            doc.insert(path.to_string(), value);
        }
    }
}

pub fn read_document(path: &Path) -> Result<Map<String, Value>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| ConfigError::new("", format!("{} is not valid JSON: {e}", path.display())))?;
    match value {
        Value::Object(map) => Ok(map),
        other => Err(ConfigError::new("", format!("top level must be an object, found {}", type_name(&other)))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailSettings {
    pub x_min: f64,
    pub thresholds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BumpSettings {
    pub wells: usize,
    pub depth: f64,
    pub centres: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSettings {
    pub points: usize,
    pub levels: usize,
    pub order: usize,
    pub resolution: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSettings {
    pub dir: String,
    pub plots: bool,
    pub vectors: bool,
    pub matrix: bool,
}

/// Fully resolved configuration. Its JSON form is what the manifest hashes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub d: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "N")]
    pub points: usize,
    pub bc: String,
    pub eps: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub replicas: usize,
    pub seed: u64,
    pub method: String,
    pub k: usize,
    pub noise: bool,
    pub dilation: f64,
    pub tail: TailSettings,
    pub bump: BumpSettings,
    pub kernel: KernelSettings,
    pub residual_tol: f64,
    #[serde(skip)]
    pub output: OutputSettings,
}

struct Reader<'a> {
    doc: &'a Map<String, Value>,
}

impl Reader<'_> {
    fn get(&self, path: &str) -> Option<&Value> {
        let mut cur = self.doc;
        let mut parts = path.split('.').peekable();
        while let Some(p) = parts.next() {
            let v = cur.get(p)?;
            if parts.peek().is_none() {
                return Some(v);
            }
            cur = v.as_object()?;
        }
        None
    }

    fn uint(&self, path: &str, default: usize) -> usize {
        self.get(path).and_then(Value::as_u64).map_or(default, |v| v as usize)
    }

    fn num(&self, path: &str, default: f64) -> f64 {
        self.get(path).and_then(Value::as_f64).unwrap_or(default)
    }

    fn flag(&self, path: &str, default: bool) -> bool {
        self.get(path).and_then(Value::as_bool).unwrap_or(default)
    }

    fn text(&self, path: &str, default: &str) -> String {
        self.get(path).and_then(Value::as_str).unwrap_or(default).to_string()
    }
}

fn positive(path: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::new(path, format!("must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    /// Schema check followed by typed extraction with defaults.
    pub fn from_document(doc: &Map<String, Value>) -> Result<Self, ConfigError> {
        check(doc, ROOT, "")?;
        let r = Reader { doc };
        if let Some(s) = r.get("schema").and_then(Value::as_str) {
            if s != SCHEMA_VERSION {
                return Err(ConfigError::new("schema", format!("unsupported schema `{s}`, expected `{SCHEMA_VERSION}`")));
            }
        }
        let d = r.uint("d", 1);
        if !(1..=3).contains(&d) {
            return Err(ConfigError::new("d", format!("dimension must be 1, 2 or 3, got {d}")));
        }
        let half_width = positive("L", r.num("L", 1.0))?;
        let points = r.uint("N", 256);
        if points < 2 {
            return Err(ConfigError::new("N", "need at least 2 cells per axis"));
        }
        let bc = r.text("bc", "dirichlet");
        if bc != "dirichlet" && bc != "periodic" {
            return Err(ConfigError::new("bc", format!("expected `dirichlet` or `periodic`, got `{bc}`")));
        }
        let eps = match r.get("eps").and_then(Value::as_array) {
            Some(list) => list.iter().filter_map(Value::as_f64).collect(),
            None if r.get("eps_levels").is_some() || r.get("eps_max").is_some() => {
                let top = positive("eps_max", r.num("eps_max", 0.0625))?;
                let ratio = r.num("eps_ratio", 2.0);
                if !(ratio > 1.0) {
                    return Err(ConfigError::new("eps_ratio", format!("must exceed 1, got {ratio}")));
                }
                let levels = r.uint("eps_levels", 4);
                (0..levels).map(|j| top * ratio.powi(-(j as i32))).collect()
            }
            None => Vec::new(),
        };
        for (i, &e) in eps.iter().enumerate() {
            positive(&format!("eps[{i}]"), e)?;
        }
        if eps.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(ConfigError::new("eps", "schedule must be strictly decreasing"));
        }
        let a = r.num("a", 1.0);
        if !(a >= 1.0) {
            return Err(ConfigError::new("a", format!("mass must be at least 1, got {a}")));
        }
        let method = r.text("method", "continuum");
        if parse_method(&method).is_none() {
            return Err(ConfigError::new("method", format!("expected `continuum`, `lattice` or `monte-carlo`, got `{method}`")));
        }
        let replicas = r.uint("replicas", 1);
        if replicas == 0 {
            return Err(ConfigError::new("replicas", "need at least one replica"));
        }
        let k = r.uint("k", 1);
        if k == 0 {
            return Err(ConfigError::new("k", "need at least one eigenpair"));
        }
        let tail = TailSettings { x_min: r.num("tail.x_min", 0.5), thresholds: r.uint("tail.thresholds", 80) };
        if tail.thresholds < 3 {
            return Err(ConfigError::new("tail.thresholds", "need at least 3 thresholds"));
        }
        let centres = r.get("bump.centres").and_then(Value::as_array).map(|list| {
            list.iter().map(|p| p.as_array().unwrap().iter().filter_map(Value::as_f64).collect::<Vec<f64>>()).collect::<Vec<_>>()
        });
        if let Some(c) = &centres {
            if let Some(i) = c.iter().position(|p| p.len() != d) {
                return Err(ConfigError::new(&format!("bump.centres[{i}]"), format!("expected {d} coordinates")));
            }
        }
        let bump = BumpSettings { wells: r.uint("bump.wells", 1), depth: positive("bump.depth", r.num("bump.depth", 1.0))?, centres };
        let kernel = KernelSettings {
            points: r.uint("kernel.points", 100),
            levels: r.uint("kernel.levels", 7),
            order: r.uint("kernel.order", 4),
            resolution: r.uint("kernel.resolution", 41),
        };
        if kernel.order < 2 {
            return Err(ConfigError::new("kernel.order", "annihilation order must be at least 2"));
        }
        if kernel.resolution < 2 {
            return Err(ConfigError::new("kernel.resolution", "need at least 2 points per axis"));
        }
        Ok(Self {
            d,
            half_width,
            points,
            bc,
            eps,
            a,
            b: r.num("b", 0.0),
            replicas,
            seed: r.get("seed").and_then(Value::as_u64).unwrap_or(0),
            method,
            k,
            noise: r.flag("noise", true),
            dilation: positive("dilation", r.num("dilation", 2.0))?,
            tail,
            bump,
            kernel,
            residual_tol: positive("solver.residual_tol", r.num("solver.residual_tol", 1e-9))?,
            output: OutputSettings {
                dir: r.text("output.dir", "anderson-out"),
                plots: r.flag("output.plots", false),
                vectors: r.flag("output.vectors", false),
                matrix: r.flag("output.matrix", false),
            },
        })
    }

    pub fn boundary(&self) -> BoundaryCondition {
        if self.bc == "periodic" {
            BoundaryCondition::Periodic
        } else {
            BoundaryCondition::Dirichlet
        }
    }

    pub fn constants_method(&self) -> ConstantsMethod {
        parse_method(&self.method).expect("validated")
    }

    pub fn grid(&self) -> anderson_core::Result<LatticeGrid> {
        LatticeGrid::new(self.d, self.half_width, self.points, self.boundary())
    }

    pub fn experiment(&self, id: &str) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(id, self.d, self.half_width, self.points);
        c.bc = self.boundary();
        c.epsilons = self.eps.clone();
        c.mass = self.a;
        c.b = self.b;
        c.replicas = self.replicas;
        c.seed = self.seed;
        c.method = self.constants_method();
        c.eigenpairs = self.k;
        c.residual_tol = self.residual_tol;
        c.dilation = self.dilation;
        c.tail_x_min = self.tail.x_min;
        c.tail_thresholds = self.tail.thresholds;
        c
    }

    pub fn bump_config(&self) -> BumpConfig {
        BumpConfig {
            dim: self.d,
            half_width: self.half_width,
            points_per_axis: self.points,
            wells: self.bump.wells,
            depth: self.bump.depth,
            centres: self.bump.centres.as_ref().map(|list| {
                list.iter()
                    .map(|p| {
                        let mut c = [0.0; 3];
                        c[..p.len()].copy_from_slice(p);
                        c
                    })
                    .collect()
            }),
        }
    }

    /// Canonical JSON used for hashing and the manifest.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }
}

pub fn parse_method(s: &str) -> Option<ConstantsMethod> {
    [ConstantsMethod::ContinuumQuadrature, ConstantsMethod::LatticeSelfEnergy, ConstantsMethod::MonteCarloOracle]
        .into_iter()
        .find(|m| m.as_str() == s)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    UnresolvedMollifier { epsilon: f64, mesh: f64 },
    TrendOnlyTail,
    BumpOverlap(String),
    RenormalisationOff,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::UnresolvedMollifier { epsilon, mesh } => {
                write!(f, "UnresolvedMollifier: ε = {epsilon} is below 2h = {}; the run will refuse this level", 2.0 * mesh)
            }
            Warning::TrendOnlyTail => write!(f, "d = 3 tail runs are trend-only: the exponent 1/2 regime is out of reach at this scale"),
            Warning::BumpOverlap(msg) => write!(f, "bump supports: {msg}"),
            Warning::RenormalisationOff => write!(f, "white noise without mollification carries no counterterm; d ≥ 2 spectra then depend on h"),
        }
    }
}

/// Warnings for `subcommand`; `None` checks every subcommand's concerns.
pub fn warnings(cfg: &RunConfig, subcommand: Option<&str>) -> Vec<Warning> {
    let wants = |s: &str| subcommand.is_none_or(|c| c == s);
    let mut out = Vec::new();
    let mesh = 2.0 * cfg.half_width / cfg.points as f64;
    for &e in &cfg.eps {
        if e < 2.0 * mesh * (1.0 - 1e-12) {
            out.push(Warning::UnresolvedMollifier { epsilon: e, mesh });
        }
    }
    if cfg.d == 3 && wants("tail") && subcommand.is_some() {
        out.push(Warning::TrendOnlyTail);
    }
    if cfg.d >= 2 && cfg.eps.is_empty() && cfg.noise && (wants("spectrum") || wants("tail")) && subcommand.is_some() {
        out.push(Warning::RenormalisationOff);
    }
    if wants("bump") {
        out.extend(bump_overlaps(cfg).into_iter().map(Warning::BumpOverlap));
    }
    out
}

fn bump_overlaps(cfg: &RunConfig) -> Vec<String> {
    let d = cfg.d;
    let centres: Vec<Vec<f64>> = match &cfg.bump.centres {
        Some(c) => c.clone(),
        None => {
            let first = -(cfg.bump.wells as f64 - 1.0);
            (0..cfg.bump.wells)
                .map(|i| {
                    let mut p = vec![0.0; d];
                    p[0] = first + 2.0 * i as f64;
                    p
                })
                .collect()
        }
    };
    let mut out = Vec::new();
    for (i, p) in centres.iter().enumerate() {
        let edge = p.iter().map(|c| cfg.half_width - c.abs()).fold(f64::INFINITY, f64::min);
        if edge < 1.0 {
            out.push(format!("well {i} at {p:?} reaches the boundary (needs distance 1, has {edge})"));
        }
        for (j, q) in centres.iter().enumerate().skip(i + 1) {
            let dist = p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if dist < 2.0 {
                out.push(format!("wells {i} and {j} overlap (centres {dist} apart, need 2)"));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn doc(v: Value) -> Map<String, Value> {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn minimal_config_is_valid() {
        let cfg = RunConfig::from_document(&doc(json!({"d": 2}))).unwrap();
        assert_eq!(cfg.d, 2);
        assert!(warnings(&cfg, None).is_empty());
    }

    #[test]
    fn unknown_key_names_nearest() {
        let err = RunConfig::from_document(&doc(json!({"tail": {"xmin": 0.3}}))).unwrap_err();
        assert_eq!(err.path, "tail.xmin");
        assert!(err.message.contains("`tail.x_min`"), "{err}");
        let err = RunConfig::from_document(&doc(json!({"replica": 3}))).unwrap_err();
        assert!(err.message.contains("`replicas`"), "{err}");
    }

    #[test]
    fn wrong_type_reports_path() {
        let err = RunConfig::from_document(&doc(json!({"solver": {"residual_tol": "small"}}))).unwrap_err();
        assert_eq!(err.path, "solver.residual_tol");
    }

    #[test]
    fn eps_schedule_from_levels() {
        let cfg = RunConfig::from_document(&doc(json!({"eps_levels": 3, "eps_max": 0.5}))).unwrap();
        assert_eq!(cfg.eps, vec![0.5, 0.25, 0.125]);
    }

    #[test]
    fn half_mesh_mollifier_warns() {
        let cfg = RunConfig::from_document(&doc(json!({"d": 1, "L": 1.0, "N": 64, "eps": [1.0 / 64.0]}))).unwrap();
        assert!(matches!(warnings(&cfg, None)[0], Warning::UnresolvedMollifier { .. }));
    }

    #[test]
    fn set_path_creates_sections() {
        let mut m = Map::new();
        set_path(&mut m, "tail.x_min", json!(0.25));
        assert_eq!(m["tail"]["x_min"], json!(0.25));
    }
}

//! Configuration, dispatch and persistence for the `anderson` binary. Every
//! number written here comes from `anderson_core`; this crate only reads
//! configs, calls the experiments and writes tables, manifests and plots.

pub mod config;
pub mod output;
pub mod plot;

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use anderson_core::experiments::{
    bump_lower_bound, constants_for, convergence_in_epsilon, linear_fit, replica_seeds, scaling_identity_check, tail_exponent,
};
use anderson_core::greens::{boundary_decay_check, kernel_check, BoundaryDecayReport, GreensKernel, ReflectedKernel};
use anderson_core::mollifier::Mollifier;
use anderson_core::noise::{mollify, sample_white_replica, NoiseField};
use anderson_core::operator::assemble;
use anderson_core::renorm::RenormConstants;
use anderson_core::spectra::{lowest_eigenpairs_with, SpectrumOptions};
use serde_json::{json, Map, Value};

use crate::config::{read_document, warnings, ConfigError, RunConfig};
use crate::output::{config_hash, f64_matrix_le, now_unix, num, opt, OutputDir, RunManifest, SeedEntry, Table, MANIFEST_SCHEMA};
use crate::plot::{chart, Series, Style};

pub const SUBCOMMANDS: [&str; 7] = ["spectrum", "converge", "scaling", "tail", "renorm", "bump", "kernel-check"];

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_PARTIAL: i32 = 4;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Numerical(anderson_core::Error),
    Io(std::io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Numerical(e) => write!(f, "numerical failure: {e}"),
            RunError::Io(e) => write!(f, "i/o failure: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<anderson_core::Error> for RunError {
    fn from(e: anderson_core::Error) -> Self {
        RunError::Numerical(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Numerical(_) | RunError::Io(_) => EXIT_NUMERICAL,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest_path: std::path::PathBuf,
    pub outputs: Vec<String>,
    pub summary: Value,
    pub warnings: Vec<String>,
    /// Replicas that failed; their rows are missing but the rest was written.
    pub failures: Vec<String>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            EXIT_OK
        } else {
            EXIT_PARTIAL
        }
    }
}

/// Merges the config file (if any) with `overrides` (dotted keys win) and
/// checks the result.
pub fn resolve_config(config_path: Option<&Path>, overrides: &[(String, Value)]) -> Result<RunConfig, ConfigError> {
    let mut doc = match config_path {
        Some(p) => read_document(p)?,
        None => Map::new(),
    };
    for (k, v) in overrides {
        config::set_path(&mut doc, k, v.clone());
    }
    RunConfig::from_document(&doc)
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub config: RunConfig,
    pub warnings: Vec<String>,
}

pub fn validate_config(path: &Path, subcommand: Option<&str>) -> Result<ValidationReport, ConfigError> {
    if !path.exists() {
        return Err(ConfigError { path: String::new(), message: format!("{} does not exist", path.display()) });
    }
    let config = resolve_config(Some(path), &[])?;
    let warnings = warnings(&config, subcommand).iter().map(ToString::to_string).collect();
    Ok(ValidationReport { config, warnings })
}

struct Artifacts {
    tables: Vec<Table>,
    plots: Vec<(String, String)>,
    binaries: Vec<(String, Vec<u8>)>,
    summary: Map<String, Value>,
    failures: Vec<String>,
}

impl Artifacts {
    fn new() -> Self {
        Self { tables: Vec::new(), plots: Vec::new(), binaries: Vec::new(), summary: Map::new(), failures: Vec::new() }
    }

    fn note(&mut self, key: &str, value: Value) {
        self.summary.insert(key.to_string(), value);
    }
}

pub fn run(subcommand: &str, config_path: Option<&Path>, overrides: &[(String, Value)]) -> Result<RunOutcome, RunError> {
    if !SUBCOMMANDS.contains(&subcommand) {
        return Err(ConfigError { path: String::new(), message: format!("unknown subcommand `{subcommand}`") }.into());
    }
    let cfg = resolve_config(config_path, overrides)?;
    let warns: Vec<String> = warnings(&cfg, Some(subcommand)).iter().map(ToString::to_string).collect();
    for w in &warns {
        eprintln!("warning: {w}");
    }
    let mut seeds: Vec<SeedEntry> = Vec::new();
    let art = match subcommand {
        "spectrum" => spectrum(&cfg, &mut seeds)?,
        "converge" => converge(&cfg, &mut seeds)?,
        "scaling" => scaling(&cfg, &mut seeds)?,
        "tail" => tail(&cfg, &mut seeds)?,
        "renorm" => renorm(&cfg)?,
        "bump" => bump(&cfg)?,
        _ => kernel(&cfg)?,
    };
    let mut out = OutputDir::create(Path::new(&cfg.output.dir))?;
    for t in &art.tables {
        out.write_table(t)?;
    }
    for (name, bytes) in &art.binaries {
        out.write_bytes(name, bytes)?;
    }
    if cfg.output.plots {
        for (name, svg) in &art.plots {
            out.write_bytes(name, svg.as_bytes())?;
        }
    }
    let canonical = cfg.canonical_json();
    let summary = Value::Object(art.summary);
    let manifest = RunManifest {
        schema: MANIFEST_SCHEMA,
        subcommand: subcommand.to_string(),
        config: serde_json::from_str(&canonical).expect("canonical JSON"),
        config_hash: config_hash(subcommand, &canonical),
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: now_unix(),
        seeds,
        outputs: out.files().to_vec(),
        summary: summary.clone(),
        warnings: warns.clone(),
        failures: art.failures.clone(),
    };
    let manifest_path = out.write_manifest(&manifest)?;
    Ok(RunOutcome { manifest_path, outputs: out.files().to_vec(), summary, warnings: warns, failures: art.failures })
}

fn seed_table(cfg: &RunConfig, seeds: &mut Vec<SeedEntry>) {
    let exp = cfg.experiment("seeds");
    seeds.extend(replica_seeds(&exp).into_iter().map(|(replica, seed, stream)| SeedEntry { replica, seed, stream }));
}

fn constants_row(t: &mut Table, c: &RenormConstants) {
    t.push(vec![
        c.dim.to_string(),
        num(c.mass),
        num(c.epsilon),
        c.method.as_str().to_string(),
        num(c.c1),
        num(c.c11),
        num(c.c12),
        num(c.total),
        num(c.error_estimate),
    ]);
}

const CONSTANTS_HEADER: [&str; 9] = ["d", "a", "eps", "method", "c1", "c11", "c12", "C", "error_estimate"];

fn spectrum(cfg: &RunConfig, seeds: &mut Vec<SeedEntry>) -> Result<Artifacts, RunError> {
    let grid = cfg.grid()?;
    let exp = cfg.experiment("spectrum");
    let mut art = Artifacts::new();
    let mol = match (cfg.noise, cfg.eps.first()) {
        (true, Some(&e)) => Some(Mollifier::standard(cfg.d, e)?),
        _ => None,
    };
    if let Some(e) = cfg.eps.first() {
        if cfg.noise && *e < 2.0 * grid.mesh() * (1.0 - 1e-12) {
            return Err(anderson_core::Error::UnresolvedMollifier { epsilon: *e, mesh: grid.mesh() }.into());
        }
    }
    let constant = match &mol {
        Some(m) => {
            let c = constants_for(&exp, &grid, m)?;
            let mut t = Table::new("constants", &CONSTANTS_HEADER);
            constants_row(&mut t, &c);
            art.tables.push(t);
            c.total
        }
        None => 0.0,
    };
    let replicas = if cfg.noise { cfg.replicas } else { 1 };
    if cfg.noise {
        seed_table(cfg, seeds);
    }
    let mut table = Table::new("spectrum", &["replica", "n", "eigenvalue", "residual"]);
    for r in 0..replicas {
        let potential = if cfg.noise {
            let white = sample_white_replica(&grid, cfg.seed, r as u64);
            match &mol {
                Some(m) => mollify(&white, m)?,
                None => white,
            }
        } else {
            NoiseField::zeros(&grid)
        };
        let h = assemble(&grid, &potential, constant)?;
        let opts = SpectrumOptions { residual_tol: cfg.residual_tol, seed: cfg.seed ^ r as u64, ..Default::default() };
        let result = match lowest_eigenpairs_with(h.matrix(), Some(&grid), cfg.k, &opts).and_then(|s| s.require_complete()) {
            Ok(s) => s,
            Err(e) if replicas > 1 => {
                art.failures.push(format!("replica {r}: {e}"));
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        for (n, (l, res)) in result.eigenvalues.iter().zip(&result.residuals).enumerate() {
            table.push(vec![r.to_string(), (n + 1).to_string(), num(*l), num(*res)]);
        }
        if r == 0 {
            art.note("eigenvalues", json!(result.eigenvalues));
            art.note("solver", json!(result.stats.method));
        }
        if cfg.output.vectors {
            art.binaries.push((format!("eigenvectors_r{r}.bin"), f64_matrix_le(&result.eigenvectors)));
        }
        if cfg.output.matrix {
            let mut buf = Vec::new();
            h.write_triplets(&mut buf)?;
            art.binaries.push((format!("matrix_r{r}.txt"), buf));
        }
    }
    art.note("constant", json!(constant));
    art.tables.push(table);
    Ok(art)
}

fn converge(cfg: &RunConfig, seeds: &mut Vec<SeedEntry>) -> Result<Artifacts, RunError> {
    let rep = convergence_in_epsilon(&cfg.experiment("converge"))?;
    seed_table(cfg, seeds);
    let mut art = Artifacts::new();
    let mut consts = Table::new("constants", &CONSTANTS_HEADER);
    for c in &rep.constants {
        constants_row(&mut consts, c);
    }
    art.tables.push(consts);
    let mut t = Table::new("converge", &["replica", "level", "eps", "C", "n", "eigenvalue", "control"]);
    for row in &rep.rows {
        for (n, l) in row.eigenvalues.iter().enumerate() {
            let control = if n == 0 { opt(row.control) } else { String::new() };
            t.push(vec![row.replica.to_string(), row.level.to_string(), num(row.epsilon), num(row.constant), (n + 1).to_string(), num(*l), control]);
        }
    }
    art.tables.push(t);
    art.note("cauchy_fraction", json!(rep.cauchy_fraction));
    if let Some(f) = rep.control_slope {
        art.note("control_slope", json!(f.slope));
        art.note("control_target", json!(rep.control_target()));
    }
    art.note("cross_seed_correlation", json!(rep.cross_seed_correlation));
    art.failures = rep.failures.iter().map(|(r, e)| format!("replica {r}: {e}")).collect();

    let mut series: Vec<Series> = Vec::new();
    for r in 0..cfg.replicas.min(6) {
        let pts: Vec<(f64, f64)> = rep.rows.iter().filter(|row| row.replica == r).map(|row| (row.epsilon.ln(), row.eigenvalues[0])).collect();
        if !pts.is_empty() {
            series.push(Series::new(&format!("replica {r}"), pts, Style::Line));
        }
    }
    art.plots.push(("converge.svg".into(), chart("λ1 against ln ε", "ln ε", "λ1", &series)));
    Ok(art)
}

fn scaling(cfg: &RunConfig, seeds: &mut Vec<SeedEntry>) -> Result<Artifacts, RunError> {
    let rep = scaling_identity_check(&cfg.experiment("scaling"))?;
    seed_table(cfg, seeds);
    let mut art = Artifacts::new();
    let mut t = Table::new("scaling", &["replica", "n", "lambda_unit", "lambda_dilated", "lhs", "rhs", "tolerance", "holds"]);
    for row in &rep.rows {
        t.push(vec![
            row.replica.to_string(),
            row.n.to_string(),
            num(row.lambda_unit),
            num(row.lambda_dilated),
            num(row.lhs),
            num(row.rhs),
            num(row.tolerance),
            row.holds.to_string(),
        ]);
    }
    art.tables.push(t);
    art.note("all_hold", json!(rep.all_hold));
    art.note("factor", json!(rep.factor));
    art.note("delta_l", json!(rep.scaled.delta_l));
    art.note("mean_gap", json!(rep.mean_gap));
    art.note("mean_gap_stderr", json!(rep.mean_gap_stderr));
    art.failures = rep.failures.iter().map(|(r, e)| format!("replica {r}: {e}")).collect();
    Ok(art)
}

fn tail(cfg: &RunConfig, seeds: &mut Vec<SeedEntry>) -> Result<Artifacts, RunError> {
    let rec = tail_exponent(&cfg.experiment("tail"))?;
    seed_table(cfg, seeds);
    let mut art = Artifacts::new();
    let mut t = Table::new("tail", &["x", "exceedances", "probability", "ci_low", "ci_high", "fitted"]);
    for i in 0..rec.thresholds.len() {
        t.push(vec![
            num(rec.thresholds[i]),
            rec.exceedances[i].to_string(),
            num(rec.probabilities[i]),
            num(rec.intervals[i].0),
            num(rec.intervals[i].1),
            rec.fitted[i].to_string(),
        ]);
    }
    art.tables.push(t);
    let mut ev = Table::new("tail_eigenvalues", &["replica", "n", "eigenvalue"]);
    for (r, vals) in &rec.eigenvalues {
        for (n, l) in vals.iter().enumerate() {
            ev.push(vec![r.to_string(), (n + 1).to_string(), num(*l)]);
        }
    }
    art.tables.push(ev);
    art.note("slope", json!(rec.slope()));
    art.note("slope_ci", json!(rec.slope_ci.map(|c| [c.0, c.1])));
    art.note("target", json!(rec.target));
    art.note("constant", json!(rec.constant));
    art.note("trend_only", json!(rec.trend_only));
    art.note("window_slopes", json!(rec.window_slopes));
    art.note("trend_monotone", json!(rec.trend_monotone()));
    art.failures = rec.failures.iter().map(|(r, e)| format!("replica {r}: {e}")).collect();

    let pts: Vec<(f64, f64)> = rec
        .thresholds
        .iter()
        .zip(&rec.probabilities)
        .zip(&rec.fitted)
        .filter(|(_, f)| **f)
        .map(|((x, p), _)| (x.ln(), (-p.ln()).ln()))
        .collect();
    let mut series = vec![Series::new("estimate", pts.clone(), Style::Markers)];
    if let (Some(f), Some(first), Some(last)) = (rec.fit, pts.first(), pts.last()) {
        let line = [first.0, last.0].map(|x| (x, f.intercept + f.slope * x)).to_vec();
        series.push(Series::new(&format!("slope {:.3}", f.slope), line, Style::Line));
    }
    art.plots.push(("tail.svg".into(), chart("lower tail of λ1", "ln x", "ln(-ln P(λ1 < -x))", &series)));
    Ok(art)
}

fn renorm(cfg: &RunConfig) -> Result<Artifacts, RunError> {
    if cfg.eps.is_empty() {
        return Err(ConfigError { path: "eps".into(), message: "renorm needs an ε schedule (eps or eps_levels)".into() }.into());
    }
    let grid = cfg.grid()?;
    let exp = cfg.experiment("renorm");
    let mut art = Artifacts::new();
    let mut t = Table::new("constants", &CONSTANTS_HEADER);
    let mut all = Vec::new();
    for &e in &cfg.eps {
        let c = constants_for(&exp, &grid, &Mollifier::standard(cfg.d, e)?)?;
        constants_row(&mut t, &c);
        all.push(c);
    }
    art.tables.push(t);
    let ln_eps: Vec<f64> = all.iter().map(|c| c.epsilon.ln()).collect();
    let c1: Vec<f64> = all.iter().map(|c| c.c1).collect();
    if let Some(f) = linear_fit(&ln_eps, &c1) {
        art.note("c1_slope_vs_ln_eps", json!(f.slope));
        if cfg.d == 2 {
            art.note("c1_slope_target", json!(-1.0 / (2.0 * PI)));
        }
    }
    if cfg.d == 3 {
        let scaled: Vec<f64> = all.iter().map(|c| c.epsilon * c.c1).collect();
        art.note("eps_c1", json!(scaled));
    }
    art.plots.push((
        "renorm.svg".into(),
        chart("counterterms against ln ε", "ln ε", "value", &[
            Series::new("c1", ln_eps.iter().copied().zip(c1.iter().copied()).collect(), Style::Markers),
            Series::new("C", ln_eps.iter().copied().zip(all.iter().map(|c| c.total)).collect(), Style::Line),
        ]),
    ));
    Ok(art)
}

fn bump(cfg: &RunConfig) -> Result<Artifacts, RunError> {
    let rep = bump_lower_bound(&cfg.bump_config())?;
    let mut art = Artifacts::new();
    let upper = -3.0 * cfg.bump.depth;
    let mut t = Table::new("bump", &["n", "eigenvalue", "lower", "upper", "lower_holds", "upper_holds"]);
    for (n, l) in rep.eigenvalues.iter().enumerate() {
        t.push(vec![(n + 1).to_string(), num(*l), num(rep.b), num(upper), (*l >= rep.b).to_string(), (*l <= upper).to_string()]);
    }
    art.tables.push(t);
    art.note("b", json!(rep.b));
    art.note("gradient_energy", json!(rep.gradient_energy));
    art.note("lattice_gradient_energy", json!(rep.lattice_gradient_energy));
    art.note("lower_holds", json!(rep.lower_holds));
    art.note("upper_holds", json!(rep.upper_holds));
    Ok(art)
}

fn kernel(cfg: &RunConfig) -> Result<Artifacts, RunError> {
    let base = GreensKernel::new(cfg.d, cfg.a)?;
    let dec = base.decompose(cfg.kernel.order)?;
    let rep = kernel_check(&dec, cfg.kernel.points, cfg.kernel.levels, cfg.seed)?;
    let mut art = Artifacts::new();
    let mut t = Table::new("kernel_layers", &["level", "sup", "scaled"]);
    for b in &rep.layer_bounds {
        t.push(vec![b.level.to_string(), num(b.sup), num(b.scaled)]);
    }
    art.tables.push(t);
    art.note("telescoping_error", json!(rep.telescoping_error));
    art.note("moment_error", json!(rep.moment_error));
    art.note("bound_constant", json!(rep.bound_constant));

    let refl = ReflectedKernel::new(base, cfg.half_width, cfg.boundary())?;
    let mut bt = Table::new("kernel_boundary", &["level", "distance", "sup", "scaled"]);
    let mut slopes = Vec::new();
    for n in [base.cutoff_index() + 2, base.cutoff_index() + 3] {
        let width = 2f64.powi(-n);
        if width > cfg.half_width {
            continue;
        }
        let distances: Vec<f64> = (0..=6).map(|i| 0.5 * width * i as f64).collect();
        match boundary_decay_check(&refl, &dec, n, &distances, cfg.kernel.resolution)? {
            BoundaryDecayReport::NotApplicable => break,
            BoundaryDecayReport::Checked { samples, normalised_slope, .. } => {
                for s in samples {
                    bt.push(vec![s.level.to_string(), num(s.distance), num(s.sup), num(s.scaled)]);
                }
                slopes.push(json!({"level": n, "normalised_slope": normalised_slope}));
            }
        }
    }
    art.note("boundary_slopes", Value::Array(slopes));
    art.tables.push(bt);
    Ok(art)
}

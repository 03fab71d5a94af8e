use std::path::PathBuf;
use std::process::ExitCode;

use anderson_cli::{run, validate_config, EXIT_CONFIG, EXIT_OK};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "anderson", version, about = "Renormalised Anderson hamiltonian experiments")]
struct Cli {
    /// Worker threads for replica loops (default: ANDERSON_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write CSV tables plus a manifest.
    Run {
        #[arg(value_enum)]
        experiment: Experiment,
        #[command(flatten)]
        flags: Flags,
    },
    /// Check a config file against the schema and print warnings.
    Validate {
        path: PathBuf,
        /// Only raise the warnings relevant to this experiment.
        #[arg(long = "for", value_enum)]
        experiment: Option<Experiment>,
    },
    /// List every config key.
    Schema,
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Spectrum,
    Converge,
    Scaling,
    Tail,
    Renorm,
    Bump,
    KernelCheck,
}

impl Experiment {
    fn name(self) -> &'static str {
        match self {
            Experiment::Spectrum => "spectrum",
            Experiment::Converge => "converge",
            Experiment::Scaling => "scaling",
            Experiment::Tail => "tail",
            Experiment::Renorm => "renorm",
            Experiment::Bump => "bump",
            Experiment::KernelCheck => "kernel-check",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args)]
struct Flags {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<u64>,
    #[arg(long = "L")]
    half_width: Option<f64>,
    #[arg(long = "N")]
    points: Option<u64>,
    #[arg(long)]
    bc: Option<String>,
    /// Comma separated, strictly decreasing.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long)]
    eps_max: Option<f64>,
    #[arg(long)]
    eps_levels: Option<u64>,
    #[arg(long)]
    eps_ratio: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    replicas: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// continuum, lattice or monte-carlo.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    k: Option<u64>,
    #[arg(long, value_enum)]
    noise: Option<Switch>,
    #[arg(long)]
    dilation: Option<f64>,
    #[arg(long)]
    x_min: Option<f64>,
    #[arg(long)]
    thresholds: Option<u64>,
    #[arg(long)]
    wells: Option<u64>,
    #[arg(long)]
    depth: Option<f64>,
    /// Sample points for kernel-check.
    #[arg(long = "points")]
    kernel_points: Option<u64>,
    #[arg(long)]
    levels: Option<u64>,
    #[arg(long)]
    residual_tol: Option<f64>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    plots: bool,
    /// Dump eigenvectors as little-endian f64.
    #[arg(long)]
    vectors: bool,
    /// Export the assembled matrix as coordinate triplets.
    #[arg(long)]
    matrix: bool,
}

impl Flags {
    fn overrides(&self) -> Vec<(String, Value)> {
        let mut o: Vec<(String, Value)> = Vec::new();
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                o.push((k.to_string(), v));
            }
        };
        put("d", self.d.map(|v| json!(v)));
        put("L", self.half_width.map(|v| json!(v)));
        put("N", self.points.map(|v| json!(v)));
        put("bc", self.bc.as_ref().map(|v| json!(v)));
        put("eps", self.eps.as_ref().map(|v| json!(v)));
        put("eps_max", self.eps_max.map(|v| json!(v)));
        put("eps_levels", self.eps_levels.map(|v| json!(v)));
        put("eps_ratio", self.eps_ratio.map(|v| json!(v)));
        put("a", self.a.map(|v| json!(v)));
        put("b", self.b.map(|v| json!(v)));
        put("replicas", self.replicas.map(|v| json!(v)));
        put("seed", self.seed.map(|v| json!(v)));
        put("method", self.method.as_ref().map(|v| json!(v)));
        put("k", self.k.map(|v| json!(v)));
        put("noise", self.noise.map(|v| json!(matches!(v, Switch::On))));
        put("dilation", self.dilation.map(|v| json!(v)));
        put("tail.x_min", self.x_min.map(|v| json!(v)));
        put("tail.thresholds", self.thresholds.map(|v| json!(v)));
        put("bump.wells", self.wells.map(|v| json!(v)));
        put("bump.depth", self.depth.map(|v| json!(v)));
        put("kernel.points", self.kernel_points.map(|v| json!(v)));
        put("kernel.levels", self.levels.map(|v| json!(v)));
        put("solver.residual_tol", self.residual_tol.map(|v| json!(v)));
        put("output.dir", self.out.as_ref().map(|v| json!(v)));
        put("output.plots", self.plots.then_some(json!(true)));
        put("output.vectors", self.vectors.then_some(json!(true)));
        put("output.matrix", self.matrix.then_some(json!(true)));
        o
    }
}

fn init_threads(flag: Option<usize>) {
    let n = flag.or_else(|| std::env::var("ANDERSON_THREADS").ok().and_then(|s| s.parse().ok()));
    if let Some(n) = n.filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads(cli.threads);
    let code = match cli.command {
        Command::Schema => {
            for k in anderson_cli::config::schema_keys() {
                println!("{k}");
            }
            EXIT_OK
        }
        Command::Validate { path, experiment } => match validate_config(&path, experiment.map(Experiment::name)) {
            Ok(report) => {
                for w in &report.warnings {
                    println!("warning: {w}");
                }
                println!("ok");
                EXIT_OK
            }
            Err(e) => {
                eprintln!("{e}");
                EXIT_CONFIG
            }
        },
        Command::Run { experiment, flags } => match run(experiment.name(), flags.config.as_deref(), &flags.overrides()) {
            Ok(outcome) => {
                if let Value::Object(m) = &outcome.summary {
                    for (k, v) in m {
                        println!("{k} = {v}");
                    }
                }
                for f in &outcome.failures {
                    eprintln!("failed: {f}");
                }
                println!("manifest = {}", outcome.manifest_path.display());
                outcome.exit_code()
            }
            Err(e) => {
                eprintln!("{e}");
                e.exit_code()
            }
        },
    };
    ExitCode::from(code as u8)
}

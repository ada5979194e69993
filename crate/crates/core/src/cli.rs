//! `rhp` command-line front end.
//!
//! Exit codes: 0 on success, 1 when an `--assert` check fails, 2 on usage
//! or configuration errors. Every run writes `manifest.json` into the
//! output directory; feeding it back through `--config` reproduces the run.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::experiments::{
    run_clt, run_edge_effects, run_engine_agreement, run_lln, run_variance_fit, ExperimentConfig,
};
use crate::limits::limit_constants;
use crate::model::{ExcitationKernel, InterarrivalModel};
use crate::output::{create, round9, write_json};
use crate::renewal::{mean_count, psi_function, renewal_function};
use crate::simulate::{Engine, PathMetadata};
use crate::statsutil::RandomStream;

pub const VERSION: &str = concat!("rhp ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Parser)]
#[command(name = "rhp", version, about = "Renewal Hawkes process toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Limit constants and renewal-solver grids.
    Theory(TheoryArgs),
    /// Simulate one path.
    Simulate(SimulateArgs),
    /// Law of large numbers: sup-deviation of N(vT)/T.
    Lln(ExperimentArgs),
    /// Central limit theorem: marginals and covariance of X(v).
    Clt(ExperimentArgs),
    /// Variance growth fitted through the origin.
    Varfit(ExperimentArgs),
    /// Escaped offspring per unit time.
    Edge(ExperimentArgs),
    /// Cluster vs thinning engine agreement.
    Agree(ExperimentArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Interarrival law, `exp:<rate>` or `weibull:<scale>,<shape>`.
    #[arg(long)]
    model: Option<String>,
    /// Excitation kernel, `expk:<alpha>,<beta>` or `unifk:<alpha>,<c>`.
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long, value_parser = parse_integer)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<String>,
    /// Worker threads; results do not depend on it.
    #[arg(long, value_parser = parse_integer)]
    threads: Option<u64>,
    /// Grid step of the renewal solvers.
    #[arg(long, value_parser = parse_positive)]
    dt: Option<f64>,
    /// JSON file with defaults for any flag (e.g. a previous manifest.json).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TheoryArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also write phi.csv, psi.csv and mean_count.csv up to this horizon.
    #[arg(long, value_parser = parse_positive)]
    horizon: Option<f64>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// `cluster` or `thinning`.
    #[arg(long)]
    engine: Option<String>,
    #[arg(long, value_parser = parse_positive)]
    horizon: Option<f64>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    engine: Option<String>,
    /// Horizon(s), comma separated.
    #[arg(long = "T", value_delimiter = ',', value_parser = parse_positive)]
    horizons: Option<Vec<f64>>,
    /// Fractions of the horizon, comma separated.
    #[arg(long = "v", value_delimiter = ',', value_parser = parse_positive)]
    v: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_integer)]
    reps: Option<u64>,
    /// Observation spacing for `varfit`.
    #[arg(long, value_parser = parse_positive)]
    step: Option<f64>,
    /// Threshold check such as `rel_err<0.10`; exit 1 if it fails.
    #[arg(long = "assert")]
    asserts: Vec<String>,
}

fn parse_positive(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

/// Integers may be written in scientific notation (`1e4`).
fn parse_integer(s: &str) -> std::result::Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(64) => Ok(v as u64),
        _ => Err(format!("`{s}` is not a non-negative integer")),
    }
}

/// Every setting that shapes the outputs. Flags override `--config`,
/// which overrides the subcommand defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub engine: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(rename = "assert", skip_serializing_if = "Option::is_none")]
    pub asserts: Option<Vec<String>>,
}

impl Settings {
    fn or(self, lower: Settings) -> Settings {
        Settings {
            model: self.model.or(lower.model),
            kernel: self.kernel.or(lower.kernel),
            seed: self.seed.or(lower.seed),
            out: self.out.or(lower.out),
            dt: self.dt.or(lower.dt),
            engine: self.engine.or(lower.engine),
            horizon: self.horizon.or(lower.horizon),
            horizons: self.horizons.or(lower.horizons),
            v: self.v.or(lower.v),
            reps: self.reps.or(lower.reps),
            step: self.step.or(lower.step),
            asserts: self.asserts.or(lower.asserts),
        }
    }

    fn defaults(subcommand: &str) -> Settings {
        let common = Settings {
            model: Some("weibull:3,2".into()),
            kernel: Some("expk:0.5,1".into()),
            seed: Some(42),
            out: Some("./out".into()),
            dt: Some(0.01),
            ..Settings::default()
        };
        let specific = match subcommand {
            "theory" => Settings::default(),
            "simulate" => Settings {
                engine: Some("cluster".into()),
                horizon: Some(100.0),
                ..Settings::default()
            },
            other => {
                let (horizons, reps, v) = match other {
                    "lln" => (
                        vec![1e2, 1e3, 1e4],
                        50,
                        (1..=100).map(|i| f64::from(i) / 100.0).collect(),
                    ),
                    "clt" => (vec![500.0], 2000, vec![0.25, 0.5, 0.75, 1.0]),
                    "varfit" => (vec![200.0], 2000, vec![1.0]),
                    "edge" => (vec![250.0, 500.0, 1000.0, 2000.0], 200, vec![1.0]),
                    _ => (vec![500.0], 500, vec![1.0]),
                };
                Settings {
                    engine: Some("cluster".into()),
                    horizons: Some(horizons),
                    reps: Some(reps),
                    v: Some(v),
                    step: Some(1.0),
                    asserts: Some(Vec::new()),
                    ..Settings::default()
                }
            }
        };
        specific.or(common)
    }

    fn from_common(c: &CommonArgs) -> Settings {
        Settings {
            model: c.model.clone(),
            kernel: c.kernel.clone(),
            seed: c.seed,
            out: c.out.clone(),
            dt: c.dt,
            ..Settings::default()
        }
    }

    fn model(&self) -> Result<InterarrivalModel> {
        self.model.as_deref().unwrap_or_default().parse()
    }

    fn kernel(&self) -> Result<ExcitationKernel> {
        self.kernel.as_deref().unwrap_or_default().parse()
    }

    fn engine(&self) -> Result<Engine> {
        self.engine.as_deref().unwrap_or("cluster").parse()
    }

    fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.out.as_deref().unwrap_or("./out"))
    }
}

fn resolve(subcommand: &str, flags: Settings, config: Option<&Path>) -> Result<Settings> {
    let file = match config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str::<Settings>(&text)?
        }
        None => Settings::default(),
    };
    Ok(flags.or(file).or(Settings::defaults(subcommand)))
}

fn write_manifest(subcommand: &str, settings: &Settings, dir: &Path) -> Result<()> {
    let mut manifest = serde_json::to_value(settings)?;
    let obj = manifest
        .as_object_mut()
        .expect("settings serialize to an object");
    obj.insert("subcommand".into(), json!(subcommand));
    obj.insert("version".into(), json!(VERSION));
    write_json(dir, "manifest.json", &manifest)
}

/// A parsed `--assert` expression.
#[derive(Debug, Clone, PartialEq)]
struct Assertion {
    key: String,
    op: &'static str,
    threshold: f64,
}

impl Assertion {
    fn parse(s: &str) -> Result<Self> {
        for op in ["<=", ">=", "<", ">"] {
            if let Some((key, value)) = s.split_once(op) {
                let threshold = value.trim().parse::<f64>().map_err(|_| Error::Parse {
                    token: value.to_string(),
                    reason: "assertion threshold is not a number".into(),
                })?;
                return Ok(Self {
                    key: key.trim().to_string(),
                    op,
                    threshold,
                });
            }
        }
        Err(Error::Parse {
            token: s.to_string(),
            reason: "expected `<metric><op><value>` with op one of <, <=, >, >=".into(),
        })
    }

    fn holds(&self, value: f64) -> bool {
        match self.op {
            "<" => value < self.threshold,
            "<=" => value <= self.threshold,
            ">" => value > self.threshold,
            _ => value >= self.threshold,
        }
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn main_with_args(args: &[String]) -> u8 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("rhp: {e}");
            2
        }
    }
}

fn thread_pool(threads: Option<u64>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Domain("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n as usize);
    }
    builder
        .build()
        .map_err(|e| Error::Runtime(format!("cannot start worker pool: {e}")))
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Theory(args) => {
            let flags = Settings {
                horizon: args.horizon,
                ..Settings::from_common(&args.common)
            };
            let settings = resolve("theory", flags, args.common.config.as_deref())?;
            let pool = thread_pool(args.common.threads)?;
            pool.install(|| cmd_theory(&settings))
        }
        Command::Simulate(args) => {
            let flags = Settings {
                engine: args.engine.clone(),
                horizon: args.horizon,
                ..Settings::from_common(&args.common)
            };
            let settings = resolve("simulate", flags, args.common.config.as_deref())?;
            cmd_simulate(&settings)
        }
        Command::Lln(args) => experiment("lln", args),
        Command::Clt(args) => experiment("clt", args),
        Command::Varfit(args) => experiment("varfit", args),
        Command::Edge(args) => experiment("edge", args),
        Command::Agree(args) => experiment("agree", args),
    }
}

fn cmd_theory(settings: &Settings) -> Result<u8> {
    let model = settings.model()?;
    let kernel = settings.kernel()?;
    let dir = settings.out_dir();
    let constants = limit_constants(&model, &kernel)?;
    let dt = settings.dt.unwrap_or(0.01);
    // validate grids before any file is written
    let grids = match settings.horizon {
        Some(horizon) => Some((
            renewal_function(&model, horizon, dt)?,
            psi_function(&kernel, horizon, dt)?,
            mean_count(&model, &kernel, horizon, dt)?,
        )),
        None => None,
    };
    let rounded = json!({
        "m": round9(constants.m),
        "alpha": round9(constants.alpha),
        "lln_slope": round9(constants.lln_slope),
        "sigma2": round9(constants.sigma2),
        "sigma2_cluster": round9(constants.sigma2_cluster),
        "sigma2_immigration": round9(constants.sigma2_immigration),
        "ew": round9(constants.ew),
        "varw": round9(constants.varw),
    });
    write_json(&dir, "theory.json", &rounded)?;
    if let Some((phi, psi, mean)) = grids {
        for (name, grid) in [("phi.csv", phi), ("psi.csv", psi), ("mean_count.csv", mean)] {
            let mut out = create(&dir, name)?;
            grid.write_csv(&mut out)?;
            out.flush()?;
        }
    }
    write_manifest("theory", settings, &dir)?;
    println!("{}", serde_json::to_string_pretty(&rounded)?);
    Ok(0)
}

fn cmd_simulate(settings: &Settings) -> Result<u8> {
    let model = settings.model()?;
    let kernel = settings.kernel()?;
    let engine = settings.engine()?;
    let seed = settings.seed.unwrap_or(42);
    let horizon = settings.horizon.unwrap_or(100.0);
    let dir = settings.out_dir();
    let mut rng = RandomStream::new(seed, 0);
    let path = engine.simulate(&model, &kernel, horizon, &mut rng)?;
    let mut out = create(&dir, "path.csv")?;
    path.write_csv(&mut out)?;
    out.flush()?;
    let meta = PathMetadata {
        engine,
        seed,
        horizon,
        escaped_count: path.escaped_count(),
        model: model.to_string(),
        kernel: kernel.to_string(),
    };
    write_json(&dir, "path.json", &meta)?;
    write_manifest("simulate", settings, &dir)?;
    println!("{} events on [0, {horizon}] ({engine})", path.len());
    Ok(0)
}

fn experiment(name: &str, args: ExperimentArgs) -> Result<u8> {
    let flags = Settings {
        engine: args.engine.clone(),
        horizons: args.horizons.clone(),
        v: args.v.clone(),
        reps: args.reps,
        step: args.step,
        asserts: (!args.asserts.is_empty()).then(|| args.asserts.clone()),
        ..Settings::from_common(&args.common)
    };
    let settings = resolve(name, flags, args.common.config.as_deref())?;
    let asserts = settings
        .asserts
        .iter()
        .flatten()
        .map(|s| Assertion::parse(s))
        .collect::<Result<Vec<_>>>()?;
    let config = ExperimentConfig {
        model: settings.model()?,
        kernel: settings.kernel()?,
        engine: settings.engine()?,
        horizons: settings.horizons.clone().unwrap_or_default(),
        v_grid: settings.v.clone().unwrap_or_default(),
        replications: settings.reps.unwrap_or(0) as usize,
        seed: settings.seed.unwrap_or(42),
        dt: settings.dt.unwrap_or(0.01),
        time_step: settings.step.unwrap_or(1.0),
    };
    config.validate()?;
    let dir = settings.out_dir();
    let pool = thread_pool(args.common.threads)?;
    let metrics: BTreeMap<String, f64> = pool.install(|| -> Result<_> {
        Ok(match name {
            "lln" => {
                let r = run_lln(&config)?;
                r.write_to(&dir)?;
                r.metrics()
            }
            "clt" => {
                let r = run_clt(&config)?;
                r.write_to(&dir)?;
                r.metrics()
            }
            "varfit" => {
                let r = run_variance_fit(&config)?;
                r.write_to(&dir)?;
                r.metrics()
            }
            "edge" => {
                let r = run_edge_effects(&config)?;
                r.write_to(&dir)?;
                r.metrics()
            }
            _ => {
                let r = run_engine_agreement(&config)?;
                r.write_to(&dir)?;
                r.metrics()
            }
        })
    })?;
    write_manifest(name, &settings, &dir)?;
    for (k, v) in &metrics {
        println!("{k} = {v:.9}");
    }
    let mut failed = false;
    for a in &asserts {
        let value = *metrics.get(&a.key).ok_or_else(|| {
            Error::Domain(format!(
                "unknown metric `{}` for {name}; available: {}",
                a.key,
                metrics.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })?;
        let ok = a.holds(value);
        println!(
            "assert {}{}{}: {} (value {value:.9})",
            a.key,
            a.op,
            a.threshold,
            if ok { "PASS" } else { "FAIL" }
        );
        failed |= !ok;
    }
    Ok(u8::from(failed))
}

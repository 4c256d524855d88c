//! Experiment runner behind the `isl` binary.
//!
//! `isl <experiment> [--config FILE] [--seed N] [--out DIR] [flags]` resolves
//! parameters (defaults, then the config file's `params`, then flags), runs the
//! experiment, writes its CSV/JSON files and finally `manifest.json`.
//! `isl report <manifest>...` re-verifies the digests and checks headline
//! metrics against the acceptance table.
//!
//! Exit codes: 0 success, 1 experiment or acceptance failure, 2 usage,
//! configuration or output-directory error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::cantor;
use crate::dynamics::{self, FlowSystem, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::{self, BoundingBox, PointCloud, TimeSeries};
use crate::io::{to_json_bytes, write_echo, Echo};
use crate::liouville::{self, DensityField, Grid};
use crate::qstrings::{self, BitString, PauliAxis, StringOperator};
use crate::seed::SeedStream;
use crate::symbolic::{self, LabelRule, Partition, SampleOptions};

pub const EXPERIMENTS: &[&str] =
    &["attractor", "dimension", "cantor", "symbolic", "qstrings", "liouville", "embed", "classicality"];

const SEED_ENV: &str = "ISL_SEED";

#[derive(Parser, Debug)]
#[command(name = "isl", version, about = "Invariant-set experiments: dynamics, geometry, Cantor arithmetic, symbolic labels, quaternionic strings, Liouville transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// JSON config `{experiment, params, seed, output_dir}`; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (falls back to the config, then ISL_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate a built-in flow and measure its Lyapunov spectrum.
    Attractor {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: AttractorArgs,
    },
    /// Box-counting and correlation dimensions plus sparseness probes.
    Dimension {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: DimensionArgs,
    },
    /// Ternary-digit perturbation and counterfactual-line experiments.
    Cantor {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: CantorArgs,
    },
    /// Neighbourhood sample spaces and their intertwining profile.
    Symbolic {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: SymbolicArgs,
    },
    /// Quaternion group, Pauli and phase-cycle checks on bit strings.
    Qstrings {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: QstringsArgs,
    },
    /// Density transport, linearity and co-moving volumes.
    Liouville {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: LiouvilleArgs,
    },
    /// Delay-embedding reconstruction versus the full-state cloud.
    Embed {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: EmbedArgs,
    },
    /// Moments of time-averaged observables.
    Classicality {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: ClassicalityArgs,
    },
    /// Verify manifests and compare their metrics with the acceptance table.
    Report {
        manifests: Vec<PathBuf>,
        /// Also write the consolidated JSON here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Failure(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_)
            | Error::Cfl { .. }
            | Error::InsufficientData { .. }
            | Error::Io(_)
            | Error::Json(_) => CliError::Usage(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match cli.command {
        Command::Report { manifests, json } => report(&manifests, json.as_deref()),
        Command::Attractor { common, args } => execute("attractor", &common, args, attractor),
        Command::Dimension { common, args } => execute("dimension", &common, args, dimension),
        Command::Cantor { common, args } => execute("cantor", &common, args, cantor_run),
        Command::Symbolic { common, args } => execute("symbolic", &common, args, symbolic_run),
        Command::Qstrings { common, args } => execute("qstrings", &common, args, qstrings_run),
        Command::Liouville { common, args } => execute("liouville", &common, args, liouville_run),
        Command::Embed { common, args } => execute("embed", &common, args, embed),
        Command::Classicality { common, args } => execute("classicality", &common, args, classicality),
    };
    match outcome {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("isl: {msg}");
            2
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("isl: {msg}");
            1
        }
    }
}

// ---------------------------------------------------------------- config

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    experiment: Option<String>,
    #[serde(default)]
    params: Map<String, Value>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
}

fn load_config(path: &Path) -> CliResult<ConfigFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("malformed config {}: {e}", path.display())))
}

/// Flag values win over config params; the result still has unset fields.
fn merge_args<A: Serialize + DeserializeOwned>(flags: &A, config: &Map<String, Value>) -> CliResult<A> {
    let mut merged = config.clone();
    match serde_json::to_value(flags).map_err(|e| usage(e.to_string()))? {
        Value::Object(given) => merged.extend(given),
        _ => unreachable!("argument structs serialise to objects"),
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| usage(format!("bad params: {e}")))
}

fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> CliResult<u64> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| usage(format!("{SEED_ENV}={v:?} is not a u64"))),
        Err(_) => Ok(0),
    }
}

/// Everything an experiment produced besides its files.
#[derive(Default)]
struct Outcome {
    metrics: BTreeMap<String, f64>,
    failure: Option<String>,
}

impl Outcome {
    fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.insert(name.into(), value);
    }
}

trait Experiment: Sized {
    type Params: Serialize;
    fn resolve(self) -> CliResult<Self::Params>;
}

fn execute<A, F>(name: &str, common: &Common, flags: A, body: F) -> CliResult<i32>
where
    A: Experiment + Serialize + DeserializeOwned,
    F: FnOnce(&A::Params, &mut Writer) -> CliResult<Outcome>,
{
    let start = Instant::now();
    let config = match &common.config {
        Some(path) => load_config(path)?,
        None => ConfigFile::default(),
    };
    if let Some(exp) = &config.experiment {
        if !EXPERIMENTS.contains(&exp.as_str()) {
            return Err(usage(format!("unknown experiment {exp:?} in config")));
        }
        if exp != name {
            return Err(usage(format!("config is for experiment {exp:?}, not {name:?}")));
        }
    }
    let seed = resolve_seed(common.seed, config.seed)?;
    let params = merge_args(&flags, &config.params)?.resolve()?;
    let params_value = serde_json::to_value(&params).map_err(|e| usage(e.to_string()))?;
    let dir = common
        .out
        .clone()
        .or(config.output_dir)
        .unwrap_or_else(|| PathBuf::from("isl-out").join(name));
    std::fs::create_dir_all(&dir)
        .map_err(|e| usage(format!("cannot create output directory {}: {e}", dir.display())))?;
    let mut writer = Writer { dir, echo: Echo { seed, params: params_value }, files: Vec::new() };
    let outcome = body(&params, &mut writer)?;
    let manifest = json!({
        "tool": "isl",
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": name,
        "seed": seed,
        "params": writer.echo.params,
        "output_dir": writer.dir.display().to_string(),
        "duration_seconds": start.elapsed().as_secs_f64(),
        "files": writer.files,
        "metrics": outcome.metrics,
    });
    let path = writer.dir.join("manifest.json");
    std::fs::write(&path, to_json_bytes(&manifest)?)
        .map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
    for (k, v) in &outcome.metrics {
        println!("{name}: {k} = {v}");
    }
    match outcome.failure {
        Some(msg) => Err(CliError::Failure(msg)),
        None => Ok(0),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FileEntry {
    path: String,
    sha256: String,
    bytes: usize,
}

/// Writes output files and records their digests.
struct Writer {
    dir: PathBuf,
    echo: Echo,
    files: Vec<FileEntry>,
}

impl Writer {
    fn put(&mut self, name: &str, bytes: Vec<u8>) -> CliResult<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, &bytes).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(FileEntry {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
            bytes: bytes.len(),
        });
        Ok(())
    }

    fn csv(&mut self, name: &str, body: impl FnOnce(&mut Vec<u8>, &Echo) -> Result<()>) -> CliResult<()> {
        let mut buf = Vec::new();
        body(&mut buf, &self.echo)?;
        self.put(name, buf)
    }

    /// JSON object stamped with `seed` and `params`.
    fn json(&mut self, name: &str, value: &impl Serialize) -> CliResult<()> {
        let mut v = serde_json::to_value(value).map_err(Error::from)?;
        if !v.is_object() {
            v = json!({ "result": v });
        }
        let obj = v.as_object_mut().expect("object");
        obj.insert("seed".into(), json!(self.echo.seed));
        obj.insert("params".into(), self.echo.params.clone());
        self.put(name, to_json_bytes(&v)?)
    }

    fn seed(&self) -> u64 {
        self.echo.seed
    }
}

fn builtin(name: &str) -> CliResult<FlowSystem> {
    FlowSystem::builtin(name)
        .ok_or_else(|| usage(format!("unknown system {name:?}; known: {}", dynamics::BUILTIN_NAMES.join(", "))))
}

fn positive(name: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(usage(format!("{name} must be positive")))
    }
}

/// Lorenz-type orbit settled onto its attractor, sampled every `stride` steps.
fn sampled_orbit(system: &FlowSystem, dt: f64, transient: usize, samples: usize, stride: usize) -> Result<Vec<Vec<f64>>> {
    let start = dynamics::advance(system, &vec![1.0; system.dim()], dt, transient)?;
    let traj = dynamics::integrate(system, &start, dt, samples.saturating_sub(1) * stride)?;
    Ok(traj.points.into_iter().step_by(stride).collect())
}

// ---------------------------------------------------------------- attractor

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttractorArgs {
    /// Built-in system name.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    system: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    /// Steps written to trajectory.csv.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<usize>,
    /// Write every n-th trajectory point.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    stride: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    transient: Option<usize>,
    /// Initial state; all ones by default.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    x0: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lyapunov_steps: Option<usize>,
}

#[derive(Debug, Serialize)]
struct AttractorParams {
    system: String,
    dt: f64,
    steps: usize,
    stride: usize,
    transient: usize,
    x0: Vec<f64>,
    lyapunov_steps: usize,
}

impl Experiment for AttractorArgs {
    type Params = AttractorParams;
    fn resolve(self) -> CliResult<AttractorParams> {
        let system = self.system.unwrap_or_else(|| "lorenz".into());
        let sys = builtin(&system)?;
        let x0 = self.x0.unwrap_or_else(|| vec![1.0; sys.dim()]);
        if x0.len() != sys.dim() {
            return Err(usage(format!("x0 needs {} components", sys.dim())));
        }
        Ok(AttractorParams {
            dt: positive("dt", self.dt.unwrap_or_else(|| sys.default_dt()))?,
            system,
            steps: self.steps.unwrap_or(20_000),
            stride: self.stride.unwrap_or(1).max(1),
            transient: self.transient.unwrap_or(dynamics::DEFAULT_TRANSIENT),
            x0,
            lyapunov_steps: self.lyapunov_steps.unwrap_or(2_000_000),
        })
    }
}

fn attractor(p: &AttractorParams, out: &mut Writer) -> CliResult<Outcome> {
    let sys = builtin(&p.system)?;
    let start = dynamics::advance(&sys, &p.x0, p.dt, p.transient)?;
    let traj = dynamics::integrate(&sys, &start, p.dt, p.steps)?;
    let thinned = Trajectory {
        system_name: traj.system_name.clone(),
        dt: p.dt * p.stride as f64,
        points: traj.points.into_iter().step_by(p.stride).collect(),
    };
    out.csv("trajectory.csv", |w, e| thinned.write_csv(w, Some(e)))?;
    let spectrum = dynamics::lyapunov_spectrum(&sys, &start, p.dt, p.lyapunov_steps, 0)?;
    out.json(
        "lyapunov.json",
        &json!({
            "exponents": spectrum.exponents,
            "sum": spectrum.sum(),
            "mean_divergence": spectrum.mean_divergence,
            "time": spectrum.time,
            "dt": spectrum.dt,
            "n_steps": spectrum.n_steps,
        }),
    )?;
    let mut o = Outcome::default();
    o.metric("lambda1", spectrum.leading());
    o.metric("exponent_sum", spectrum.sum());
    o.metric("mean_divergence", spectrum.mean_divergence);
    if p.system == "lorenz" {
        o.metric("lorenz_lambda1", spectrum.leading());
        o.metric("lorenz_exponent_sum", spectrum.sum());
    }
    Ok(o)
}

// ---------------------------------------------------------------- dimension

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DimensionArgs {
    /// cantor, dust, segment, square or lorenz.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    source: Option<String>,
    /// Construction depth for cantor and dust.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    depth: Option<usize>,
    /// Cloud size for segment, square and lorenz.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    points: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    scale_min: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    scale_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_scales: Option<usize>,
    /// Sparseness probes (0 skips probing).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    probes: Option<usize>,
    /// Largest probe radius as a fraction of the cloud extent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    halvings: Option<usize>,
}

#[derive(Debug, Serialize)]
struct DimensionParams {
    source: String,
    depth: usize,
    points: usize,
    scale_min: f64,
    scale_max: f64,
    n_scales: usize,
    probes: usize,
    epsilon_max: f64,
    halvings: usize,
}

impl Experiment for DimensionArgs {
    type Params = DimensionParams;
    fn resolve(self) -> CliResult<DimensionParams> {
        let source = self.source.unwrap_or_else(|| "cantor".into());
        let (depth, points, lo, hi, n) = match source.as_str() {
            "cantor" => (10, 0, 2f64.powi(-12), 0.25, 11),
            "dust" => (7, 0, 2f64.powi(-10), 0.25, 9),
            "segment" => (0, 10_000, 1e-3, 1e-1, 8),
            "square" => (0, 100_000, 0.02, 0.2, 6),
            "lorenz" => (0, 100_000, 0.5, 8.0, 5),
            other => return Err(usage(format!("unknown dimension source {other:?}"))),
        };
        Ok(DimensionParams {
            source,
            depth: self.depth.unwrap_or(depth),
            points: self.points.unwrap_or(points),
            scale_min: self.scale_min.unwrap_or(lo),
            scale_max: self.scale_max.unwrap_or(hi),
            n_scales: self.n_scales.unwrap_or(n),
            probes: self.probes.unwrap_or(10_000),
            epsilon_max: self.epsilon_max.unwrap_or(0.05),
            halvings: self.halvings.unwrap_or(3),
        })
    }
}

fn dimension_cloud(p: &DimensionParams, seed: u64) -> CliResult<PointCloud> {
    Ok(match p.source.as_str() {
        "cantor" => cantor::cantor_cloud(p.depth),
        "dust" => cantor::cantor_dust(p.depth),
        "segment" => {
            if p.points < 2 {
                return Err(usage("segment needs at least 2 points"));
            }
            let n = p.points;
            PointCloud::from_scalars(&(0..n).map(|i| i as f64 / (n - 1) as f64).collect::<Vec<_>>())?
        }
        "square" => {
            let mut rng = SeedStream::new(seed, "dimension/square").rng();
            PointCloud::new(2, (0..2 * p.points).map(|_| rng.random::<f64>()).collect())?
        }
        "lorenz" => {
            let sys = FlowSystem::lorenz_canonical();
            PointCloud::from_points(&sampled_orbit(&sys, sys.default_dt(), dynamics::DEFAULT_TRANSIENT, p.points, 10)?)?
        }
        other => return Err(usage(format!("unknown dimension source {other:?}"))),
    })
}

fn dimension(p: &DimensionParams, out: &mut Writer) -> CliResult<Outcome> {
    let cloud = dimension_cloud(p, out.seed())?;
    let boxes = geometry::box_counting_dimension(&cloud, p.scale_min, p.scale_max, p.n_scales)?;
    let correlation = if cloud.len() >= 1000 {
        Some(geometry::correlation_dimension(&cloud, &geometry::relative_radii(&cloud, 1e-3, 0.1, 12))?)
    } else {
        None
    };
    let mut o = Outcome::default();
    o.metric(format!("box_dimension_{}", p.source), boxes.value);
    if let Some(c) = &correlation {
        o.metric(format!("correlation_dimension_{}", p.source), c.value);
    }
    out.json(
        "dimension.json",
        &json!({ "source": p.source, "n_points": cloud.len(), "box_counting": boxes, "correlation": correlation }),
    )?;
    if p.probes > 0 {
        let bbox = cloud.bounding_box().expect("non-empty cloud");
        let eps0 = p.epsilon_max * cloud.extent();
        let eps: Vec<f64> = (0..=p.halvings).map(|k| eps0 / 2f64.powi(k as i32)).collect();
        let hits = geometry::sparseness_probe(&cloud, p.probes, &eps, &bbox, out.seed())?;
        out.csv("sparseness.csv", |w, e| {
            write_echo(w, e)?;
            writeln!(w, "epsilon,hit_fraction")?;
            for (e, h) in eps.iter().zip(&hits) {
                writeln!(w, "{e},{h}")?;
            }
            Ok(())
        })?;
        if hits.iter().all(|h| *h > 0.0) && hits.len() > 1 {
            let ratio = (hits[hits.len() - 1] / hits[0]).powf(1.0 / (hits.len() - 1) as f64);
            o.metric(format!("sparseness_halving_ratio_{}", p.source), ratio);
        }
    }
    Ok(o)
}

// ---------------------------------------------------------------- cantor

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CantorArgs {
    /// Ternary digits for the counterfactual experiment.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    depth: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gradients: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    points: Option<usize>,
    /// Trials per depth of the perturbation experiment.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    perturbation_depths: Option<Vec<usize>>,
}

#[derive(Debug, Serialize)]
struct CantorParams {
    depth: usize,
    gradients: usize,
    points: usize,
    trials: usize,
    perturbation_depths: Vec<usize>,
}

impl Experiment for CantorArgs {
    type Params = CantorParams;
    fn resolve(self) -> CliResult<CantorParams> {
        Ok(CantorParams {
            depth: self.depth.unwrap_or(10),
            gradients: self.gradients.unwrap_or(1000),
            points: self.points.unwrap_or(1000),
            trials: self.trials.unwrap_or(100_000),
            perturbation_depths: self.perturbation_depths.unwrap_or_else(|| (1..=8).collect()),
        })
    }
}

fn cantor_run(p: &CantorParams, out: &mut Writer) -> CliResult<Outcome> {
    let seed = out.seed();
    let mut o = Outcome::default();
    let cf = cantor::line_intersection_experiment(p.depth, p.gradients, p.points, seed)?;
    out.json("counterfactual.json", &cf)?;
    out.csv("counterfactual_details.csv", |w, e| cf.write_details_csv(w, Some(e)))?;
    o.metric(format!("intersection_fraction_d{}", p.depth), cf.intersection_fraction);
    o.metric(format!("empty_set_rate_d{}", p.depth), cf.empty_set_rate);

    let axis = cantor::axis_direction_counterexample(p.depth, p.points, seed)?;
    out.json("axis_counterexample.json", &axis)?;
    o.metric("axis_intersection_fraction", axis.intersection_fraction);

    let perturbation = p
        .perturbation_depths
        .iter()
        .map(|&d| cantor::perturbation_experiment(d, p.trials, seed))
        .collect::<Result<Vec<_>>>()?;
    out.csv("perturbation.csv", |w, e| {
        write_echo(w, e)?;
        writeln!(w, "depth,n_trials,exceptional_fraction")?;
        for r in &perturbation {
            writeln!(w, "{},{},{}", r.depth, r.n_trials, r.exceptional_fraction)?;
        }
        Ok(())
    })?;
    out.json("perturbation.json", &json!({ "results": perturbation }))?;
    for r in &perturbation {
        o.metric(format!("exceptional_fraction_d{}", r.depth), r.exceptional_fraction);
    }
    let mut by_depth: Vec<_> = perturbation.iter().map(|r| (r.depth, r.exceptional_fraction)).collect();
    by_depth.sort_by_key(|r| r.0);
    if by_depth.len() > 1 {
        let monotone = by_depth.windows(2).all(|w| w[1].1 < w[0].1);
        o.metric("exceptional_monotone", monotone as u8 as f64);
    }
    Ok(o)
}

// ---------------------------------------------------------------- symbolic

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SymbolicArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    system: Option<String>,
    /// boundary or interior; ignored when --point is given.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    region: Option<String>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    point: Option<Vec<f64>>,
    /// Strictly descending neighbourhood radii.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    radii: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_traj: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    /// endpoint or quasi_stationary.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    rule: Option<String>,
    /// Final-window length in steps for the quasi-stationary rule.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    window: Option<usize>,
}

#[derive(Debug, Serialize)]
struct SymbolicParams {
    system: String,
    region: String,
    point: Vec<f64>,
    radii: Vec<f64>,
    n_traj: usize,
    horizon: f64,
    dt: f64,
    rule: String,
    window: usize,
}

impl Experiment for SymbolicArgs {
    type Params = SymbolicParams;
    fn resolve(self) -> CliResult<SymbolicParams> {
        let system = self.system.unwrap_or_else(|| "lorenz".into());
        let sys = builtin(&system)?;
        let (region, point, horizon) = match (self.point, self.region.as_deref()) {
            (Some(pt), _) => ("custom".to_string(), pt, 2.0),
            (None, None | Some("boundary")) if system == "lorenz" => ("boundary".into(), vec![0.0, 0.0, 20.0], 2.0),
            (None, Some("interior")) if system == "lorenz" => ("interior".into(), vec![-8.0, -8.0, 27.0], 0.5),
            (None, r) => return Err(usage(format!("no preset region {r:?} for {system}; pass --point"))),
        };
        if point.len() != sys.dim() {
            return Err(usage(format!("point needs {} components", sys.dim())));
        }
        let rule = self.rule.unwrap_or_else(|| "endpoint".into());
        if rule != "endpoint" && rule != "quasi_stationary" {
            return Err(usage(format!("unknown label rule {rule:?}")));
        }
        Ok(SymbolicParams {
            dt: positive("dt", self.dt.unwrap_or_else(|| sys.default_dt()))?,
            system,
            region,
            point,
            radii: self.radii.unwrap_or_else(|| vec![1e-1, 1e-2, 1e-3, 1e-4]),
            n_traj: self.n_traj.unwrap_or(1000),
            horizon: self.horizon.unwrap_or(horizon),
            rule,
            window: self.window.unwrap_or(200),
        })
    }
}

fn symbolic_run(p: &SymbolicParams, out: &mut Writer) -> CliResult<Outcome> {
    let sys = builtin(&p.system)?;
    let partition = Partition::lorenz_lobes();
    let options = SampleOptions {
        dt: Some(p.dt),
        rule: if p.rule == "endpoint" {
            LabelRule::Endpoint
        } else {
            LabelRule::QuasiStationary { window: p.window }
        },
    };
    let seed = out.seed();
    let profile =
        symbolic::intertwining_profile_with(&sys, &partition, &p.point, &p.radii, p.n_traj, p.horizon, seed, &options)?;
    out.csv("profile.csv", |w, e| {
        write_echo(w, e)?;
        writeln!(w, "radius,p_A,p_B,minority_fraction,n_labelled")?;
        for q in &profile {
            writeln!(w, "{},{},{},{},{}", q.radius, q.p_a, 1.0 - q.p_a, q.minority_fraction, q.n_labelled)?;
        }
        Ok(())
    })?;
    // the smallest-radius space again, seeded exactly as inside the profile
    let k = p.radii.len() - 1;
    let smallest = symbolic::neighborhood_sample_space_with(
        &sys,
        &partition,
        &p.point,
        p.radii[k],
        p.n_traj,
        p.horizon,
        seed.wrapping_add(k as u64),
        &options,
    )?;
    out.csv("sample_space.csv", |w, e| smallest.write_csv(w, Some(e)))?;
    let zero = symbolic::neighborhood_sample_space_with(&sys, &partition, &p.point, 0.0, p.n_traj, p.horizon, seed, &options)?;
    let zero_probs = symbolic::outcome_probabilities(&zero)?;
    let unanimous = zero_probs.minority() == 0.0;
    out.json(
        "summary.json",
        &json!({ "profile": profile, "smallest_radius": smallest.summary()?, "zero_radius": zero.summary()? }),
    )?;
    let mut o = Outcome::default();
    let min_minority = profile.iter().map(|q| q.minority_fraction).fold(f64::INFINITY, f64::min);
    o.metric(format!("min_minority_fraction_{}", p.region), min_minority);
    o.metric(format!("smallest_radius_minority_fraction_{}", p.region), profile[k].minority_fraction);
    o.metric("zero_radius_unanimous", unanimous as u8 as f64);
    Ok(o)
}

// ---------------------------------------------------------------- qstrings

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QstringsArgs {
    /// Exit with status 1 if any relation fails.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    verify: bool,
    /// String length for the exhaustive checks (a multiple of 4, at most 16).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    length: Option<usize>,
}

#[derive(Debug, Serialize)]
struct QstringsParams {
    verify: bool,
    length: usize,
}

impl Experiment for QstringsArgs {
    type Params = QstringsParams;
    fn resolve(self) -> CliResult<QstringsParams> {
        let length = self.length.unwrap_or(4);
        if length == 0 || length % 4 != 0 || length > 16 {
            return Err(usage("length must be 4, 8, 12 or 16"));
        }
        Ok(QstringsParams { verify: self.verify, length })
    }
}

#[derive(Debug, Default, Serialize)]
struct CheckTally {
    checked: usize,
    failures: Vec<String>,
}

impl CheckTally {
    /// Compares two operators on every string.
    fn same_action(&mut self, label: &str, lhs: &StringOperator, rhs: &StringOperator, strings: &[BitString]) {
        for s in strings {
            self.checked += 1;
            if lhs.apply(s) != rhs.apply(s) {
                self.failures.push(format!("{label} on {s}"));
            }
        }
    }
}

fn algebra_checks(strings: &[BitString]) -> Result<(CheckTally, CheckTally, CheckTally, Vec<f64>)> {
    let id = StringOperator::identity();
    let neg = StringOperator::negate();
    let (i, e1, e2, e3) = (StringOperator::i(), StringOperator::e1(), StringOperator::e2(), StringOperator::e3());
    let mut relations = CheckTally::default();
    relations.same_action("i.i = -1", &qstrings::compose(&[i.clone(), i.clone()])?, &neg, strings);
    for (name, e) in [("e1", &e1), ("e2", &e2), ("e3", &e3)] {
        relations.same_action(&format!("{name}.{name} = -1"), &qstrings::compose(&[e.clone(), e.clone()])?, &neg, strings);
        relations.same_action(
            &format!("i.{name} = {name}.i"),
            &qstrings::compose(&[i.clone(), e.clone()])?,
            &qstrings::compose(&[e.clone(), i.clone()])?,
            strings,
        );
    }
    relations.same_action("e1.e2.e3 = -1", &qstrings::compose(&[e1.clone(), e2.clone(), e3.clone()])?, &neg, strings);

    let mut pauli = CheckTally::default();
    let axes = [("x", qstrings::pauli(PauliAxis::X)), ("y", qstrings::pauli(PauliAxis::Y)), ("z", qstrings::pauli(PauliAxis::Z))];
    for (a, sa) in &axes {
        pauli.same_action(&format!("s{a}^2 = 1"), &qstrings::compose(&[sa.clone(), sa.clone()])?, &id, strings);
        for (b, sb) in &axes {
            if a < b {
                pauli.same_action(
                    &format!("s{a}s{b} = -s{b}s{a}"),
                    &qstrings::compose(&[sa.clone(), sb.clone()])?,
                    &qstrings::compose(&[neg.clone(), sb.clone(), sa.clone()])?,
                    strings,
                );
            }
        }
    }

    let mut phase = CheckTally::default();
    let mut quadrature = Vec::with_capacity(strings.len());
    for s in strings {
        let orbit = qstrings::phase_cycle(s, 4);
        phase.checked += 1;
        if orbit[4] != *s || orbit[1..4].iter().any(|t| t == s) {
            phase.failures.push(format!("period of {s} is not 4"));
        }
        let r: Vec<f64> = orbit[..4].iter().map(|t| qstrings::correlation(s, t)).collect::<Result<_>>()?;
        let c = r[1];
        phase.checked += 1;
        if r[0] != 1.0 || r[2] != -1.0 || r[3] != -c {
            phase.failures.push(format!("correlations of {s} are {r:?}"));
        }
        quadrature.push(c);
    }
    Ok((relations, pauli, phase, quadrature))
}

fn qstrings_run(p: &QstringsParams, out: &mut Writer) -> CliResult<Outcome> {
    let q8 = qstrings::verify_q8()?;
    let strings = BitString::all_of_length(p.length)?;
    let (relations, pauli, phase, quadrature) = algebra_checks(&strings)?;
    out.json(
        "q8_report.json",
        &json!({
            "order": q8.order,
            "center": q8.center,
            "relations_checked": q8.relations_checked,
            "failures": q8.failures,
            "string_length": p.length,
            "string_relations": relations,
            "pauli": pauli,
            "phase_cycle": phase,
            "quadrature_constants": quadrature,
        }),
    )?;
    out.csv("q8_table.csv", |w, e| {
        write_echo(w, e)?;
        q8.write_table_csv(w)
    })?;
    out.csv("phase_cycle.csv", |w, e| {
        write_echo(w, e)?;
        writeln!(w, "string,e1,e1^2,e1^3,e1^4")?;
        for s in &strings {
            let orbit = qstrings::phase_cycle(s, 4);
            let cols: Vec<String> = orbit.iter().map(|t| t.to_string()).collect();
            writeln!(w, "{}", cols.join(","))?;
        }
        Ok(())
    })?;
    let mut o = Outcome::default();
    let q8_failures = q8.failures.len() + relations.failures.len();
    o.metric("q8_order", q8.order as f64);
    o.metric("q8_failures", q8_failures as f64);
    o.metric("pauli_failures", pauli.failures.len() as f64);
    o.metric("phase_failures", phase.failures.len() as f64);
    let total = q8_failures + pauli.failures.len() + phase.failures.len();
    if p.verify && (total > 0 || q8.order != 8) {
        o.failure = Some(format!("quaternionic verification failed with {total} failures"));
    }
    Ok(o)
}

// ---------------------------------------------------------------- liouville

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LiouvilleArgs {
    /// rotation, uniform_divergence, cubic_shear or zero.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    flow: Option<String>,
    /// Cells per axis of the square grid.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    cells: Option<usize>,
    /// Grid covers [-half_width, half_width]^2.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    half_width: Option<f64>,
    /// Evolution time; one revolution for rotation.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    time: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    courant: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    blob: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    width: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    linearity_steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    comoving_time: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    comoving_side: Option<f64>,
}

#[derive(Debug, Serialize)]
struct LiouvilleParams {
    flow: String,
    cells: usize,
    half_width: f64,
    time: f64,
    courant: f64,
    blob: Vec<f64>,
    width: f64,
    linearity_steps: usize,
    comoving_time: f64,
    comoving_side: f64,
}

fn planar_flow(name: &str) -> CliResult<FlowSystem> {
    match name {
        "rotation" => Ok(FlowSystem::rigid_rotation()),
        "uniform_divergence" => Ok(FlowSystem::uniform_divergence()),
        "cubic_shear" => Ok(FlowSystem::cubic_shear()),
        "zero" => Ok(FlowSystem::zero_flow(2)),
        other => Err(usage(format!("unknown planar flow {other:?}"))),
    }
}

impl Experiment for LiouvilleArgs {
    type Params = LiouvilleParams;
    fn resolve(self) -> CliResult<LiouvilleParams> {
        let flow = self.flow.unwrap_or_else(|| "rotation".into());
        planar_flow(&flow)?;
        let (time, blob, width, half_width) = match flow.as_str() {
            "rotation" => (std::f64::consts::TAU, vec![1.5, 0.0], 0.3, 4.0),
            "uniform_divergence" => (1.0, vec![0.0, 0.0], 0.1, 2.0),
            _ => (1.0, vec![0.2, -0.1], 0.2, 1.0),
        };
        let courant = self.courant.unwrap_or(liouville::CFL_MAX);
        if !(courant > 0.0 && courant <= liouville::CFL_MAX) {
            return Err(usage(format!("courant must lie in (0, {}]", liouville::CFL_MAX)));
        }
        Ok(LiouvilleParams {
            flow,
            cells: self.cells.unwrap_or(128),
            half_width: positive("half_width", self.half_width.unwrap_or(half_width))?,
            time: self.time.unwrap_or(time),
            courant,
            blob: self.blob.unwrap_or(blob),
            width: positive("width", self.width.unwrap_or(width))?,
            linearity_steps: self.linearity_steps.unwrap_or(30),
            comoving_time: self.comoving_time.unwrap_or(0.5),
            comoving_side: positive("comoving_side", self.comoving_side.unwrap_or(1e-3))?,
        })
    }
}

/// Step count and dt that land exactly on `time` at the requested Courant number.
fn schedule(system: &FlowSystem, grid: &Grid, time: f64, courant: f64) -> (usize, f64) {
    let per_unit = liouville::courant_number(system, grid, 1.0);
    if time <= 0.0 {
        return (0, 1.0);
    }
    if per_unit == 0.0 {
        return (1, time);
    }
    let n = (time * per_unit / courant).ceil().max(1.0) as usize;
    (n, time / n as f64)
}

fn liouville_run(p: &LiouvilleParams, out: &mut Writer) -> CliResult<Outcome> {
    let sys = planar_flow(&p.flow)?;
    let grid = Grid::cube(2, p.cells, -p.half_width, p.half_width)?;
    let rho = DensityField::gaussian(grid.clone(), &p.blob, p.width)?;
    let (steps, dt) = schedule(&sys, &grid, p.time, p.courant);
    let after = liouville::evolve_density(&sys, &rho, dt, steps)?;
    let summary = liouville::EvolutionSummary::new(&sys, &rho, &after, dt, steps);
    out.csv("density.csv", |w, e| after.write_csv(w, Some(e)))?;
    let c0 = rho.center_of_mass();
    let c1 = after.center_of_mass();
    let shift_cells = match (c0, c1) {
        (Some(a), Some(b)) => Some(a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt() / grid.spacing[0]),
        _ => None,
    };
    out.json(
        "summary.json",
        &json!({
            "mass_initial": summary.mass_initial,
            "mass_final": summary.mass_final,
            "leaked_mass": summary.leaked_mass,
            "cfl": summary.cfl,
            "steps": summary.steps,
            "dt": dt,
            "peak_initial": rho.max_value(),
            "peak_final": after.max_value(),
            "center_shift_cells": shift_cells,
        }),
    )?;

    // linearity on the nonlinear shear flow with seeded random blobs and weights
    let shear = FlowSystem::cubic_shear();
    let lgrid = Grid::cube(2, 48, -1.0, 1.0)?;
    let mut rng = SeedStream::new(out.seed(), "liouville/linearity").rng();
    let blob = |rng: &mut rand_chacha::ChaCha8Rng| -> Result<DensityField> {
        let c = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
        DensityField::gaussian(lgrid.clone(), &c, rng.random_range(0.1..0.3))
    };
    let (r1, r2) = (blob(&mut rng)?, blob(&mut rng)?);
    let (alpha, beta) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    let ldt = p.courant / liouville::courant_number(&shear, &lgrid, 1.0);
    let lin = liouville::linearity_check(&shear, &r1, &r2, alpha, beta, ldt, p.linearity_steps)?;
    out.json("linearity.json", &json!({ "flow": "cubic_shear", "alpha": alpha, "beta": beta, "report": lin }))?;

    // co-moving volume of a small cube near the Lorenz attractor
    let lorenz = FlowSystem::lorenz_canonical();
    let corner = dynamics::settle(&lorenz, &[1.0, 1.0, 1.0])?;
    let region = BoundingBox::new(corner.clone(), corner.iter().map(|x| x + p.comoving_side).collect())?;
    let ratio = liouville::comoving_volume(&lorenz, &region, p.comoving_time, 1e-4)?;
    let expected = (-41.0 / 3.0 * p.comoving_time).exp();
    let comoving_error = (ratio / expected - 1.0).abs();
    out.json(
        "comoving.json",
        &json!({ "system": "lorenz", "corner": corner, "side": p.comoving_side, "t": p.comoving_time,
                 "ratio": ratio, "expected": expected, "relative_error": comoving_error }),
    )?;

    let mut o = Outcome::default();
    o.metric("mass_relative_error", (summary.mass_final - summary.mass_initial).abs() / summary.mass_initial);
    o.metric("linearity_relative_deviation", lin.relative_deviation);
    o.metric("lorenz_comoving_relative_error", comoving_error);
    if let Some(s) = shift_cells {
        o.metric(format!("{}_center_shift_cells", p.flow), s);
    }
    Ok(o)
}

// ---------------------------------------------------------------- embed

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbedArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    system: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    /// Integration steps between samples.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    stride: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    component: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    /// Delay in samples; 0 selects it from the autocorrelation.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tau: Option<usize>,
    /// Correlation radii span, as fractions of each cloud's diagonal.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    radius_lo: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    radius_hi: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_radii: Option<usize>,
}

#[derive(Debug, Serialize)]
struct EmbedParams {
    system: String,
    samples: usize,
    stride: usize,
    dt: f64,
    component: usize,
    m: usize,
    tau: usize,
    radius_lo: f64,
    radius_hi: f64,
    n_radii: usize,
}

impl Experiment for EmbedArgs {
    type Params = EmbedParams;
    fn resolve(self) -> CliResult<EmbedParams> {
        let system = self.system.unwrap_or_else(|| "lorenz".into());
        let sys = builtin(&system)?;
        let component = self.component.unwrap_or(0);
        if component >= sys.dim() {
            return Err(usage("component out of range"));
        }
        Ok(EmbedParams {
            dt: sys.default_dt(),
            system,
            samples: self.samples.unwrap_or(100_000),
            stride: self.stride.unwrap_or(1).max(1),
            component,
            m: self.m.unwrap_or(3),
            tau: self.tau.unwrap_or(0),
            radius_lo: self.radius_lo.unwrap_or(1e-3),
            radius_hi: self.radius_hi.unwrap_or(0.05),
            n_radii: self.n_radii.unwrap_or(12),
        })
    }
}

fn embed(p: &EmbedParams, out: &mut Writer) -> CliResult<Outcome> {
    let sys = builtin(&p.system)?;
    let pts = sampled_orbit(&sys, p.dt, dynamics::DEFAULT_TRANSIENT, p.samples, p.stride)?;
    let full = PointCloud::from_points(&pts)?;
    let full_est = geometry::correlation_dimension(&full, &geometry::relative_radii(&full, p.radius_lo, p.radius_hi, p.n_radii))?;
    let series = TimeSeries::new(p.dt * p.stride as f64, pts.iter().map(|x| x[p.component]).collect())?;
    let (tau, fallback) = if p.tau == 0 {
        let sel = geometry::select_delay(&series)?;
        (sel.tau, sel.fallback)
    } else {
        (p.tau, false)
    };
    let cloud = geometry::delay_embed(&series, tau, p.m)?;
    let emb_est = geometry::correlation_dimension(&cloud, &geometry::relative_radii(&cloud, p.radius_lo, p.radius_hi, p.n_radii))?;
    let rel = (emb_est.value - full_est.value).abs() / full_est.value;
    out.json(
        "embedding.json",
        &json!({ "tau": tau, "tau_time": tau as f64 * series.dt, "tau_fallback": fallback,
                 "full_state": full_est, "embedded": emb_est, "relative_difference": rel }),
    )?;
    let mut o = Outcome::default();
    o.metric("tau", tau as f64);
    o.metric("full_dimension", full_est.value);
    o.metric("embedded_dimension", emb_est.value);
    o.metric("embedding_relative_error", rel);
    Ok(o)
}

// ---------------------------------------------------------------- classicality

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassicalityArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    system: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    component: Option<usize>,
    /// Averaging window in samples.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    window: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    uniform_samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    uniform_window: Option<usize>,
}

#[derive(Debug, Serialize)]
struct ClassicalityParams {
    system: String,
    dt: f64,
    samples: usize,
    component: usize,
    window: usize,
    uniform_samples: usize,
    uniform_window: usize,
}

impl Experiment for ClassicalityArgs {
    type Params = ClassicalityParams;
    fn resolve(self) -> CliResult<ClassicalityParams> {
        let system = self.system.unwrap_or_else(|| "lorenz".into());
        let sys = builtin(&system)?;
        let component = self.component.unwrap_or(0);
        if component >= sys.dim() {
            return Err(usage("component out of range"));
        }
        Ok(ClassicalityParams {
            dt: sys.default_dt(),
            system,
            samples: self.samples.unwrap_or(200_000),
            component,
            window: self.window.unwrap_or(1000),
            uniform_samples: self.uniform_samples.unwrap_or(1_000_000),
            uniform_window: self.uniform_window.unwrap_or(100),
        })
    }
}

fn classicality(p: &ClassicalityParams, out: &mut Writer) -> CliResult<Outcome> {
    let sys = builtin(&p.system)?;
    let pts = sampled_orbit(&sys, p.dt, dynamics::DEFAULT_TRANSIENT, p.samples, 1)?;
    let series = TimeSeries::new(p.dt, pts.iter().map(|x| x[p.component]).collect())?;
    let raw = geometry::time_average_distribution(&series, 1)?;
    let averaged = geometry::time_average_distribution(&series, p.window)?;
    let mut rng = SeedStream::new(out.seed(), "classicality/uniform").rng();
    let uniform = TimeSeries::new(1.0, (0..p.uniform_samples).map(|_| rng.random::<f64>()).collect())?;
    let control = geometry::time_average_distribution(&uniform, p.uniform_window)?;
    out.json("moments.json", &json!({ "raw": raw, "averaged": averaged, "uniform_control": control }))?;
    let mut o = Outcome::default();
    o.metric("raw_excess_kurtosis", raw.excess_kurtosis);
    o.metric("averaged_excess_kurtosis", averaged.excess_kurtosis);
    o.metric("kurtosis_ratio", averaged.excess_kurtosis.abs() / raw.excess_kurtosis.abs());
    o.metric("uniform_abs_skewness", control.skewness.abs());
    o.metric("uniform_abs_excess_kurtosis", control.excess_kurtosis.abs());
    Ok(o)
}

// ---------------------------------------------------------------- report

/// Expected range of a headline metric.
#[derive(Debug, Clone, Copy)]
pub enum Expect {
    /// Closed interval.
    Within(f64, f64),
    /// Strictly below.
    Below(f64),
    AtMost(f64),
    AtLeast(f64),
    Equals(f64),
}

impl Expect {
    pub fn accepts(self, v: f64) -> bool {
        match self {
            Expect::Within(lo, hi) => v >= lo && v <= hi,
            Expect::Below(x) => v < x,
            Expect::AtMost(x) => v <= x,
            Expect::AtLeast(x) => v >= x,
            Expect::Equals(x) => v == x,
        }
    }

    pub fn describe(self) -> String {
        let f = |x: f64| {
            if x != 0.0 && x.abs() < 1e-3 {
                format!("{x:e}")
            } else {
                format!("{}", (x * 1e6).round() / 1e6)
            }
        };
        match self {
            Expect::Within(lo, hi) => format!("[{}, {}]", f(lo), f(hi)),
            Expect::Below(x) => format!("< {}", f(x)),
            Expect::AtMost(x) => format!("<= {}", f(x)),
            Expect::AtLeast(x) => format!(">= {}", f(x)),
            Expect::Equals(x) => format!("= {}", f(x)),
        }
    }
}

/// Headline metrics with their acceptance ranges.
pub const ACCEPTANCE: &[(&str, Expect)] = &[
    ("q8_order", Expect::Equals(8.0)),
    ("q8_failures", Expect::Equals(0.0)),
    ("pauli_failures", Expect::Equals(0.0)),
    ("phase_failures", Expect::Equals(0.0)),
    ("box_dimension_cantor", Expect::Within(0.6309 - 0.03, 0.6309 + 0.03)),
    ("box_dimension_segment", Expect::Within(0.95, 1.05)),
    ("box_dimension_square", Expect::Within(1.9, 2.1)),
    ("exceptional_fraction_d1", Expect::Within(2.0 / 3.0 - 0.01, 2.0 / 3.0 + 0.01)),
    ("exceptional_fraction_d8", Expect::Below(0.05)),
    ("exceptional_monotone", Expect::Equals(1.0)),
    ("intersection_fraction_d10", Expect::Below(0.03)),
    ("axis_intersection_fraction", Expect::Equals(1.0)),
    ("lorenz_lambda1", Expect::Within(0.906 - 0.05, 0.906 + 0.05)),
    ("lorenz_exponent_sum", Expect::Within(-13.67 - 0.3, -13.67 + 0.3)),
    ("mass_relative_error", Expect::AtMost(1e-6)),
    ("linearity_relative_deviation", Expect::Below(1e-12)),
    ("lorenz_comoving_relative_error", Expect::AtMost(0.05)),
    ("zero_radius_unanimous", Expect::Equals(1.0)),
    ("min_minority_fraction_boundary", Expect::AtLeast(0.05)),
    ("embedding_relative_error", Expect::AtMost(0.10)),
    ("kurtosis_ratio", Expect::Below(1.0)),
    ("uniform_abs_skewness", Expect::Below(0.1)),
    ("uniform_abs_excess_kurtosis", Expect::Below(0.2)),
];

#[derive(Debug, Deserialize)]
struct ManifestView {
    experiment: String,
    #[serde(default)]
    files: Vec<FileEntry>,
    #[serde(default)]
    metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
struct ReportRow {
    experiment: String,
    manifest: String,
    metric: String,
    value: f64,
    expected: String,
    pass: bool,
}

fn report(paths: &[PathBuf], json_out: Option<&Path>) -> CliResult<i32> {
    let mut rows = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read manifest {}: {e}", path.display())))?;
        let manifest: ManifestView = serde_json::from_str(&text)
            .map_err(|e| usage(format!("malformed manifest {}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for f in &manifest.files {
            let file = dir.join(&f.path);
            let bytes = std::fs::read(&file)
                .map_err(|e| CliError::Failure(format!("missing output {}: {e}", file.display())))?;
            if hex::encode(Sha256::digest(&bytes)) != f.sha256 {
                return Err(CliError::Failure(format!("digest mismatch: {}", file.display())));
            }
        }
        for (metric, expect) in ACCEPTANCE {
            if let Some(&value) = manifest.metrics.get(*metric) {
                rows.push(ReportRow {
                    experiment: manifest.experiment.clone(),
                    manifest: path.display().to_string(),
                    metric: metric.to_string(),
                    value,
                    expected: expect.describe(),
                    pass: expect.accepts(value),
                });
            }
        }
    }
    let mut table = format!("{:<14} {:<32} {:>14} {:<20} {}\n", "experiment", "metric", "value", "expected", "status");
    for r in &rows {
        let _ = writeln!(
            table,
            "{:<14} {:<32} {:>14.6e} {:<20} {}",
            r.experiment,
            r.metric,
            r.value,
            r.expected,
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    print!("{table}");
    let all_pass = rows.iter().all(|r| r.pass);
    let consolidated = json!({ "rows": rows, "all_pass": all_pass });
    match json_out {
        Some(p) => std::fs::write(p, to_json_bytes(&consolidated)?)
            .map_err(|e| usage(format!("cannot write {}: {e}", p.display())))?,
        None => println!("{}", serde_json::to_string_pretty(&consolidated).map_err(Error::from)?),
    }
    Ok(if all_pass { 0 } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expectations() {
        assert!(Expect::Within(0.0, 1.0).accepts(1.0));
        assert!(!Expect::Below(1.0).accepts(1.0));
        assert!(Expect::AtMost(1.0).accepts(1.0));
        assert!(Expect::Equals(8.0).accepts(8.0));
        assert!(!Expect::AtLeast(0.05).accepts(0.04));
    }

    #[test]
    fn flags_override_config() {
        let flags = CantorArgs { depth: Some(4), ..Default::default() };
        let mut config = Map::new();
        config.insert("depth".into(), json!(9));
        config.insert("points".into(), json!(7));
        let merged = merge_args(&flags, &config).unwrap();
        assert_eq!(merged.depth, Some(4));
        assert_eq!(merged.points, Some(7));
        config.insert("bogus".into(), json!(1));
        assert!(merge_args(&flags, &config).is_err());
    }

    #[test]
    fn algebra_checks_pass_on_short_strings() {
        let strings = BitString::all_of_length(4).unwrap();
        let (rel, pauli, phase, quad) = algebra_checks(&strings).unwrap();
        assert!(rel.failures.is_empty() && pauli.failures.is_empty() && phase.failures.is_empty());
        assert!(quad.iter().all(|c| *c == 0.0));
        assert_eq!(phase.checked, 32);
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        assert_eq!(run(["isl", "frobnicate"]), 2);
        assert_eq!(run(["isl", "--help"]), 0);
    }
}

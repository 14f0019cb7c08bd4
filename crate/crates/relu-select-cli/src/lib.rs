//! Experiment harness behind the `relu-select` binary: builds networks,
//! describes them, and runs seeded Monte-Carlo sweeps that write CSV rows.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use relu_select::constructions::{build, ConstructionKind, ConstructionParams};
use relu_select::oracle::{self, run_algorithm1_2_max, run_algorithm3, run_algorithm4};
use relu_select::params::{MaxSchedule, SparsifierSchedule};
use relu_select::primitives::GadgetContract;
use relu_select::{deserialize, serialize, BuildError, ReluNetwork};

pub const CSV_HEADER: &str = "construction,d,epsilon,gamma,samples,empirical_mse,exact_match_rate,reference_success_rate,width,depth,max_abs_weight,wall_time_ms,seed";

/// Largest `1/δ` the harness accepts.
pub const MAX_INVERSE_DELTA: f64 = 9_007_199_254_740_992.0;

pub const EXACT_TOLERANCE: f64 = 1e-7;

#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Refused(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Refused(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "invalid parameters: {m}"),
            CliError::Refused(m) => write!(f, "build refused: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<BuildError> for CliError {
    fn from(e: BuildError) -> CliError {
        match e {
            BuildError::InvalidParameter { .. } => CliError::Invalid(e.to_string()),
            _ => CliError::Refused(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Parser, Debug)]
#[command(name = "relu-select", version, about = "Build and measure selection networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a network and write it to --net.
    Build(Flags),
    /// Print size statistics of a construction or of a saved network.
    Describe(Flags),
    /// Empirical squared error and exact-match rate on uniform inputs.
    Mse(Flags),
    /// Success rate of a reference algorithm on uniform inputs.
    SuccessRate(Flags),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    Alg3,
    Alg4,
    Alg12max,
}

impl Algorithm {
    fn as_str(self) -> &'static str {
        match self {
            Algorithm::Alg3 => "alg3",
            Algorithm::Alg4 => "alg4",
            Algorithm::Alg12max => "alg12max",
        }
    }
}

#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    /// depth3, depth5, linear or maxlinear.
    #[arg(long)]
    pub construction: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV file rows are appended to.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Network file to write (build) or read (describe).
    #[arg(long)]
    pub net: Option<PathBuf>,
    /// Overwrite an existing network file.
    #[arg(long)]
    pub force: bool,
    #[arg(long, value_enum)]
    pub algorithm: Option<Algorithm>,
    /// Flat `key = value` file with defaults for any of the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

const CONFIG_KEYS: [&str; 11] =
    ["construction", "d", "epsilon", "gamma", "samples", "trials", "seed", "out", "net", "force", "algorithm"];

/// Reads a flat `key = value` file. Blank lines and lines starting with `#`
/// are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Invalid(format!("config line {}: expected key = value", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !CONFIG_KEYS.contains(&k) {
            return Err(CliError::Invalid(format!("config line {}: unknown key {k:?}", n + 1)));
        }
        map.insert(k.to_string(), v.to_string());
    }
    Ok(map)
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| CliError::Invalid(format!("config value for {key}: cannot parse {v:?}")))
}

impl Flags {
    /// Fills every unset flag from the config file, if one was given.
    pub fn resolved(&self) -> Result<Flags, CliError> {
        let Some(path) = &self.config else {
            return Ok(self.clone());
        };
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let map = parse_config(&text)?;
        let mut f = self.clone();
        for (k, v) in &map {
            match k.as_str() {
                "construction" => f.construction = f.construction.take().or(Some(v.clone())),
                "d" => f.d = f.d.or(Some(parse_value(k, v)?)),
                "epsilon" => f.epsilon = f.epsilon.or(Some(parse_value(k, v)?)),
                "gamma" => f.gamma = f.gamma.or(Some(parse_value(k, v)?)),
                "samples" => f.samples = f.samples.or(Some(parse_value(k, v)?)),
                "trials" => f.trials = f.trials.or(Some(parse_value(k, v)?)),
                "seed" => f.seed = f.seed.or(Some(parse_value(k, v)?)),
                "out" => f.out = f.out.take().or(Some(PathBuf::from(v))),
                "net" => f.net = f.net.take().or(Some(PathBuf::from(v))),
                "force" => f.force = f.force || parse_value::<bool>(k, v)?,
                "algorithm" => {
                    if f.algorithm.is_none() {
                        let a = Algorithm::from_str(v, true).map_err(|e| CliError::Invalid(format!("algorithm: {e}")))?;
                        f.algorithm = Some(a);
                    }
                }
                _ => unreachable!("keys are checked while parsing"),
            }
        }
        Ok(f)
    }

    fn kind(&self) -> Result<ConstructionKind, CliError> {
        let name = self.construction.as_deref().ok_or_else(|| CliError::Invalid("--construction is required".into()))?;
        Ok(name.parse()?)
    }

    fn dim(&self) -> Result<usize, CliError> {
        self.d.ok_or_else(|| CliError::Invalid("--d is required".into()))
    }

    fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(0.01)
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// Construction parameters, refused when `1/δ` exceeds `2^53`.
    pub fn params(&self) -> Result<ConstructionParams, CliError> {
        let kind = self.kind()?;
        let gamma = self.gamma.unwrap_or(kind.default_gamma());
        let params = ConstructionParams::new(kind, self.dim()?, self.epsilon(), gamma)?;
        let inv = params.effective_delta.inv();
        if inv > MAX_INVERSE_DELTA {
            return Err(CliError::Refused(format!(
                "{kind} at d = {}, ε = {} needs weights of 1/δ = {inv:e}, above 2^53; exactness cannot be guaranteed in 64-bit arithmetic",
                params.d, params.epsilon
            )));
        }
        Ok(params)
    }
}

/// One CSV row. Fields that do not apply to a row are left empty.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub construction: String,
    pub d: usize,
    pub epsilon: f64,
    pub gamma: f64,
    pub samples: usize,
    pub empirical_mse: Option<f64>,
    pub exact_match_rate: Option<f64>,
    pub reference_success_rate: f64,
    pub width: Option<usize>,
    pub depth: Option<usize>,
    pub max_abs_weight: Option<f64>,
    pub wall_time_ms: u128,
    pub seed: u64,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl ExperimentResult {
    pub fn csv_row(&self) -> String {
        [
            self.construction.clone(),
            self.d.to_string(),
            self.epsilon.to_string(),
            self.gamma.to_string(),
            self.samples.to_string(),
            opt(self.empirical_mse),
            opt(self.exact_match_rate),
            self.reference_success_rate.to_string(),
            opt(self.width),
            opt(self.depth),
            opt(self.max_abs_weight),
            self.wall_time_ms.to_string(),
            self.seed.to_string(),
        ]
        .join(",")
    }
}

/// Appends `row` to the CSV file at `path`, writing the header first when
/// the file is new or empty.
pub fn append_csv(path: &Path, row: &ExperimentResult) -> Result<(), CliError> {
    let existing = match fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(io_err(path, e)),
    };
    if let Some(first) = existing.lines().next() {
        if first != CSV_HEADER {
            return Err(CliError::Io(format!("{}: existing file has a different header", path.display())));
        }
    }
    let file = fs::OpenOptions::new().create(true).append(true).open(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if existing.is_empty() {
        w.write_record(CSV_HEADER.split(',')).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.write_record(row.csv_row().split(',')).map_err(|e| CliError::Io(e.to_string()))?;
    w.flush().map_err(|e| io_err(path, e))
}

/// Generator of sample `j` under `seed`; independent of how samples are
/// scheduled across threads.
pub fn sample_rng(seed: u64, j: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(j);
    rng
}

fn uniform(seed: u64, j: u64, d: usize) -> Vec<f64> {
    let mut rng = sample_rng(seed, j);
    (0..d).map(|_| rng.gen::<f64>()).collect()
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("RELU_SELECT_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| CliError::Invalid(format!("RELU_SELECT_THREADS = {v:?} is not a positive integer")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Invalid(e.to_string()))
}

/// Whether the reference algorithm matching `params` succeeds on `x`.
fn reference_success(params: &ConstructionParams, x: &[f64], schedule: &Schedule) -> bool {
    let delta = params.effective_delta.value();
    match (params.kind, schedule) {
        (ConstructionKind::Depth3, _) => oracle::is_good_input(x, delta),
        (ConstructionKind::Depth5, _) => {
            oracle::is_good_input(x, delta) && run_algorithm3(x, params.gamma).is_ok_and(|r| r.success)
        }
        (ConstructionKind::LinearWidth, Schedule::Sparsifier(s)) => {
            oracle::is_good_input(x, delta) && run_algorithm4(x, s).success()
        }
        (ConstructionKind::MaxLinear, Schedule::Max(s)) => run_algorithm1_2_max(x, delta, s).success,
        _ => unreachable!("schedule matches the construction"),
    }
}

enum Schedule {
    None,
    Sparsifier(SparsifierSchedule),
    Max(MaxSchedule),
}

impl Schedule {
    fn for_params(params: &ConstructionParams) -> Result<Schedule, CliError> {
        Ok(match params.kind {
            ConstructionKind::LinearWidth => Schedule::Sparsifier(SparsifierSchedule::new(params.d)?),
            ConstructionKind::MaxLinear => Schedule::Max(MaxSchedule::new(params.d)?),
            _ => Schedule::None,
        })
    }
}

fn target(kind: ConstructionKind, x: &[f64]) -> f64 {
    match kind {
        ConstructionKind::MaxLinear => oracle::max(x),
        _ => oracle::median(x),
    }
    .expect("non-empty input")
}

pub fn cmd_mse(flags: &Flags) -> Result<ExperimentResult, CliError> {
    let start = Instant::now();
    let params = flags.params()?;
    let samples = flags.samples.unwrap_or(1000);
    if samples == 0 {
        return Err(CliError::Invalid("--samples must be at least 1".into()));
    }
    let net = build(&params)?;
    let schedule = Schedule::for_params(&params)?;
    let seed = flags.seed();
    let pool = thread_pool()?;
    let outcomes: Vec<(f64, bool, bool)> = pool.install(|| {
        (0..samples as u64)
            .into_par_iter()
            .map(|j| {
                let x = uniform(seed, j, params.d);
                let out = net.evaluate(&x).expect("input matches the network")[0];
                let err = out - target(params.kind, &x);
                (err * err, err.abs() <= EXACT_TOLERANCE, reference_success(&params, &x, &schedule))
            })
            .collect()
    });
    let n = samples as f64;
    let mse = outcomes.iter().map(|o| o.0).sum::<f64>() / n;
    let exact = outcomes.iter().filter(|o| o.1).count() as f64 / n;
    let reference = outcomes.iter().filter(|o| o.2).count() as f64 / n;
    let stats = net.stats();
    Ok(ExperimentResult {
        construction: params.kind.as_str().into(),
        d: params.d,
        epsilon: params.epsilon,
        gamma: params.gamma,
        samples,
        empirical_mse: Some(mse),
        exact_match_rate: Some(exact),
        reference_success_rate: reference,
        width: Some(stats.width),
        depth: Some(stats.depth),
        max_abs_weight: Some(stats.max_abs_weight),
        wall_time_ms: start.elapsed().as_millis(),
        seed,
    })
}

pub fn cmd_success_rate(flags: &Flags) -> Result<ExperimentResult, CliError> {
    let start = Instant::now();
    let algorithm = flags.algorithm.ok_or_else(|| CliError::Invalid("--algorithm is required".into()))?;
    let d = flags.dim()?;
    let trials = flags.trials.unwrap_or(100);
    if trials == 0 {
        return Err(CliError::Invalid("--trials must be at least 1".into()));
    }
    let epsilon = flags.epsilon();
    let (gamma, check): (f64, Box<dyn Fn(&[f64]) -> bool + Sync>) = match algorithm {
        Algorithm::Alg3 => {
            let gamma = flags.gamma.unwrap_or(ConstructionKind::Depth5.default_gamma());
            relu_select::params::Depth5Layout::new(d, gamma)?;
            (gamma, Box::new(move |x: &[f64]| run_algorithm3(x, gamma).is_ok_and(|r| r.success)))
        }
        Algorithm::Alg4 => {
            let schedule = SparsifierSchedule::new(d)?;
            (flags.gamma.unwrap_or(0.0), Box::new(move |x: &[f64]| run_algorithm4(x, &schedule).success()))
        }
        Algorithm::Alg12max => {
            let params = ConstructionParams::new(ConstructionKind::MaxLinear, d, epsilon, 0.0)?;
            let schedule = MaxSchedule::new(d)?;
            let delta = params.effective_delta.value();
            (flags.gamma.unwrap_or(0.0), Box::new(move |x: &[f64]| run_algorithm1_2_max(x, delta, &schedule).success))
        }
    };
    let seed = flags.seed();
    let pool = thread_pool()?;
    let hits: Vec<bool> =
        pool.install(|| (0..trials as u64).into_par_iter().map(|j| check(&uniform(seed, j, d))).collect());
    let rate = hits.iter().filter(|h| **h).count() as f64 / trials as f64;
    Ok(ExperimentResult {
        construction: algorithm.as_str().into(),
        d,
        epsilon,
        gamma,
        samples: trials,
        empirical_mse: None,
        exact_match_rate: None,
        reference_success_rate: rate,
        width: None,
        depth: None,
        max_abs_weight: None,
        wall_time_ms: start.elapsed().as_millis(),
        seed,
    })
}

pub fn cmd_build(flags: &Flags, out: &mut dyn Write) -> Result<(), CliError> {
    let path = flags.net.as_ref().ok_or_else(|| CliError::Invalid("--net is required".into()))?;
    if path.exists() && !flags.force {
        return Err(CliError::Io(format!("{} exists; pass --force to overwrite", path.display())));
    }
    let params = flags.params()?;
    let net = build(&params)?;
    let text = serialize(&net);
    let back = deserialize(text.as_bytes()).map_err(|e| CliError::Io(format!("round trip failed: {e}")))?;
    if serialize(&back) != text {
        return Err(CliError::Io("round trip changed the network".into()));
    }
    fs::write(path, &text).map_err(|e| io_err(path, e))?;
    let s = net.stats();
    writeln!(
        out,
        "wrote {} ({}, d = {}, hidden layers {}, width {}, max |w| {:e})",
        path.display(),
        params.kind,
        params.d,
        s.hidden_layers(),
        s.width,
        s.max_abs_weight
    )
    .map_err(|e| CliError::Io(e.to_string()))
}

fn params_from_metadata(net: &ReluNetwork) -> Option<ConstructionParams> {
    let m = net.metadata();
    let kind: ConstructionKind = m.get("construction")?.parse().ok()?;
    let d = m.get("d")?.parse().ok()?;
    let epsilon = m.get("epsilon")?.parse().ok()?;
    let gamma = m.get("gamma")?.parse().ok()?;
    ConstructionParams::new(kind, d, epsilon, gamma).ok()
}

/// Human-readable statistics, layer table and contract verdict.
pub fn describe(net: &ReluNetwork, contract: Option<&GadgetContract>) -> String {
    let s = net.stats();
    let mut text = String::new();
    let mut line = |l: String| {
        text.push_str(&l);
        text.push('\n');
    };
    if let Some(c) = net.metadata().get("construction") {
        line(format!("construction: {c}"));
    }
    for (k, v) in net.metadata() {
        if k != "construction" {
            line(format!("  {k} = {v}"));
        }
    }
    line(format!("input dim: {}", net.input_dim()));
    line(format!("output dim: {}", net.output_dim()));
    line(format!("hidden layers: {}", s.hidden_layers()));
    line(format!("depth: {}", s.depth));
    line(format!("width: {}", s.width));
    line(format!("max |w|: {:e}", s.max_abs_weight));
    line(format!("total neurons: {}", s.total_neurons));
    line(format!("{:>5} {:>9} {:>9} {:>10} {:>12}", "layer", "rows", "cols", "activation", "nonzeros"));
    for (i, l) in net.layers().iter().enumerate() {
        line(format!("{:>5} {:>9} {:>9} {:>10} {:>12}", i + 1, l.rows(), l.cols(), l.activation().as_str(), l.weights().nnz()));
    }
    match contract {
        Some(c) => {
            let bounds = format!(
                "width ≤ {}, hidden layers = {}, max |w| ≤ {:e}",
                c.declared_width_bound, c.declared_hidden_layers, c.declared_weight_bound
            );
            match c.check(&s) {
                Ok(()) => line(format!("contract: pass ({bounds})")),
                Err(e) => line(format!("contract: FAIL ({e})")),
            }
        }
        None => line("contract: unknown construction, not checked".into()),
    }
    text
}

pub fn cmd_describe(flags: &Flags, out: &mut dyn Write) -> Result<(), CliError> {
    let (net, params) = match &flags.net {
        Some(path) => {
            let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
            let net = deserialize(&bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let params = params_from_metadata(&net);
            (net, params)
        }
        None => {
            let params = flags.params()?;
            (build(&params)?, Some(params))
        }
    };
    let contract = params.map(|p| p.contract());
    out.write_all(describe(&net, contract.as_ref()).as_bytes()).map_err(|e| CliError::Io(e.to_string()))
}

fn emit(row: &ExperimentResult, flags: &Flags, out: &mut dyn Write) -> Result<(), CliError> {
    if let Some(path) = &flags.out {
        append_csv(path, row)?;
    }
    writeln!(out, "{CSV_HEADER}\n{}", row.csv_row()).map_err(|e| CliError::Io(e.to_string()))
}

/// Parses `args` (including the program name) and runs the command,
/// writing human-readable output to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            return write!(out, "{e}").map_err(|e| CliError::Io(e.to_string()));
        }
        Err(e) => return Err(CliError::Invalid(e.to_string())),
    };
    match &cli.command {
        Command::Build(f) => cmd_build(&f.resolved()?, out),
        Command::Describe(f) => cmd_describe(&f.resolved()?, out),
        Command::Mse(f) => {
            let f = f.resolved()?;
            emit(&cmd_mse(&f)?, &f, out)
        }
        Command::SuccessRate(f) => {
            let f = f.resolved()?;
            emit(&cmd_success_rate(&f)?, &f, out)
        }
    }
}

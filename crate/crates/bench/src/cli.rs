use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

/// Relative paths resolve against this directory when it is set.
pub const DATA_DIR_ENV: &str = "DSBENCH_DATA_DIR";

#[derive(Debug, Parser)]
#[command(name = "dsbench", version, about = "Data-series index benchmark harness")]
pub struct Cli {
    /// TOML file of defaults; keys are flag names without the leading dashes.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random-walk dataset file.
    GenData(GenDataArgs),
    /// Draw a noisy query workload from a dataset file.
    GenQueries(GenQueriesArgs),
    /// Compute exact k-NN answers for a workload by brute force.
    GroundTruth(GroundTruthArgs),
    /// Build an index and persist it to a directory.
    Build(BuildArgs),
    /// Run a query workload over a parameter sweep and write a CSV report.
    Run(RunArgs),
    /// Recompute aggregate rows from the per-query rows of a report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub length: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GenQueriesArgs {
    /// Source dataset file.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    /// Noise standard deviations, assigned round-robin.
    #[arg(long, value_delimiter = ',', default_values_t = dsidx::datagen::DEFAULT_NOISE_LEVELS)]
    pub noise: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GroundTruthArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Compare raw values instead of Z-normalized ones.
    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Isax,
    EapcaTree,
    Vafile,
}

impl From<KindArg> for dsidx::index::IndexKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Isax => Self::Isax,
            KindArg::EapcaTree => Self::EapcaTree,
            KindArg::Vafile => Self::Vafile,
        }
    }
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Index directory to create.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long)]
    pub leaf_capacity: Option<usize>,
    #[arg(long)]
    pub segments: Option<usize>,
    #[arg(long)]
    pub base_bits: Option<u8>,
    #[arg(long)]
    pub initial_segments: Option<usize>,
    #[arg(long)]
    pub dft_coefficients: Option<usize>,
    #[arg(long)]
    pub total_bits: Option<usize>,
    #[arg(long)]
    pub buffer_bytes: Option<usize>,
    #[arg(long)]
    pub grid_sample: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Index raw values instead of Z-normalized ones.
    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Ng,
    Guaranteed,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Index directory written by `build`.
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub ground_truth: PathBuf,
    /// CSV report to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [ModeArg::Exact])]
    pub modes: Vec<ModeArg>,
    #[arg(long, value_delimiter = ',', default_values_t = [10usize])]
    pub k: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0f64])]
    pub epsilon: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0f64])]
    pub delta: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize])]
    pub nprobe: Vec<usize>,
    /// Series sampled to estimate the distance distribution (δ < 1).
    #[arg(long, default_value_t = 1000)]
    pub distribution_sample: usize,
    /// Random pairs drawn from that sample.
    #[arg(long, default_value_t = 100_000)]
    pub distribution_pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Divide every rank's error by the first exact neighbor's distance.
    #[arg(long)]
    pub mre_first_neighbor: bool,
    /// Answer the queries of each parameter point in parallel.
    #[arg(long)]
    pub concurrent: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// CSV written by `run`.
    #[arg(long)]
    pub input: PathBuf,
    /// Destination; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn config_value(v: &toml::Value) -> Result<Option<String>> {
    Ok(Some(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(_) => return Ok(None),
        toml::Value::Array(items) => items
            .iter()
            .map(|i| config_value(i)?.context("nested booleans are not supported"))
            .collect::<Result<Vec<_>>>()?
            .join(","),
        other => bail!("unsupported config value {other}"),
    }))
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let a = a.to_string_lossy();
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Appends `--flag value` pairs from the config file for every flag the
/// chosen subcommand accepts and the command line does not already set.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let path = resolve(path);
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let table: toml::Table = text
        .parse()
        .with_context(|| format!("parsing config {}", path.display()))?;

    let cmd = Cli::command();
    let Some(sub) = args
        .iter()
        .skip(1)
        .find_map(|a| cmd.find_subcommand(a.to_string_lossy().as_ref()))
    else {
        return Ok(args);
    };
    let given = |flag: &str| {
        args.iter().any(|a| {
            let a = a.to_string_lossy();
            a == format!("--{flag}") || a.starts_with(&format!("--{flag}="))
        })
    };

    let mut out = args.clone();
    for (key, value) in &table {
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(key.as_str())) else {
            continue;
        };
        if key == "config" || given(key) {
            continue;
        }
        let takes_value = arg.get_action().takes_values();
        match (takes_value, value) {
            (false, toml::Value::Boolean(true)) => out.push(format!("--{key}").into()),
            (false, toml::Value::Boolean(false)) => {}
            (false, _) => bail!("config key {key:?} is a switch and needs a boolean"),
            (true, v) => {
                let v = config_value(v)?.with_context(|| format!("config key {key:?} needs a value"))?;
                out.push(format!("--{key}").into());
                out.push(v.into());
            }
        }
    }
    Ok(out)
}

/// Joins relative paths onto the data directory when one is configured.
pub fn resolve(path: PathBuf) -> PathBuf {
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) if path.is_relative() && !dir.is_empty() => PathBuf::from(dir).join(path),
        _ => path,
    }
}

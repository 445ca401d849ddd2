//! The `canopy-delta` command line.
//!
//! Exit status: 0 on success, 1 when a command fails (the single stderr
//! line starts with `error[<category>]:`), 2 for usage errors.

mod commands;
pub mod pipeline;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};

pub use pipeline::PipelineConfig;

/// Default worker count when `--jobs` is absent.
pub const JOBS_ENV: &str = "CANOPY_DELTA_JOBS";

#[derive(Debug, Parser)]
#[command(name = "canopy-delta", version, about = "Tree canopy change detection from tiled satellite scenes")]
pub struct Cli {
    /// Worker threads; defaults to $CANOPY_DELTA_JOBS, then all cores
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cut a scene into web-mercator XYZ tiles
    Tile(TileArgs),
    /// Seeded train/val/test split of an annotation directory
    Split(SplitArgs),
    /// Georeference and deduplicate detector output into scene instances
    Ingest(IngestArgs),
    /// Box and mask mAP of detections against tile annotations
    Eval(EvalArgs),
    /// Gradient checks and optimizer convergence suite
    Mathcheck(MathcheckArgs),
    /// Match two epochs of instances and report per-region change
    Change(ChangeArgs),
    /// Generate a synthetic two-epoch scene with known truth
    Synth(SynthArgs),
    /// Run every stage from a config file
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct TileArgs {
    /// Scene `.raw`, `.scene.json` or their shared stem
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, default_value_t = 18)]
    pub zoom: u8,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Percentile cut points for the 8-bit view, e.g. `2,98`
    #[arg(long, value_parser = parse_pair)]
    pub stretch: Option<(f64, f64)>,
    /// Also write full-depth `.raw` tiles
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Train, val and test shares
    #[arg(long, value_parser = parse_triple, default_value = "0.7,0.2,0.1")]
    pub ratios: (f64, f64, f64),
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub detections: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub epoch: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overlap above which two instances are the same tree
    #[arg(long, default_value_t = crate::detections::DEFAULT_DEDUPE_IOU)]
    pub dedupe_iou: f64,
    /// Keep crown fragments cut by tile edges as separate instances
    #[arg(long)]
    pub no_seam_merge: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of LabelMe files named `{z}/{x}/{y}.json`
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Detection results file
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// `0.5`, `0.5:0.95` or `lo:step:hi`
    #[arg(long, default_value = "0.5:0.95")]
    pub iou: String,
    /// `coco101` or `all-point`
    #[arg(long, default_value = "coco101")]
    pub interpolation: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MathcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Training config to validate alongside the checks
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "mathcheck")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ChangeArgs {
    #[arg(long)]
    pub before: Option<PathBuf>,
    #[arg(long)]
    pub after: Option<PathBuf>,
    #[arg(long)]
    pub regions: Option<PathBuf>,
    #[arg(long, default_value_t = crate::changedet::DEFAULT_MAX_DIST_M)]
    pub max_dist: f64,
    /// `greedy` or `optimal`
    #[arg(long, default_value = "greedy")]
    pub strategy: String,
    /// Also require outline IoU of at least this much
    #[arg(long)]
    pub min_iou: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Overrides the seed in the spec
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides `out`
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `change.strategy`
    #[arg(long)]
    pub strategy: Option<String>,
    /// Overrides `change.max_dist`
    #[arg(long)]
    pub max_dist: Option<f64>,
    /// Overrides `split.seed`
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `tiling.zoom`
    #[arg(long)]
    pub zoom: Option<u8>,
}

fn parse_floats(s: &str, n: usize) -> std::result::Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("{p:?} is not a number")))
        .collect::<std::result::Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} comma-separated numbers"));
    }
    Ok(v)
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    parse_floats(s, 2).map(|v| (v[0], v[1]))
}

fn parse_triple(s: &str) -> std::result::Result<(f64, f64, f64), String> {
    parse_floats(s, 3).map(|v| (v[0], v[1], v[2]))
}

pub(crate) fn need<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| Error::Validation(format!("missing required flag --{flag}")))
}

fn jobs_from_env() -> Result<Option<usize>> {
    match std::env::var(JOBS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{JOBS_ENV}={v:?} is not a positive integer"))),
        _ => Ok(None),
    }
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    if jobs == Some(0) {
        return Err(Error::Validation("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn execute(cli: &Cli) -> Result<()> {
    // CLI > config > environment > all cores.
    let config_jobs = match &cli.command {
        Command::Pipeline(a) if cli.jobs.is_none() => match &a.config {
            Some(path) => PipelineConfig::load(path)?.jobs,
            None => None,
        },
        _ => None,
    };
    let jobs = match cli.jobs.or(config_jobs) {
        Some(j) => Some(j),
        None => jobs_from_env()?,
    };
    thread_pool(jobs)?.install(|| match &cli.command {
        Command::Tile(a) => commands::tile(a),
        Command::Split(a) => commands::split(a),
        Command::Ingest(a) => commands::ingest(a),
        Command::Eval(a) => commands::eval(a),
        Command::Mathcheck(a) => commands::mathcheck(a),
        Command::Change(a) => commands::change(a),
        Command::Synth(a) => commands::synth(a),
        Command::Pipeline(a) => pipeline::run_pipeline(a),
    })
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("error[{}]: {msg}", e.category());
            1
        }
    }
}

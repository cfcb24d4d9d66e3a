//! Experiment harness for the `wzfsm` toolkit.
//!
//! Every subcommand takes its parameters from flags, falling back to the
//! matching table of the `--config` file (`[drf]`, `[codec]`,
//! `[growth.sweep]`, ...), and writes CSV and JSON artifacts into
//! `--out-dir`. Stochastic steps draw from sub-seeds of the master seed
//! keyed by the labels in [`labels`], so identical inputs give
//! byte-identical artifacts.

pub mod check;
mod commands;
pub mod config;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use wzfsm::rng::Seed;
use wzfsm::search::DEFAULT_BUDGET;

use config::{ConfigFile, Matrix};

/// Sub-seed labels, one per stochastic operation.
pub mod labels {
    pub const SOLVER: &str = "solver";
    pub const CODEC_SOLVER: &str = "codec-solver";
    pub const CODEC_ENCODE: &str = "codec-encode";
    pub const SIDE_INFO: &str = "side-info";
    pub const CONVERSE: &str = "converse";
    pub const DMS: &str = "dms";
    pub const THEOREM1_SAMPLE: &str = "theorem1-sample";
    pub const THEOREM1_DRF: &str = "theorem1-drf";
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(wzfsm::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Budget(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Core(_) => 5,
        }
    }
}

impl From<wzfsm::Error> for CliError {
    fn from(e: wzfsm::Error) -> Self {
        use wzfsm::Error as E;
        match e {
            E::Config(s) => CliError::Config(s),
            E::BudgetExceeded { .. }
            | E::CapExceeded(_)
            | E::TableTooLarge { .. }
            | E::CodebookTooLarge { .. } => CliError::Budget(e.to_string()),
            other => CliError::Core(other),
        }
    }
}

fn parse_budget(s: &str) -> Result<u128, String> {
    if let Ok(v) = s.parse::<u128>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 && v.fract() == 0.0 => Ok(v as u128),
        _ => Err(format!("`{s}` is not a nonnegative integer")),
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "wzfsm",
    version,
    about = "Wyner-Ziv coding experiments with finite-state machines and block codes"
)]
pub struct Cli {
    /// TOML file with the model and per-experiment tables.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (default: the config's `seed`, else 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Artifact directory (default: the config's `out_dir`, else `out`).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Cap on the search size of exhaustive FSM searches.
    #[arg(long, global = true, value_parser = parse_budget)]
    pub budget: Option<u128>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Block distortion-rate curve of a sequence or a memoryless source.
    Drf(DrfArgs),
    /// Exhaustive operational optimum over small FSM pairs.
    FsmOpt(FsmOptArgs),
    /// Two-part universal block codec.
    #[command(subcommand)]
    Codec(CodecCommand),
    /// Header accounting as the state count grows.
    #[command(subcommand)]
    Growth(GrowthCommand),
    /// Two-stage (successive refinement) region.
    #[command(subcommand)]
    Sr(SrCommand),
    /// Synthetic sequences.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Cross-module property sweeps.
    #[command(subcommand)]
    Check(CheckCommand),
}

#[derive(Debug, Subcommand)]
pub enum CodecCommand {
    Encode(CodecArgs),
    Decode(CodecArgs),
}

#[derive(Debug, Subcommand)]
pub enum GrowthCommand {
    /// Normalized decoder-description cost with `M = floor(n^theta)`.
    Sweep(SweepArgs),
    /// Search, describe the decoder, and send the encoder's bits.
    Wrap(WrapArgs),
}

#[derive(Debug, Subcommand)]
pub enum SrCommand {
    Region(SrArgs),
}

#[derive(Debug, Subcommand)]
pub enum GenCommand {
    /// Codeword-plus-noise blocks from a random codebook.
    Converse(ConverseArgs),
    /// I.i.d. source, with side information when a channel is configured.
    Dms(DmsArgs),
}

#[derive(Debug, Subcommand)]
pub enum CheckCommand {
    /// Operational optimum against the shifted block distortion-rate curve.
    Theorem1(Theorem1Args),
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DrfArgs {
    #[arg(long)]
    pub block: Option<usize>,
    /// `|U|` (default `alpha^block + 1`).
    #[arg(long)]
    pub labels: Option<usize>,
    /// Number of log-spaced multipliers in `[1e-3, 1e2]`.
    #[arg(long)]
    pub lambdas: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Memoryless source probabilities; otherwise the config's sequence.
    #[arg(long, value_delimiter = ',')]
    pub source: Option<Vec<f64>>,
    /// Exhaustive search instead of descent.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub brute_force: Option<bool>,
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FsmOptArgs {
    #[arg(long, value_delimiter = ',')]
    pub rates: Option<Vec<f64>>,
    #[arg(long)]
    pub states: Option<usize>,
    #[arg(long)]
    pub delay: Option<usize>,
    #[arg(long)]
    pub max_len: Option<u8>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub complete_only: Option<bool>,
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecArgs {
    #[arg(long)]
    pub block: Option<usize>,
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub time_sharing: Option<bool>,
    #[arg(long)]
    pub labels: Option<usize>,
    #[arg(long)]
    pub lambdas: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Stream file (default `<out-dir>/codec.bin`).
    #[arg(long)]
    pub stream: Option<PathBuf>,
    /// Decoder side information as digits; otherwise drawn from the
    /// configured sequence through the channel.
    #[arg(long)]
    pub side_info: Option<String>,
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepArgs {
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<u64>>,
    #[arg(long)]
    pub alpha: Option<usize>,
    #[arg(long)]
    pub beta: Option<usize>,
    #[arg(long)]
    pub gamma: Option<usize>,
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WrapArgs {
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub states: Option<usize>,
    #[arg(long)]
    pub delay: Option<usize>,
    #[arg(long)]
    pub max_len: Option<u8>,
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SrArgs {
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub delta_rate: Option<f64>,
    /// Rows `P(y, z | x)` over `y * |Z| + z`, as JSON.
    #[arg(long)]
    pub channel3: Option<Matrix>,
    /// `|Y|` (default 2); `|Z|` is the row length over `|Y|`.
    #[arg(long)]
    pub y_size: Option<usize>,
    #[arg(long)]
    pub block: Option<usize>,
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConverseArgs {
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub blocks: Option<usize>,
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Difference distortion `rho0(z)`; its length is the alphabet size.
    #[arg(long, value_delimiter = ',')]
    pub rho0: Option<Vec<f64>>,
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DmsArgs {
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Theorem1Args {
    /// Random sequences to check (ignored with `--exhaustive`).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Every binary sequence of length `n`.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub exhaustive: Option<bool>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub rates: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub blocks: Option<Vec<usize>>,
    #[arg(long)]
    pub lambdas: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
}

/// Resolved global settings.
pub struct Context {
    pub config: ConfigFile,
    pub seed: Seed,
    pub out_dir: PathBuf,
    pub budget: u128,
}

/// What a run produced; printed to stdout as JSON.
#[derive(Debug, Serialize)]
pub struct Report {
    pub experiment: String,
    pub artifacts: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

impl Command {
    /// Kind name as used by the config's `experiment` key.
    pub fn kind(&self) -> &'static str {
        match self {
            Command::Drf(_) => "drf",
            Command::FsmOpt(_) => "fsm-opt",
            Command::Codec(_) => "codec",
            Command::Growth(_) => "growth",
            Command::Sr(_) => "sr",
            Command::Gen(_) => "gen",
            Command::Check(_) => "theorem1-check",
        }
    }
}

pub fn run(cli: &Cli) -> Result<Report, CliError> {
    let config = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    if let Some(kind) = &config.experiment {
        if kind != cli.command.kind() {
            return Err(CliError::Config(format!(
                "config is for `{kind}` but the command is `{}`",
                cli.command.kind()
            )));
        }
    }
    let ctx = Context {
        seed: Seed(cli.seed.or(config.seed).unwrap_or(0)),
        out_dir: cli
            .out_dir
            .clone()
            .or_else(|| config.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out")),
        budget: cli.budget.unwrap_or(DEFAULT_BUDGET),
        config,
    };
    fs::create_dir_all(&ctx.out_dir).map_err(|source| io_error(&ctx.out_dir, source))?;
    commands::dispatch(&cli.command, &ctx)
}

pub(crate) fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Core(wzfsm::Error::InvalidParameter(e.to_string())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_error(path, e))
}

pub(crate) fn write_csv<T: Serialize>(
    path: &Path,
    rows: &[T],
    header: &[&str],
) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_error(path, source),
        other => CliError::Core(wzfsm::Error::InvalidParameter(format!("{other:?}"))),
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

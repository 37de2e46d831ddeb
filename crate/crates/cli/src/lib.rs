//! Command line front end for `rpseries-core`.
//!
//! Exit codes: 0 success, 1 I/O or runtime failure, 2 configuration error,
//! 3 term or enumeration budget exceeded.

mod commands;
pub mod config;
pub mod output;

use std::error::Error as StdError;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rpseries_core::EvalError;
use serde::Serialize;
use thiserror::Error;

pub use config::WitnessKind;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Budget(_) => 3,
            CliError::Io(_) | CliError::Failed(_) => 1,
        }
    }

    /// Budget errors anywhere in the source chain win; otherwise `fallback` applies.
    pub(crate) fn classify(err: &(dyn StdError + 'static), fallback: fn(String) -> CliError) -> CliError {
        let mut cur: Option<&(dyn StdError + 'static)> = Some(err);
        while let Some(e) = cur {
            if let Some(EvalError::BudgetExceeded { x, required, budget }) = e.downcast_ref::<EvalError>() {
                return CliError::Budget(format!(
                    "N = {required} terms are required at x = {x} but the term budget is {budget} \
                     (raise --term-budget or {})",
                    rpseries_core::series_eval::TERM_BUDGET_ENV
                ));
            }
            cur = e.source();
        }
        fallback(err.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "rpseries", version, about = "Random power series near the boundary of the unit disc")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certified evaluation of one sample along a geometric grid approaching x = 1.
    Scan(ScanArgs),
    /// Monte Carlo estimate of verdict frequencies over many samples.
    Estimate(EstimateArgs),
    /// Exhaustive checks of the shift matching.
    #[command(subcommand)]
    Bijection(BijectionCommand),
    /// Orbit sum of a sampled prefix under the cyclic coefficient permutation.
    OrbitCheck(OrbitArgs),
    /// Certified brackets of the level crossings of one sample.
    Crossings(CrossingsArgs),
    /// Cylinder witnesses for the residual sets.
    Witness(WitnessArgs),
}

#[derive(Debug, Subcommand)]
pub enum BijectionCommand {
    /// Enumerate every word of length N and verify the matching.
    Verify(BijectionArgs),
}

/// Flags every subcommand accepts.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SharedArgs {
    /// Coefficient set as a comma-separated list of rationals, e.g. "-1,1".
    #[arg(long, allow_hyphen_values = true)]
    pub set: Option<String>,
    /// Probabilities in the order of --set, e.g. "1/4,3/4". Defaults to uniform.
    #[arg(long)]
    pub weights: Option<String>,
    /// Flat TOML file of settings; flags override it.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Worker threads. Defaults to the machine's parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output file. Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Maximum number of terms one evaluation may sum.
    #[arg(long)]
    pub term_budget: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub shared: SharedArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sample index within the seed's family of streams.
    #[arg(long)]
    pub index: Option<u64>,
    /// First grid depth 1 - x.
    #[arg(long)]
    pub start: Option<f64>,
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Smallest grid depth 1 - x.
    #[arg(long)]
    pub depth: Option<f64>,
    /// Tail tolerance at every grid point.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: Option<f64>,
    /// Also write an SVG plot of the certified bounds.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub shared: SharedArgs,
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub start: Option<f64>,
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub depth: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Depths at which verdicts are also tallied, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub report_depths: Option<Vec<f64>>,
    /// Offsets m for the walk positivity estimate, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub walk_m: Option<Vec<u64>>,
    /// Horizons for the walk positivity estimate, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub walk_horizons: Option<Vec<u64>>,
    /// Thresholds for the zero-one diagnostic, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub zero_one_thresholds: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BijectionArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub shared: SharedArgs,
    /// Word length.
    #[arg(long)]
    pub n: Option<usize>,
    /// Largest k^N that may be enumerated.
    #[arg(long)]
    pub max_words: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OrbitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub shared: SharedArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub index: Option<u64>,
    #[arg(long)]
    pub x: Option<f64>,
    /// Prefix length.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CrossingsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub shared: SharedArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub index: Option<u64>,
    /// Level whose crossings are bracketed.
    #[arg(long, allow_hyphen_values = true)]
    pub y: Option<f64>,
    /// Depth window `hi:lo`, searched on [1 - hi, 1 - lo].
    #[arg(long)]
    pub window: Option<String>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub max_brackets: Option<usize>,
    /// Tolerance refinements allowed per indeterminate point.
    #[arg(long)]
    pub subdivision_budget: Option<u32>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WitnessArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub shared: SharedArgs,
    /// Fixed leading coefficients, comma separated values from the set.
    #[arg(long, allow_hyphen_values = true)]
    pub prefix: Option<String>,
    /// Level m the witness must exceed, or the coordinate bound for nonzero-coordinate.
    #[arg(long, allow_hyphen_values = true)]
    pub target: Option<f64>,
    #[arg(long, value_enum)]
    pub kind: Option<WitnessKind>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rpseries: {e}");
            e.exit_code()
        }
    }
}

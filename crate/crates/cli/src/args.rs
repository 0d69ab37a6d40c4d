//! Command-line flags.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use eivdc::dc::PartitionMode;
use eivdc::experiments::{MethodSpec, Spec};
use eivdc::Method;

#[derive(Debug, Parser)]
#[command(
    name = "eivdc",
    version,
    about = "Error-in-variables slope estimation with least squares, third-moment and divide-and-conquer estimators"
)]
pub struct Cli {
    /// TOML file with defaults for any flag; flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Seed for all randomness. A fresh seed is drawn and printed when omitted.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a firm-year panel and write it as CSV.
    Simulate(SimulateArgs),
    /// Estimate the slope of a panel read from CSV.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo study over the simulation design.
    Mc(McArgs),
    /// Estimate on expanding windows with a fixed start year.
    ExpandWindow(WindowArgs),
}

#[derive(Debug, Args, Default)]
pub struct SchemaArgs {
    /// Firm identifier column.
    #[arg(long)]
    pub firm_col: Option<String>,
    /// Year column.
    #[arg(long)]
    pub year_col: Option<String>,
    /// Outcome column.
    #[arg(long)]
    pub y_col: Option<String>,
    /// Mismeasured regressor column.
    #[arg(long)]
    pub x_col: Option<String>,
    /// Control column; repeat or separate with commas.
    #[arg(long, value_delimiter = ',')]
    pub z_col: Vec<String>,
    /// Use no control columns.
    #[arg(long, conflicts_with = "z_col")]
    pub no_controls: bool,
}

#[derive(Debug, Args)]
pub struct DgpArgs {
    /// Firms.
    #[arg(long)]
    pub n: Option<usize>,
    /// Periods.
    #[arg(long)]
    pub t: Option<usize>,
    /// Slope on the latent regressor.
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Coefficient on the control.
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub dgp: DgpArgs,
    #[command(flatten)]
    pub schema: SchemaArgs,
    /// Year label of the first period.
    #[arg(long, allow_negative_numbers = true)]
    pub first_year: Option<i64>,
    /// Output CSV (default: standard output).
    #[arg(long, short, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InferenceArgs {
    /// Significance level of the intervals.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Bootstrap draws for DC intervals.
    #[arg(long)]
    pub bootstrap_draws: Option<usize>,
    /// Assignment of firms to blocks.
    #[arg(long, value_parser = parse_partition)]
    pub partition_mode: Option<PartitionMode>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Panel CSV with a header row.
    #[arg(long, short, value_name = "PATH")]
    pub input: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
    /// Estimator: ols, 3m or dc.
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    /// Blocks per year (dc only).
    #[arg(long)]
    pub blocks_per_year: Option<usize>,
    /// Firm fixed effects.
    #[arg(long)]
    pub fe: bool,
    /// Time effects.
    #[arg(long)]
    pub te: bool,
    #[command(flatten)]
    pub inference: InferenceArgs,
    /// Write the JSON report here; the summary then goes to standard output.
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[command(flatten)]
    pub dgp: DgpArgs,
    /// Replications.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Methods, e.g. `ols,3m,dc:4` (dc:<blocks per year>).
    #[arg(long, value_delimiter = ',', value_parser = parse_method_spec)]
    pub methods: Vec<MethodSpec>,
    /// Specifications 1-4: intercept, fixed effects, time effects, both.
    #[arg(long, value_delimiter = ',', value_parser = parse_spec)]
    pub specs: Vec<Spec>,
    #[command(flatten)]
    pub inference: InferenceArgs,
    /// Full-scale design: 3,000 firms, 20 periods, 20,000 replications.
    #[arg(long)]
    pub paper_scale: bool,
    /// Write the summary table as CSV.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// Write the summary with its configuration as JSON.
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    /// Panel CSV with a header row.
    #[arg(long, short, value_name = "PATH")]
    pub input: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
    /// First year of every window (default: first panel year).
    #[arg(long, allow_negative_numbers = true)]
    pub start_year: Option<i64>,
    /// Last year of the first window.
    #[arg(long, allow_negative_numbers = true)]
    pub first_end: Option<i64>,
    /// Methods, e.g. `ols,3m,dc:2`.
    #[arg(long, value_delimiter = ',', value_parser = parse_method_spec)]
    pub methods: Vec<MethodSpec>,
    /// Drop firm fixed effects (on by default).
    #[arg(long)]
    pub no_fe: bool,
    /// Time effects.
    #[arg(long)]
    pub te: bool,
    #[command(flatten)]
    pub inference: InferenceArgs,
    /// Output CSV (default: standard output).
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// Write the result as JSON.
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: eivdc::Error| e.to_string())
}

fn parse_method_spec(s: &str) -> Result<MethodSpec, String> {
    s.parse().map_err(|e: eivdc::Error| e.to_string())
}

fn parse_spec(s: &str) -> Result<Spec, String> {
    s.parse().map_err(|e: eivdc::Error| e.to_string())
}

fn parse_partition(s: &str) -> Result<PartitionMode, String> {
    s.parse().map_err(|e: eivdc::Error| e.to_string())
}

//! Command-line flags.
//!
//! Every option is optional here; defaults live in the option structs of
//! [`crate::commands`] so that config files and flags share them. Unset flags
//! serialize as absent keys.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use cmab_select::bandits::PolicyKind;
use cmab_select::HieOffset;

#[derive(Debug, Parser)]
#[command(name = "cmab-select", version, about = "Rank contextual features for multi-armed bandits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score and rank every feature of a logged bandit CSV.
    Score(ScoreArgs),
    /// Generate a synthetic log with known heterogeneous effects.
    Simulate(SimulateArgs),
    /// Replay-evaluate a policy on a feature subset.
    Replay(ReplayArgs),
    /// Run the synthetic benchmark and timing comparison.
    Bench(BenchArgs),
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct Shared {
    /// Flat JSON object of flag values; command-line flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SchemaArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Column holding the 0-based arm id.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arm_column: Option<String>,
    /// Column holding the 0/1 reward.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reward_column: Option<String>,
    /// Number of arms, when some arm ids never occur in the log.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arms: Option<usize>,
    /// Columns to read as categorical regardless of content.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub categorical: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct BinArgs {
    /// Quantile bins per continuous feature.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_categories: Option<usize>,
    /// Minimum pulls of every arm in every bin before merging.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_arm_samples: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct CombineArgs {
    /// Weight of the normalized HIE score.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha1: Option<f64>,
    /// Weight of the normalized HDD score.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha2: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kl_floor: Option<f64>,
    /// `global` or `per_bin`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hie_offset: Option<HieOffset>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct GeneratorArgs {
    /// Events per generated log.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_hte: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_corr: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_irrel: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effect: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ScoreArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub shared: Shared,
    #[command(flatten)]
    #[serde(flatten)]
    pub schema: SchemaArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub bins: BinArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub combine: CombineArgs,
    /// Worker threads for scoring.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub shared: Shared,
    #[command(flatten)]
    #[serde(flatten)]
    pub generator: GeneratorArgs,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ReplayArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub shared: Shared,
    #[command(flatten)]
    #[serde(flatten)]
    pub schema: SchemaArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub bins: BinArgs,
    /// linucb, qlinucb or cohort-ts.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicyKind>,
    /// Feature to condition on; repeat for a subset.
    #[arg(long)]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub feature: Vec<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_ucb: Option<f64>,
    /// Include wall-clock time in the JSON output.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub timing: bool,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct BenchArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub shared: Shared,
    #[command(flatten)]
    #[serde(flatten)]
    pub generator: GeneratorArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub bins: BinArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub combine: CombineArgs,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Comma-separated policies to replay.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub policies: Vec<PolicyKind>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_ucb: Option<f64>,
    /// Worker threads for trials; timings are only comparable with 1.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    /// Plot-ready CSV path; defaults to the output path with a .csv extension.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<std::path::PathBuf>,
    /// Include the timing table in the JSON output.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub timing: bool,
}

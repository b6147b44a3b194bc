//! The `inkeval` command line. Every subcommand is a library function that
//! returns its output and exit code, so tests can run them in-process.
//!
//! Exit codes: 0 success, 1 validation failure, 2 external-service failure,
//! 64 usage error.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::gateway::Aspect;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_EXTERNAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Output of one command run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome { code: EXIT_OK, stdout, stderr: String::new() }
    }
}

/// A failed command: exit code plus message for stderr.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }
    pub fn validation(message: impl Into<String>) -> Self {
        CliError { code: EXIT_VALIDATION, message: message.into() }
    }
    pub fn external(message: impl Into<String>) -> Self {
        CliError { code: EXIT_EXTERNAL, message: message.into() }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "inkeval",
    version,
    about = "Reward, verification, dataset and metric tooling for painting-evaluation models"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML config file.
    #[arg(long, global = true, env = "INKEVAL_CONFIG")]
    pub config: Option<PathBuf>,
    /// Worker threads for parallel stages (default 8).
    #[arg(long, global = true, env = "INKEVAL_PARALLELISM")]
    pub parallelism: Option<usize>,
    /// Concurrent request cap per endpoint (default 8).
    #[arg(long, global = true, env = "INKEVAL_MAX_INFLIGHT")]
    pub max_inflight: Option<usize>,
    /// Directory for the response cache and content store.
    #[arg(long, global = true, env = "INKEVAL_CACHE_DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Base URL of a similarity service; the builtin scorer is used when unset or unreachable.
    #[arg(long, global = true, env = "INKEVAL_SIMILARITY_URL")]
    pub similarity_url: Option<String>,
    #[arg(long, global = true, env = "INKEVAL_EVALUATOR_URL")]
    pub evaluator_url: Option<String>,
    #[arg(long, global = true, env = "INKEVAL_EVALUATOR_MODEL")]
    pub evaluator_model: Option<String>,
    #[arg(long, global = true, env = "INKEVAL_CONSTRUCTOR_URL")]
    pub constructor_url: Option<String>,
    #[arg(long, global = true, env = "INKEVAL_CONSTRUCTOR_MODEL")]
    pub constructor_model: Option<String>,
    #[arg(long, global = true, env = "INKEVAL_T2I_URL")]
    pub t2i_url: Option<String>,
    #[arg(long, global = true, env = "INKEVAL_T2I_MODEL")]
    pub t2i_model: Option<String>,
    /// Log requests and responses (API keys are never logged).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a raw model response and print the report as JSON (exit 0 iff complete).
    Parse(ParseArgs),
    /// Score responses against manifest references.
    Reward(RewardArgs),
    /// Group-relative advantages for a JSON array of rewards (or an array of groups).
    Advantages(AdvantagesArgs),
    /// Clipped surrogate objective for one group.
    Surrogate(SurrogateArgs),
    /// Full metric report for predictions against a manifest.
    Evaluate(EvaluateArgs),
    /// Best-of-N generation with evaluator selection.
    Bon(BonArgs),
    /// Build a manifest from valuation and synthetic-label sources.
    BuildDataset(BuildDatasetArgs),
    /// Rank correlation between model scores and human rankings.
    HumanCorr(HumanCorrArgs),
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    /// Response text file ("-" for stdin).
    pub input: PathBuf,
    /// Image width in pixels, for pixel-coordinate boxes.
    #[arg(long, default_value_t = 1)]
    pub width: u32,
    #[arg(long, default_value_t = 1)]
    pub height: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TableFormat {
    Table,
    Json,
}

#[derive(Debug, Args)]
pub struct RewardArgs {
    /// JSONL of {"id": ..., "response": ...}.
    #[arg(long)]
    pub responses: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub w_acc: Option<f64>,
    #[arg(long)]
    pub w_bert: Option<f64>,
    #[arg(long)]
    pub w_miou: Option<f64>,
    #[arg(long)]
    pub w_format: Option<f64>,
    #[arg(long, value_enum, default_value_t = TableFormat::Table)]
    pub format: TableFormat,
}

#[derive(Debug, Args)]
pub struct AdvantagesArgs {
    /// JSON file ("-" for stdin).
    pub input: PathBuf,
    #[arg(long)]
    pub std_floor: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SurrogateArgs {
    /// JSON with "rewards" and either "ratios" or "logp_new" and "logp_old".
    pub input: PathBuf,
    #[arg(long)]
    pub clip_epsilon: Option<f64>,
    #[arg(long)]
    pub std_floor: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Json,
    Kv,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// JSONL of {"id": ..., "response": ...}, one per manifest record.
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    pub format: ReportFormat,
    /// Add one report per scroll type.
    #[arg(long)]
    pub by_scroll_type: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AspectArg {
    Hanging,
    Square,
    Handscroll,
    Free,
}

impl From<AspectArg> for Aspect {
    fn from(a: AspectArg) -> Self {
        match a {
            AspectArg::Hanging => Aspect::Hanging,
            AspectArg::Square => Aspect::Square,
            AspectArg::Handscroll => Aspect::Handscroll,
            AspectArg::Free => Aspect::Free,
        }
    }
}

#[derive(Debug, Args)]
pub struct BonArgs {
    #[arg(long, conflicts_with = "prompt_file", required_unless_present = "prompt_file")]
    pub prompt: Option<String>,
    #[arg(long)]
    pub prompt_file: Option<PathBuf>,
    #[arg(short = 'n', long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = AspectArg::Free)]
    pub aspect: AspectArg,
    /// Use deterministic mock endpoints.
    #[arg(long)]
    pub mock: bool,
    /// Mock evaluator scores by candidate index, e.g. "2,3,x,5" ("x" = unscoreable).
    #[arg(long, requires = "mock")]
    pub mock_scores: Option<String>,
    /// Append the run record to this JSONL file as well as printing it.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildDatasetArgs {
    /// Sources config (TOML).
    pub sources: PathBuf,
    /// Manifest output path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Where flagged chains are written (JSONL). Defaults next to the output.
    #[arg(long)]
    pub review_queue: Option<PathBuf>,
    /// Use the deterministic mock constructor.
    #[arg(long)]
    pub mock: bool,
}

#[derive(Debug, Args)]
pub struct HumanCorrArgs {
    /// CSV with columns [group,] item, score.
    #[arg(long)]
    pub model_scores: PathBuf,
    /// CSV with columns [group,] item, rank (1 = best).
    #[arg(long)]
    pub human_rankings: PathBuf,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    run_cli(&cli)
}

pub fn run_cli(cli: &Cli) -> Outcome {
    match commands::dispatch(cli) {
        Ok(outcome) => outcome,
        Err(e) => Outcome { code: e.code, stdout: String::new(), stderr: format!("error: {}\n", e.message) },
    }
}

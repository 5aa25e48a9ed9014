//! `tiereval`: manifests, response ingestion, hierarchical-learning scores,
//! static and adaptive evaluation, comparison tables, simulation and
//! pairwise-difficulty analysis from one command line.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::io::CliResult;

#[derive(Parser, Debug)]
#[command(
    name = "tiereval",
    version,
    about = "Difficulty-graded classification evaluation"
)]
struct Cli {
    /// JSON object supplying defaults for any flag (flags on the command line win).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a prompt manifest or push it through the mock generator.
    #[command(subcommand)]
    Manifest(ManifestCmd),
    /// Validate response logs and write one matrix file per model.
    Ingest(IngestArgs),
    /// Triplet pattern shares and hierarchical-learning score.
    Hls(HlsCmd),
    /// Full, static-k or adaptive evaluation of one matrix.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Error of subset evaluations against the full evaluation.
    Compare(CompareArgs),
    /// Per-difficulty, per-attribute and comparison tables.
    #[command(subcommand)]
    Tables(TablesCmd),
    /// Confidence histograms per difficulty.
    Confidence(ConfidenceCmd),
    /// Generate a response log from a pool of synthetic responders.
    Simulate(SimulateArgs),
    /// Pairwise comparison schedules and Bradley-Terry analysis.
    #[command(subcommand)]
    Btm(BtmCmd),
}

#[derive(Subcommand, Debug)]
enum ManifestCmd {
    Gen(ManifestGenArgs),
    MockGenerate(MockGenerateArgs),
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct ManifestGenArgs {
    /// Class list: JSON array or one name per line.
    #[arg(long)]
    pub classes: Option<PathBuf>,
    #[arg(long)]
    pub descriptors: Option<PathBuf>,
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long)]
    pub items_per_cell: Option<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct MockGenerateArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output directory for prompts.log and generation.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct IngestArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, num_args = 1..)]
    #[serde(default)]
    pub responses: Vec<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_conflicts_with_subcommands = true)]
struct HlsCmd {
    #[command(subcommand)]
    sub: Option<HlsSub>,
    #[command(flatten)]
    args: HlsArgs,
}

#[derive(Subcommand, Debug)]
enum HlsSub {
    /// Pearson correlation of HLS and accuracy across report files.
    Correlate(HlsCorrelateArgs),
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct HlsArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// by-index (default) or random.
    #[arg(long)]
    pub pairing: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct HlsCorrelateArgs {
    #[arg(long, num_args = 1..)]
    #[serde(default)]
    pub reports: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum EvalCmd {
    /// Every item of every cell.
    Full(EvalFullArgs),
    /// k items per difficulty per cell, sampled without replacement.
    Static(EvalStaticArgs),
    /// Two-round adaptive test per cell.
    Adaptive(EvalAdaptiveArgs),
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct EvalFullArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct EvalStaticArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Items per difficulty per cell (default 3).
    #[arg(long)]
    pub k: Option<u32>,
    /// Default 3.
    #[arg(long)]
    pub repeats: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct EvalAdaptiveArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Built-in preset name (ours_old, ours_new) or a preset JSON file.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub repeats: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Include every session (asked items, points) in the output.
    #[arg(long)]
    #[serde(default)]
    pub with_sessions: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct CompareArgs {
    /// Output of `eval full`.
    #[arg(long)]
    pub ground: Option<PathBuf>,
    /// Outputs of `eval static` / `eval adaptive`; one comparison per strategy.
    #[arg(long, num_args = 1..)]
    #[serde(default)]
    pub candidates: Vec<PathBuf>,
    /// Headline metric: mae (default), rmse or mse.
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum TablesCmd {
    /// Accuracy per attribute and model, one table per difficulty.
    Difficulty(TablesDifficultyArgs),
    /// Score per attribute and model.
    Scores(TablesScoresArgs),
    /// Ground score/accuracy and subset errors per model.
    Compare(TablesCompareArgs),
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct TablesDifficultyArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Matrix files (full evaluation).
    #[arg(long, num_args = 1..)]
    #[serde(default)]
    pub matrix: Vec<PathBuf>,
    /// Evaluation outputs (first report of each file) instead of matrices.
    #[arg(long, num_args = 1..)]
    #[serde(default)]
    pub reports: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct TablesScoresArgs {
    #[arg(long, num_args = 1..)]
    #[serde(default)]
    pub reports: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct TablesCompareArgs {
    /// Outputs of `compare`.
    #[arg(long, num_args = 1..)]
    #[serde(default)]
    pub comparisons: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_conflicts_with_subcommands = true)]
struct ConfidenceCmd {
    #[command(subcommand)]
    sub: Option<ConfidenceSub>,
    #[command(flatten)]
    args: ConfidenceArgs,
}

#[derive(Subcommand, Debug)]
enum ConfidenceSub {
    /// Average histograms of several models.
    Average(ConfidenceAverageArgs),
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct ConfidenceArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Default 10.
    #[arg(long)]
    pub bins: Option<usize>,
    /// easy, medium, hard or all (default).
    #[arg(long)]
    pub difficulty: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct ConfidenceAverageArgs {
    /// Outputs of `confidence`.
    #[arg(long, num_args = 1..)]
    #[serde(default)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub pool: Option<PathBuf>,
    /// Overrides the manifest named in the pool file.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Overrides the pool seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum BtmCmd {
    /// Cross-level comparison slots per (class, attribute).
    Schedule(BtmScheduleArgs),
    /// Fit strengths to a comparison log.
    Fit(BtmFitArgs),
    /// Correlate fitted strengths with difficulty labels.
    Correlate(BtmCorrelateArgs),
    /// Draw judgements for a schedule from known strengths.
    SimulateRaters(BtmSimulateArgs),
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct BtmScheduleArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Default 3.
    #[arg(long)]
    pub images_per_level: Option<u32>,
    /// Comma-separated subset; all classes when omitted.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub classes: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub attributes: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct BtmFitArgs {
    /// Comparison log (JSONL).
    #[arg(long)]
    pub comparisons: Option<PathBuf>,
    /// Smoothing added to every directed pair (default 0.1).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Default 1e-8.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Default 1000.
    #[arg(long)]
    pub max_iter: Option<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct BtmCorrelateArgs {
    /// Output of `btm fit`.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Labels taken from item difficulties.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// JSON object item_id -> 1|2|3, instead of --manifest.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct BtmSimulateArgs {
    /// Output of `btm schedule`.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    /// Judgements per slot (default 1).
    #[arg(long)]
    pub per_slot: Option<u32>,
    /// JSON object item_id -> true strength.
    #[arg(long)]
    pub lambda: Option<PathBuf>,
    /// Without --lambda, strength = spacing * (level - 2); default 1.0.
    #[arg(long)]
    pub spacing: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> CliResult<()> {
    let config = match &cli.config {
        Some(path) => io::read_config(path)?,
        None => Default::default(),
    };
    use commands as c;
    match cli.command {
        Command::Manifest(ManifestCmd::Gen(a)) => c::manifest_gen(io::merge_config(&a, &config)?),
        Command::Manifest(ManifestCmd::MockGenerate(a)) => {
            c::mock_generate(io::merge_config(&a, &config)?)
        }
        Command::Ingest(a) => c::ingest(io::merge_config(&a, &config)?),
        Command::Hls(HlsCmd {
            sub: Some(HlsSub::Correlate(a)),
            ..
        }) => c::hls_correlate(io::merge_config(&a, &config)?),
        Command::Hls(HlsCmd { sub: None, args }) => c::hls(io::merge_config(&args, &config)?),
        Command::Eval(EvalCmd::Full(a)) => c::eval_full(io::merge_config(&a, &config)?),
        Command::Eval(EvalCmd::Static(a)) => c::eval_static(io::merge_config(&a, &config)?),
        Command::Eval(EvalCmd::Adaptive(a)) => c::eval_adaptive(io::merge_config(&a, &config)?),
        Command::Compare(a) => c::compare(io::merge_config(&a, &config)?),
        Command::Tables(TablesCmd::Difficulty(a)) => {
            c::tables_difficulty(io::merge_config(&a, &config)?)
        }
        Command::Tables(TablesCmd::Scores(a)) => c::tables_scores(io::merge_config(&a, &config)?),
        Command::Tables(TablesCmd::Compare(a)) => c::tables_compare(io::merge_config(&a, &config)?),
        Command::Confidence(ConfidenceCmd {
            sub: Some(ConfidenceSub::Average(a)),
            ..
        }) => c::confidence_average(io::merge_config(&a, &config)?),
        Command::Confidence(ConfidenceCmd { sub: None, args }) => {
            c::confidence(io::merge_config(&args, &config)?)
        }
        Command::Simulate(a) => c::simulate(io::merge_config(&a, &config)?),
        Command::Btm(BtmCmd::Schedule(a)) => c::btm_schedule(io::merge_config(&a, &config)?),
        Command::Btm(BtmCmd::Fit(a)) => c::btm_fit(io::merge_config(&a, &config)?),
        Command::Btm(BtmCmd::Correlate(a)) => c::btm_correlate(io::merge_config(&a, &config)?),
        Command::Btm(BtmCmd::SimulateRaters(a)) => {
            c::btm_simulate_raters(io::merge_config(&a, &config)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = match e.kind {
                io::Kind::Validation => "validation",
                io::Kind::Runtime => "runtime",
            };
            eprintln!("tiereval: {kind} error: {}", e.message);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! `hazardkg`: ingest hazard tables, train the segmenter, build the search
//! index and knowledge graph, and report statistics.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::PipelineConfig;

#[derive(Debug, Parser)]
#[command(
    name = "hazardkg",
    version,
    about = "Substation hidden-danger record mining pipeline"
)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    /// TOML file with default paths and parameters.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse flattened hazard tables into records.jsonl.
    Ingest(IngestArgs),
    /// Train the segmentation model from a gold-segmented corpus.
    Train(TrainArgs),
    /// Segment text with a trained model.
    Segment(SegmentArgs),
    /// Score the model and the baselines on a gold corpus.
    Eval(EvalArgs),
    /// Add records to a sharded search index.
    Index(IndexArgs),
    /// Query a search index.
    Search(SearchArgs),
    /// Build, query and export the knowledge graph.
    #[command(subcommand)]
    Kg(KgCommand),
    /// Monthly hazard-type statistics and seasonal flags.
    Stats(StatsArgs),
    /// Apply the risk prediction rules to records.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Table text files (UTF-8).
    #[arg(long = "input", visible_alias = "in", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Header lexicon, one header per line.
    #[arg(long)]
    headers: Option<PathBuf>,
    /// Record id prefix; defaults to each input's file stem.
    #[arg(long)]
    id_prefix: Option<String>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Gold corpus: one sentence per line, words separated by spaces.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// Text to segment; without it, lines are read from --input or stdin.
    #[arg(long, conflicts_with = "input")]
    text: Option<String>,
    #[arg(long, visible_alias = "in")]
    input: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// Gold-segmented test corpus.
    #[arg(long)]
    gold: PathBuf,
    /// Gold-segmented training corpus for the dictionary and bigram
    /// baselines.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Baselines to report next to the HMM; all of them when only
    /// --train is given.
    #[arg(long, value_enum, requires = "train")]
    baseline: Vec<Baseline>,
    #[arg(long, default_value_t = 4)]
    max_word_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Baseline {
    Maxmatch,
    Ngram,
}

#[derive(Debug, Args)]
struct IndexArgs {
    #[arg(long)]
    records: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    dir: Option<PathBuf>,
    #[arg(long)]
    shards: Option<u32>,
    /// Simulated storage nodes the shards are spread over.
    #[arg(long)]
    nodes: Option<u32>,
}

#[derive(Debug, Args)]
struct SearchArgs {
    #[arg(long)]
    dir: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    query: String,
    #[arg(short, long, default_value_t = 10)]
    k: usize,
}

#[derive(Debug, Subcommand)]
enum KgCommand {
    /// Extract entities and relations from records.
    Build(KgBuildArgs),
    /// Keyword-seeded subgraph.
    Query(KgQueryArgs),
    /// Write a graph as a graph document or Graphviz DOT.
    Export(KgExportArgs),
}

#[derive(Debug, Args)]
struct KgBuildArgs {
    #[arg(long)]
    records: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    lexicons: Option<PathBuf>,
    /// Add to the graph already stored at --out.
    #[arg(long)]
    extend: bool,
}

#[derive(Debug, Args)]
struct KgQueryArgs {
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Comma-separated keywords.
    #[arg(long, value_delimiter = ',', required = true)]
    keywords: Vec<String>,
    #[arg(long, default_value_t = 1)]
    hops: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct KgExportArgs {
    #[arg(long)]
    graph: Option<PathBuf>,
    /// `graph-document` or `dot`.
    #[arg(long, default_value = "dot")]
    format: String,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    records: Option<PathBuf>,
    /// Plot data (`month,type,count`).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    factor: Option<f64>,
    /// Hazard-type keyword file.
    #[arg(long)]
    keywords: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    records: Option<PathBuf>,
    #[arg(long)]
    rules: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::Ingest(a) => commands::ingest(&cfg, a, &mut out),
        Command::Train(a) => commands::train(&cfg, a, &mut out),
        Command::Segment(a) => commands::segment(&cfg, a, &mut out),
        Command::Eval(a) => commands::eval(&cfg, a, &mut out),
        Command::Index(a) => commands::index(&cfg, a, &mut out),
        Command::Search(a) => commands::search(&cfg, a, &mut out),
        Command::Kg(KgCommand::Build(a)) => commands::kg_build(&cfg, a, &mut out),
        Command::Kg(KgCommand::Query(a)) => commands::kg_query(&cfg, a, &mut out),
        Command::Kg(KgCommand::Export(a)) => commands::kg_export(&cfg, a, &mut out),
        Command::Stats(a) => commands::stats(&cfg, a, &mut out),
        Command::Predict(a) => commands::predict(&cfg, a, &mut out),
    }
}

//! `grl-probe`: generate graphs, train node embeddings, measure how
//! topological structure survives in latent space, and certify the
//! random-walk and aggregator properties the methods rely on.
//!
//! Exit codes: 0 success, 1 configuration error, 2 completed with
//! partial failures (failed sweep runs or evaluation tasks).

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};
use grl_core::generate::Family;
use grl_core::sweep::Method;

mod commands;

/// A command failed in one of the two documented ways.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable files, invalid config: exit code 1.
    Config(String),
    /// The command ran, but some units of work failed: exit code 2.
    Partial(String),
}

impl CliError {
    pub fn config(e: impl std::fmt::Display) -> CliError {
        CliError::Config(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "grl-probe",
    version,
    about = "Graph embedding probe: synthetic generators, walk/GNN trainers, \
             topology evaluation, sweeps, and lemma certification"
)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Generate a synthetic graph and write a canonical edge list
    Generate(GenerateArgs),
    /// Compute per-node topological properties plus graph-level statistics
    Properties(PropertiesArgs),
    /// Train one embedding and write it with a metadata sidecar
    Embed(Box<EmbedArgs>),
    /// Score an embedding on prediction tasks, appending result rows
    Evaluate(EvaluateArgs),
    /// Run a configured hyperparameter sweep (resumable)
    Sweep(SweepArgs),
    /// Render summary tables and SVG charts from a results CSV
    Report(ReportArgs),
    /// Certify random-walk transition properties on a graph
    VerifyLemmas(VerifyLemmasArgs),
    /// Report neighborhood-multiset collision rates per aggregator
    MultisetReport(MultisetReportArgs),
}

#[derive(clap::Args)]
pub struct GenerateArgs {
    /// Graph family: ba (preferential attachment), er (uniform random),
    /// hk (preferential attachment with triad closure)
    #[arg(long, value_parser = Family::from_str)]
    family: Family,
    /// Number of nodes
    #[arg(long)]
    n: usize,
    /// Edges added per new node (ba, hk)
    #[arg(long)]
    m: Option<usize>,
    /// Edge probability (er) or triad-closure probability (hk)
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output edge-list path; metadata lands beside it as <out>.meta.json
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
pub struct PropertiesArgs {
    /// Input edge list
    #[arg(long)]
    graph: PathBuf,
    /// Seed for the community-detection pass
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path; graph-level stats land beside it as <out>.stats.json
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
pub struct EmbedArgs {
    /// deepwalk | node2vec | gcn | sage-mean | sage-maxpool | gat
    #[arg(long, value_parser = Method::from_str)]
    method: Method,
    /// Input edge list
    #[arg(long)]
    graph: PathBuf,
    /// Output embedding path; metadata lands beside it as <out>.meta.json
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 128)]
    dim: usize,
    /// Walks per node (walk-based methods)
    #[arg(long, default_value_t = 10)]
    num_walks: usize,
    #[arg(long, default_value_t = 40)]
    walk_length: usize,
    /// Skip-gram context window
    #[arg(long, default_value_t = 10)]
    window: usize,
    /// Negative samples per positive pair
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    /// Negative-sampling distribution exponent over degrees
    #[arg(long, default_value_t = 0.75)]
    ns_exponent: f64,
    /// Frequent-node subsampling threshold (0 disables)
    #[arg(long, default_value_t = 0.0)]
    subsample_freq: f64,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    /// Defaults to 0.025 for walk methods, 0.05 for message-passing methods
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Return parameter (node2vec)
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// In-out parameter (node2vec)
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    /// Hidden layer width (message-passing methods)
    #[arg(long, default_value_t = 128)]
    hidden_dim: usize,
    /// Adjacency rows truncated to this many neighbors (gcn, sage)
    #[arg(long, default_value_t = 100)]
    max_degree: usize,
    /// Depth-1 neighbor sample size (sage)
    #[arg(long, default_value_t = 25)]
    s1: usize,
    /// Depth-2 neighbor sample size (sage)
    #[arg(long, default_value_t = 10)]
    s2: usize,
    /// Attention heads (gat); must divide hidden-dim
    #[arg(long, default_value_t = 4)]
    heads: usize,
    #[arg(long, default_value_t = 0.0)]
    momentum: f64,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Walk-method trainer workers; >1 selects lock-free parallel updates,
    /// reproducible in distribution only. Capped by GRL_PROBE_THREADS.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(clap::Args)]
pub struct EvaluateArgs {
    /// Edge list the embedding's rows refer to (same node order)
    #[arg(long)]
    graph: PathBuf,
    /// Embedding file ("N d" header then one row per node)
    #[arg(long)]
    embedding: PathBuf,
    /// Comma-separated tasks, or "all": link_prediction, degree,
    /// avg_neighbor_degree, triangles, clustering_coefficient, closeness,
    /// community. Link prediction holds edges out of THIS graph; train the
    /// embedding on a split's train graph (as `sweep` does) for honest AUC.
    #[arg(long, default_value = "all")]
    tasks: String,
    /// Split seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.9)]
    train_fraction: f64,
    /// Results CSV to append to (created with header if missing)
    #[arg(long)]
    out: PathBuf,
    /// Dataset name for result rows (default: graph file stem)
    #[arg(long)]
    dataset: Option<String>,
    /// Method name for result rows (default: from the embedding's sidecar)
    #[arg(long)]
    method: Option<String>,
    /// Readout-model search grid: "full" (3 sizes x 3 depths) or "small"
    #[arg(long, default_value = "full")]
    forest: String,
}

#[derive(clap::Args)]
pub struct SweepArgs {
    /// TOML experiment config
    #[arg(long)]
    config: PathBuf,
    /// Worker threads (default: all cores; capped by GRL_PROBE_THREADS)
    #[arg(long)]
    threads: Option<usize>,
    /// First search the walk grid per (dataset, method) at default
    /// hyperparameters, then sweep with each winner's walk settings frozen
    #[arg(long)]
    pre_search: bool,
    /// Print the enumerated cross product and exit without executing
    #[arg(long)]
    dry_run: bool,
}

#[derive(clap::Args)]
pub struct ReportArgs {
    /// Results CSV produced by `sweep` or `evaluate`
    #[arg(long)]
    results: PathBuf,
    /// dataset_stats.csv for statistic-vs-performance charts
    /// (default: sibling of the results file, when present)
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Output directory for tables and charts
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
pub struct VerifyLemmasArgs {
    /// Input edge list
    #[arg(long)]
    graph: PathBuf,
    /// Check the identity deg(u)·P^t(u,v) = deg(v)·P^t(v,u) for t = 1..=t-max
    #[arg(long, default_value_t = 20)]
    t_max: usize,
    /// Power at which transition rows are compared to the degree-proportional
    /// limit distribution
    #[arg(long, default_value_t = 500)]
    convergence_t: usize,
    /// Output JSON report path
    #[arg(long)]
    report: PathBuf,
}

#[derive(clap::Args)]
pub struct MultisetReportArgs {
    /// Input edge list
    #[arg(long)]
    graph: PathBuf,
    /// Node features fed to the aggregators: "degrees" (scalar degree)
    /// or "degree-onehot"
    #[arg(long, default_value = "degrees")]
    features: String,
    /// Output JSON path (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

/// GRL_PROBE_THREADS, when set to a positive integer, caps every worker pool.
pub fn thread_cap() -> Option<usize> {
    std::env::var("GRL_PROBE_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
}

/// Effective worker count: explicit flag if given, else all cores, both
/// clamped by GRL_PROBE_THREADS.
pub fn resolve_threads(flag: Option<usize>) -> usize {
    let available = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let mut threads = flag.unwrap_or(available).max(1);
    if let Some(cap) = thread_cap() {
        threads = threads.min(cap);
    }
    threads
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    // cap the data-parallel pools (walk generation, metric BFS, tree growth)
    if let Some(cap) = thread_cap() {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cap)
            .build_global();
    }
    let result = match cli.command {
        Commands::Generate(args) => commands::generate(&args),
        Commands::Properties(args) => commands::properties(&args),
        Commands::Embed(args) => commands::embed(&args),
        Commands::Evaluate(args) => commands::evaluate(&args),
        Commands::Sweep(args) => commands::sweep(&args),
        Commands::Report(args) => commands::report(&args),
        Commands::VerifyLemmas(args) => commands::verify_lemmas(&args),
        Commands::MultisetReport(args) => commands::multiset_report(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(CliError::Partial(message)) => {
            eprintln!("{message}");
            ExitCode::from(2)
        }
    }
}

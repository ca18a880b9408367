mod commands;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bidguard::pipeline::PipelineConfig;

#[derive(Parser)]
#[command(name = "bidguard", version, about = "Bid-manipulation-robust reviewer assignment")]
struct Cli {
    /// Pipeline configuration (JSON); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 lets the runtime decide.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic citation corpus as JSONL.
    GenCorpus {
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a conference (papers, reviewers, TPMS, bids) from a corpus.
    GenConference(GenConferenceArgs),
    /// Build the hashed feature matrix of a conference.
    Featurize {
        #[arg(long)]
        conference: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        hash_ratio: Option<f64>,
    },
    /// Fit the ridge scorer on the capped bids and write scores.
    Train(TrainArgs),
    /// Plan a bid-poisoning attack on one reviewer-paper pair.
    Attack(AttackArgs),
    /// Screen the top-K candidates of every paper for manipulated scores.
    Defend(DefendArgs),
    /// Solve the reviewer assignment.
    Assign(AssignArgs),
    /// Run the full pipeline and every experiment into a reports directory.
    Evaluate {
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a reports directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Args)]
struct GenConferenceArgs {
    /// JSONL corpus; generated from the configuration when omitted.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    min_cluster: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
}

/// Conference and feature directories plus the label settings that
/// reproduce the training labels.
#[derive(Args)]
struct Data {
    #[arg(long)]
    conference: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    u_cap: Option<usize>,
    /// Attack overlay applied to the bids before use.
    #[arg(long)]
    plan: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: Data,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    /// Score table; defaults to scores.csv next to the model.
    #[arg(long)]
    scores: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AttackKindArg {
    Simple,
    Whitebox,
    Blackbox,
}

#[derive(Args)]
struct AttackArgs {
    #[command(flatten)]
    data: Data,
    /// Needed by the white-box attack.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: AttackKindArg,
    /// Target pair as REVIEWER,PAPER.
    #[arg(long)]
    target: String,
    #[arg(long, default_value_t = 1)]
    ma: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum DetectorArg {
    Approx,
    Exact,
    Greedy,
}

#[derive(Args)]
struct DefendArgs {
    #[command(flatten)]
    data: Data,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    md: usize,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum, default_value = "approx")]
    detector: DetectorArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AssignArgs {
    #[arg(long)]
    scores: PathBuf,
    /// Verdicts from `defend`; only pairs not removed are permitted.
    #[arg(long)]
    candidates: Option<PathBuf>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

/// Failure split by exit code.
#[derive(Debug)]
enum Failure {
    Param(String),
    Other(String),
}

impl From<bidguard::Error> for Failure {
    fn from(e: bidguard::Error) -> Self {
        if e.is_param() {
            Failure::Param(e.to_string())
        } else {
            Failure::Other(e.to_string())
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn load_config(cli: &Cli) -> CliResult<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = load_config(&cli)?;
    if !matches!(cli.command, Command::Evaluate { .. }) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Failure::Other(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::GenCorpus { out } => commands::gen_corpus(&cfg, &out),
        Command::GenConference(args) => commands::gen_conference(cfg, args),
        Command::Featurize { conference, out, hash_ratio } => {
            commands::featurize(&conference, &out, hash_ratio.unwrap_or(cfg.hash_ratio))
        }
        Command::Train(args) => commands::train(&cfg, args),
        Command::Attack(args) => commands::attack(&cfg, args),
        Command::Defend(args) => commands::defend(&cfg, args),
        Command::Assign(args) => commands::assign(&cfg, args),
        Command::Evaluate { out } => commands::evaluate(&cfg, &out, cli.threads),
        Command::Report { dir } => {
            print!("{}", bidguard::pipeline::emit_report(&dir)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Param(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

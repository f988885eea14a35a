//! `speechdep` command-line tool.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use speechdep::RootPolicy;

use commands::IoFailure;

#[derive(Parser, Debug)]
#[command(
    name = "speechdep",
    version,
    about = "Dependency parsing tools for speech transcripts"
)]
struct Cli {
    /// Worker threads for sentence-level work (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for randomised commands.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = PolicyArg::Multi)]
    root_policy: PolicyArg,
    /// Machine-readable output where applicable.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyArg {
    Single,
    Multi,
}

impl From<PolicyArg> for RootPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Single => RootPolicy::SingleRoot,
            PolicyArg::Multi => RootPolicy::MultiRoot,
        }
    }
}

#[derive(Args, Debug)]
struct Io {
    input: PathBuf,
    /// Output file (default: stdout).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// CoNLL-U to relative-POS label file.
    Encode(Io),
    /// Label file back to CoNLL-U, repairing ill-formed label sequences.
    Decode(Io),
    /// Decode maximum spanning trees from arc scores.
    Parse(ParseArgs),
    /// Word segmentation from CTC posteriors or word time stamps.
    Segment(SegmentArgs),
    /// Score a hypothesis against a reference treebank.
    Eval(EvalArgs),
    /// Corrupt a treebank with simulated recognition errors.
    Perturb(PerturbArgs),
    /// Corpus statistics.
    Stats(Io),
}

#[derive(Args, Debug)]
pub struct ParseArgs {
    /// Score file with `#scores` blocks.
    #[arg(long)]
    scores: PathBuf,
    /// Token file, `form<TAB>pos` per line.
    #[arg(long)]
    tokens: PathBuf,
    /// Relation inventory, one per line, in label-score order.
    #[arg(long)]
    relations: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SegmentMode {
    /// Spans from the greedy CTC path.
    Audio,
    /// Spans from time stamps in a CoNLL-U file.
    Oracle,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PoolArg {
    Mean,
    Last,
    Lstm,
}

#[derive(Args, Debug)]
pub struct SegmentArgs {
    #[arg(long)]
    posteriors: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long, value_enum, default_value_t = SegmentMode::Audio)]
    mode: SegmentMode,
    /// CoNLL-U with `AlignBegin`/`AlignEnd` in MISC (oracle mode).
    #[arg(long)]
    timestamps: Option<PathBuf>,
    /// Frames per second of the posteriors.
    #[arg(long, default_value_t = 50.0)]
    frame_rate: f64,
    /// Also write `sent_id<TAB>text` lines here.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Frame features to pool into word vectors.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = PoolArg::Mean)]
    pool: PoolArg,
    /// Tensor file with LSTM weights for `--pool lstm`.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Where to write pooled word vectors (required with --features).
    #[arg(long)]
    vectors: Option<PathBuf>,
    /// Span file (default: stdout).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    hyp: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Require identical tokenisation and score without alignment.
    #[arg(long)]
    standard: bool,
    /// Compare forms case-insensitively.
    #[arg(long)]
    case_fold: bool,
    /// Also report every sentence.
    #[arg(long)]
    verbose: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PerturbArgs {
    #[command(flatten)]
    io: Io,
    #[arg(long, default_value_t = 0.0)]
    sub_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    ins_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    del_rate: f64,
    /// Per-character noise inside substituted forms.
    #[arg(long, default_value_t = 0.1)]
    char_noise_rate: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: {}", e);
            return ExitCode::from(1);
        }
    }

    let policy = RootPolicy::from(cli.root_policy);
    let result = match &cli.command {
        Command::Encode(io) => commands::encode(&io.input, io.output.as_deref()),
        Command::Decode(io) => commands::decode(&io.input, io.output.as_deref(), policy),
        Command::Parse(args) => commands::parse(args, policy),
        Command::Segment(args) => commands::segment(args),
        Command::Eval(args) => commands::eval(args, cli.json),
        Command::Perturb(args) => commands::perturb(args, cli.seed),
        Command::Stats(io) => commands::stats(&io.input, io.output.as_deref(), cli.json),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e);
            if e.downcast_ref::<IoFailure>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

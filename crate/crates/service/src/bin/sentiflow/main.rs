mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Sentiment analytics for e-commerce feedback streams.
#[derive(Debug, Parser)]
#[command(name = "sentiflow", version, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a labelled synthetic corpus as JSON lines.
    GenCorpus(GenCorpusArgs),
    /// Train the transformer and Naive Bayes models on a labelled corpus.
    Train(TrainArgs),
    /// Score every configured method on a labelled corpus and write reports.
    Eval(EvalArgs),
    /// Classify documents and print one JSON result per line.
    Classify(ClassifyArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Follow a JSON-lines file and push new documents through the pipeline.
    Watch(WatchArgs),
    /// Render window, trend and alert reports from the analytics log.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenCorpusArgs {
    #[arg(long, default_value_t = 1000)]
    docs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    domains: usize,
    /// Probability that a sentiment term is drawn from another class.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, short, default_value = "corpus.jsonl")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Directory for the checkpoint, vocabulary, baselines and a ready-to-use config.
    #[arg(long, short, default_value = "model")]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Fraction of the corpus held out (written to `heldout.jsonl`).
    #[arg(long, default_value_t = 0.2)]
    holdout: f64,
    #[arg(long, default_value_t = 2)]
    min_freq: usize,
    /// Loss weights of the sentiment, aspect and domain heads.
    #[arg(long, num_args = 3, value_names = ["ALPHA", "BETA", "GAMMA"])]
    loss_weights: Option<Vec<f64>>,
    /// Naive Bayes additive smoothing.
    #[arg(long, default_value_t = 1.0)]
    smoothing: f64,
    /// Comma-separated aspect names; defaults to the built-in set.
    #[arg(long, value_delimiter = ',')]
    aspects: Option<Vec<String>>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, short)]
    config: PathBuf,
    /// Labelled documents to score.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "reports")]
    reports: PathBuf,
    #[arg(long, default_value = "md")]
    format: String,
    /// Dataset label used as the column group in the results table.
    #[arg(long, default_value = "Synthetic")]
    dataset: String,
    /// Timed classifications per method for the latency column.
    #[arg(long, default_value_t = 200)]
    repetitions: usize,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[arg(long, short)]
    config: PathBuf,
    /// Classify this text instead of reading documents.
    #[arg(long, conflicts_with = "input")]
    text: Option<String>,
    /// Domain name from the config, or a numeric id.
    #[arg(long, default_value = "0")]
    domain: String,
    /// JSON-lines documents; `-` reads standard input.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Include the pooled document representation in the output.
    #[arg(long)]
    embedding: bool,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides `service.bind`.
    #[arg(long)]
    bind: Option<String>,
}

#[derive(Debug, Args)]
struct WatchArgs {
    /// JSON-lines file to follow.
    file: PathBuf,
    #[arg(long, short)]
    config: PathBuf,
    /// Start at the beginning of the file instead of its current end.
    #[arg(long)]
    from_start: bool,
    /// Stop once the end of the file is reached.
    #[arg(long)]
    exit_at_eof: bool,
    #[arg(long, default_value_t = 250)]
    poll_ms: u64,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long, short)]
    config: PathBuf,
    #[arg(long, default_value = "reports")]
    reports: PathBuf,
    #[arg(long, default_value = "md")]
    format: String,
    /// Most recent windows to include.
    #[arg(long, default_value_t = 24)]
    windows: usize,
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
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let outcome = match cli.command {
        Command::GenCorpus(a) => commands::gen_corpus(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Classify(a) => commands::classify(a),
        Command::Serve(a) => commands::serve(a),
        Command::Watch(a) => commands::watch(a),
        Command::Report(a) => report::report(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

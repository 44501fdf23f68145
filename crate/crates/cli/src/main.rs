//! Command-line interface for the knowledge-anchored FAQ matching pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 training failure.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }

    pub fn train(message: impl Into<String>) -> Self {
        CliError { code: 3, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<kanchor::Error> for CliError {
    fn from(err: kanchor::Error) -> Self {
        match err {
            kanchor::Error::Train(e) => CliError::train(e.to_string()),
            other => CliError::data(other.to_string()),
        }
    }
}

impl From<kanchor::KgError> for CliError {
    fn from(err: kanchor::KgError) -> Self {
        CliError::data(err.to_string())
    }
}

impl From<kanchor::DataError> for CliError {
    fn from(err: kanchor::DataError) -> Self {
        CliError::data(err.to_string())
    }
}

impl From<kanchor::TrainError> for CliError {
    fn from(err: kanchor::TrainError) -> Self {
        CliError::train(err.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "kanchor",
    about = "FAQ matching with knowledge anchors: build a domain graph, anchor \
             queries to it, train and evaluate multi-channel matchers",
    version
)]
struct Cli {
    /// Override every seed in configs and generators.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Suppress progress logging on stderr.
    #[arg(long, global = true)]
    quiet: bool,

    /// Default config file applied by train/eval/ablate when their own
    /// --config is omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command that loads the knowledge graph.
#[derive(Args, Clone)]
struct KgArgs {
    /// entities.jsonl path
    #[arg(long)]
    entities: PathBuf,
    /// triples.jsonl path
    #[arg(long)]
    triples: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a knowledge graph, optionally mine new triples from a
    /// corpus, and write the normalized graph plus stats JSON.
    BuildKg {
        #[command(flatten)]
        kg: KgArgs,
        /// Raw corpus (one text per line) for pattern bootstrapping.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Pattern file (JSONL of {"relation", "infix", "head_first"}).
        #[arg(long, requires = "corpus")]
        patterns: Option<PathBuf>,
        /// Output directory for entities.jsonl, triples.jsonl, stats.json.
        #[arg(long)]
        out_dir: PathBuf,
    },

    /// Anchor one text or a file of texts; emits one JSON object per line.
    Anchor {
        #[command(flatten)]
        kg: KgArgs,
        /// Trained disambiguation model; falls back to rules + reasoning
        /// with a warning when absent.
        #[arg(long)]
        ntd: Option<PathBuf>,
        /// Acceptance threshold on the blended score.
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Tokenizer: whitespace or char.
        #[arg(long, default_value = "whitespace")]
        mode: String,
        /// Rule-scorer weights JSON; built-in defaults when absent.
        #[arg(long)]
        rb_weights: Option<PathBuf>,
        /// Single text to anchor.
        #[arg(long, conflicts_with = "input")]
        text: Option<String>,
        /// File with one text per line.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Include every candidate with rule/neural/reasoning breakdown.
        #[arg(long)]
        explain: bool,
    },

    /// Train a matcher from a config file and a dataset TSV.
    Train {
        #[command(flatten)]
        kg: KgArgs,
        #[arg(long)]
        config: Option<PathBuf>,
        /// query \t title \t label dataset.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        ntd: Option<PathBuf>,
        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,
        /// JSONL anchor cache, reused when present and updated otherwise.
        #[arg(long)]
        anchor_cache: Option<PathBuf>,
    },

    /// Train the neural triple disambiguator from a labelled TSV.
    TrainNtd {
        #[command(flatten)]
        kg: KgArgs,
        /// query \t head \t relation \t tail \t label rows.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 4096)]
        buckets: usize,
        /// Train on everything instead of holding out a validation slice.
        #[arg(long)]
        no_holdout: bool,
    },

    /// Evaluate a checkpoint on a dataset (or train-and-evaluate across
    /// several seeds with --runs and --config).
    Eval {
        #[command(flatten)]
        kg: KgArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        ntd: Option<PathBuf>,
        /// Average accuracy across N train/eval runs with consecutive seeds.
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[arg(long)]
        config: Option<PathBuf>,
    },

    /// Train the four channel subsets and report test accuracy per subset.
    Ablate {
        #[command(flatten)]
        kg: KgArgs,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        ntd: Option<PathBuf>,
        /// Comma-separated seed list.
        #[arg(long, default_value = "1,2,3")]
        seeds: String,
        /// Also write the TSV report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Interactive matching: read queries from stdin, rank indexed titles.
    Match {
        #[command(flatten)]
        kg: KgArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        ntd: Option<PathBuf>,
        /// TSV of FAQ titles (first column).
        #[arg(long)]
        index: PathBuf,
        /// How many results to print per query.
        #[arg(long, default_value_t = 5)]
        k: usize,
    },

    /// Regenerate the committed synthetic corpus (toy graph and datasets).
    Synth {
        /// Output directory; gets kg/ and synth/ subdirectories.
        #[arg(long)]
        out_dir: PathBuf,
        /// What to generate: all, kg, disamb, matching.
        #[arg(long, default_value = "all")]
        what: String,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // help/version are successful exits
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let global_seed = cli.seed;
    let quiet = cli.quiet;
    let global_config = cli.config.clone();
    match cli.command {
        Command::BuildKg { kg, corpus, patterns, out_dir } => {
            commands::build_kg(&kg, corpus.as_deref(), patterns.as_deref(), &out_dir, quiet)
        }
        Command::Anchor { kg, ntd, threshold, mode, rb_weights, text, input, explain } => {
            commands::anchor(
                &kg,
                ntd.as_deref(),
                threshold,
                &mode,
                rb_weights.as_deref(),
                text.as_deref(),
                input.as_deref(),
                explain,
                quiet,
            )
        }
        Command::Train { kg, config, data, ntd, out, anchor_cache } => {
            let config_path = config.or(global_config).ok_or_else(|| {
                CliError::usage("train needs --config (or the global --config)")
            })?;
            commands::train(
                &kg,
                &config_path,
                &data,
                ntd.as_deref(),
                &out,
                anchor_cache.as_deref(),
                global_seed,
                quiet,
            )
        }
        Command::TrainNtd { kg, data, out, epochs, lr, dim, buckets, no_holdout } => {
            commands::train_ntd(
                &kg,
                &data,
                &out,
                epochs,
                lr,
                dim,
                buckets,
                !no_holdout,
                global_seed,
                quiet,
            )
        }
        Command::Eval { kg, checkpoint, data, ntd, runs, config } => commands::eval(
            &kg,
            checkpoint.as_deref(),
            &data,
            ntd.as_deref(),
            runs,
            config.or(global_config).as_deref(),
            global_seed,
            quiet,
        ),
        Command::Ablate { kg, config, data, ntd, seeds, out } => {
            let config_path = config.or(global_config).ok_or_else(|| {
                CliError::usage("ablate needs --config (or the global --config)")
            })?;
            commands::ablate(
                &kg,
                &config_path,
                &data,
                ntd.as_deref(),
                &seeds,
                out.as_deref(),
                global_seed,
                quiet,
            )
        }
        Command::Match { kg, checkpoint, ntd, index, k } => {
            commands::match_repl(&kg, &checkpoint, ntd.as_deref(), &index, k, quiet)
        }
        Command::Synth { out_dir, what } => commands::synth(&out_dir, &what, global_seed, quiet),
    }
}

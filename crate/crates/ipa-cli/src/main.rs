//! Command-line entry point wiring the tokenizer, the two architectures,
//! and the training harness into reproducible experiments.

mod commands;

use clap::{Parser, Subcommand};
use ipa_cli::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "ipa",
    about = "Train and evaluate iterative piecewise affine and GPT-style language models",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a BPE tokenizer on a text corpus.
    TokenizerTrain {
        #[arg(long)]
        corpus: PathBuf,
        /// Target vocabulary size (>= 257).
        #[arg(long)]
        vocab: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model per a JSON run configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Resume from a checkpoint produced by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a text file.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Window length m.
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 8)]
        batch: usize,
        /// Append the result as a JSONL record.
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Tokenizer file override when the checkpointed path moved.
        #[arg(long)]
        tokenizer: Option<PathBuf>,
    },
    /// Sample text from a checkpoint.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        prompt: String,
        #[arg(long)]
        max_new: usize,
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        tokenizer: Option<PathBuf>,
    },
    /// Verify analytic gradients against central finite differences on a
    /// tiny model; exits nonzero if the max relative error exceeds 1e-4.
    Gradcheck {
        #[arg(long, value_parser = ["ipa", "gpt"])]
        model_kind: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Parameter-count table for both architectures at given lengths.
    Params {
        #[arg(long)]
        config: PathBuf,
        /// Sequence length; repeat for several rows.
        #[arg(long, required = true)]
        m: Vec<usize>,
        /// Vocabulary size override (otherwise the config's tokenizer file,
        /// falling back to 32768).
        #[arg(long)]
        vocab: Option<usize>,
        /// Machine-readable output.
        #[arg(long, default_value_t = false)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::TokenizerTrain { corpus, vocab, out } => {
            commands::tokenizer_train(&corpus, vocab, &out)
        }
        Command::Train { config, resume } => commands::train(&config, resume.as_deref()),
        Command::Eval {
            checkpoint,
            corpus,
            m,
            batch,
            metrics,
            tokenizer,
        } => commands::eval(
            &checkpoint,
            &corpus,
            m,
            batch,
            metrics.as_deref(),
            tokenizer.as_deref(),
        ),
        Command::Generate {
            checkpoint,
            prompt,
            max_new,
            temperature,
            seed,
            tokenizer,
        } => commands::generate(
            &checkpoint,
            &prompt,
            max_new,
            temperature,
            seed,
            tokenizer.as_deref(),
        ),
        Command::Gradcheck { model_kind, seed } => commands::gradcheck(&model_kind, seed),
        Command::Params {
            config,
            m,
            vocab,
            json,
        } => commands::params(&config, &m, vocab, json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

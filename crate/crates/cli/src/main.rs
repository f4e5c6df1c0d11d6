//! `nelex`: extract a bilingual named-entity lexicon from a verse-aligned
//! parallel corpus.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration or usage error.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::EvalArgs;
use crate::config::PipelineConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0:#}")]
    Runtime(#[from] anyhow::Error),
}

impl From<nelex::Error> for CliError {
    fn from(e: nelex::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "nelex", version, about = "Named-entity lexicon extraction from parallel verses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Pipeline settings; flags override the config file.
#[derive(Args, Debug, Default)]
struct Common {
    /// Flat `key = value` config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// English edition (`verse_id<TAB>text` lines)
    #[arg(long)]
    english: Option<String>,
    /// Target-language edition
    #[arg(long)]
    target: Option<String>,
    /// English named entities, one per line
    #[arg(long)]
    ne_list: Option<String>,
    /// English names for empty-input augmentation, one per line
    #[arg(long)]
    aug_list: Option<String>,
    /// tokenized or untokenized
    #[arg(long)]
    mode: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    max_fa: Option<String>,
    #[arg(long)]
    n_min: Option<String>,
    #[arg(long)]
    n_max: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    learning_rate: Option<String>,
    #[arg(long)]
    dropout: Option<String>,
    /// sgd or adam
    #[arg(long)]
    optimizer: Option<String>,
    /// Drop mined pairs scoring below this (off by default)
    #[arg(long)]
    min_score: Option<String>,
}

impl Common {
    fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        let overrides = [
            ("english", &self.english),
            ("target", &self.target),
            ("ne_list", &self.ne_list),
            ("aug_list", &self.aug_list),
            ("mode", &self.mode),
            ("out", &self.out),
            ("seed", &self.seed),
            ("max_fa", &self.max_fa),
            ("n_min", &self.n_min),
            ("n_max", &self.n_max),
            ("epochs", &self.epochs),
            ("batch_size", &self.batch_size),
            ("learning_rate", &self.learning_rate),
            ("dropout", &self.dropout),
            ("optimizer", &self.optimizer),
            ("min_score", &self.min_score),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                config.set(key, v, Path::new(""))?;
            }
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Bootstrap noisy NE pairs from ngram statistics
    Bootstrap(Common),
    /// Train the transliteration model on bootstrapped pairs
    Train {
        #[command(flatten)]
        common: Common,
        /// Pairs TSV (default: <out>/bootstrap_pairs.tsv)
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
    /// Mine one target NE per English NE with a trained model
    Mine {
        #[command(flatten)]
        common: Common,
        /// Model file (default: <out>/model.bin)
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Evaluate a mined resource against silver or gold references
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        resource: PathBuf,
        /// `english<TAB>target` reference lexicon
        #[arg(long, conflicts_with = "annotations")]
        silver: Option<PathBuf>,
        /// `question_id<TAB>annotator_id<TAB>chosen_option` lines
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Jaro distance at or below which a silver match is correct
        #[arg(long, default_value_t = nelex::eval::DEFAULT_JARO_THRESHOLD)]
        threshold: f64,
        /// Ignore combining marks when comparing
        #[arg(long)]
        strip_marks: bool,
        /// Write the per-pair report here instead of standard output
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Bootstrap, train and mine, then write a manifest of artifact hashes
    Run(Common),
    /// Write a synthetic corpus with known transliterations
    Synth {
        /// `key = value` spec file
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Join target words without spaces
        #[arg(long)]
        unsegmented: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Bootstrap(common) => commands::cmd_bootstrap(&common.resolve()?),
        Command::Train { common, pairs } => commands::cmd_train(&common.resolve()?, pairs.as_deref()),
        Command::Mine { common, model } => commands::cmd_mine(&common.resolve()?, model.as_deref()),
        Command::Eval {
            common,
            resource,
            silver,
            annotations,
            threshold,
            strip_marks,
            report,
        } => {
            if !(threshold > 0.0 && threshold <= 1.0) {
                return Err(CliError::Config(format!("threshold: {threshold} outside (0, 1]")));
            }
            let args = EvalArgs {
                resource,
                silver,
                annotations,
                threshold,
                strip_marks,
                report,
            };
            commands::cmd_eval(&common.resolve()?, &args)
        }
        Command::Run(common) => commands::cmd_run(&common.resolve()?),
        Command::Synth {
            spec,
            seed,
            unsegmented,
            out,
        } => commands::cmd_synth(spec.as_deref(), seed, unsegmented, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

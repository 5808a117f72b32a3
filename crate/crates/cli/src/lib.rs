//! The `seqvae` command line: prepare a split, train a model, evaluate it, recommend.

pub mod commands;
pub mod config;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use seqvae::data::SplitKind;
use seqvae::models::ModelKind;
use seqvae::Result;

use commands::{EvalRequest, Source};
pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "seqvae",
    version,
    about = "Variational autoencoders for sequential top-n recommendation"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat key = value TOML file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides `seed` from the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides one config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ratings file to a split directory.
    Prepare {
        /// `user,item,rating,timestamp` rows (see `delimiter`).
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Trains a model on a split and writes the best-validation checkpoint.
    Train {
        #[arg(long)]
        split: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// svae, mvae or rvae; defaults to the `model` config key.
        #[arg(long)]
        model: Option<ModelKind>,
    },
    /// Scores a checkpoint, or the popularity baseline, on held-out users.
    Eval {
        #[arg(long)]
        split: PathBuf,
        #[arg(long, required_unless_present = "pop", conflicts_with = "pop")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        pop: bool,
        /// validation or test.
        #[arg(long, default_value = "test")]
        which: SplitKind,
        /// Cutoffs, comma separated; defaults to the `cutoffs` config key.
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        /// Writes mean NDCG@100 per fold-in length bucket to this CSV.
        #[arg(long, value_name = "PATH")]
        by_history_length: Option<PathBuf>,
        /// Also writes the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ranks items for one history of raw item ids.
    Recommend {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Raw item ids, oldest first, comma separated.
        #[arg(long, value_delimiter = ',')]
        history: Vec<String>,
        #[arg(long, default_value_t = 10)]
        top_n: usize,
        /// Also writes the list here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let mut config = RunConfig::load(
        cli.common.config.as_deref(),
        &cli.common.set,
        cli.common.seed,
    )?;
    match cli.command {
        Command::Prepare { input, out: dir } => {
            commands::cmd_prepare(&input, &dir, &config, out)?;
        }
        Command::Train {
            split,
            out: dir,
            model,
        } => {
            let kind = model.unwrap_or(config.model);
            config.model = kind;
            commands::cmd_train(&split, &dir, kind, &config, out)?;
        }
        Command::Eval {
            split,
            checkpoint,
            pop: _,
            which,
            n,
            by_history_length,
            out: report_path,
        } => {
            if !n.is_empty() {
                config.cutoffs = n;
                config.validate()?;
            }
            // clap guarantees exactly one of the two
            let source = match &checkpoint {
                Some(dir) => Source::Checkpoint(dir),
                None => Source::Pop,
            };
            let req = EvalRequest {
                split_dir: &split,
                source,
                which,
                by_history_length: by_history_length.as_deref(),
                report_path: report_path.as_deref(),
            };
            commands::cmd_eval(&req, &config, out)?;
        }
        Command::Recommend {
            checkpoint,
            history,
            top_n,
            out: list_path,
        } => {
            let picks = commands::cmd_recommend(&checkpoint, &history, top_n, out)?;
            if let Some(path) = list_path {
                let text: String = picks.iter().map(|(id, s)| format!("{id}\t{s}\n")).collect();
                seqvae::artifact::write_file_atomically(&path, text)?;
            }
        }
    }
    Ok(())
}

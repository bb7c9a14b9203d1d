//! `hcvae` command-line interface: synthetic corpus generation, training,
//! evaluation, the complete-vs-subset comparison experiment, and the
//! finite-difference gradient check.
//!
//! Exit codes: 0 success, 2 configuration/validation error, 3 numerical
//! failure, 1 other errors (I/O and similar).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hcvae_core::error::CoreError;

#[derive(Parser)]
#[command(
    name = "hcvae",
    version,
    about = "Hierarchical CVAE text classifiers over a category/group label hierarchy"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus and hierarchy from the config's synth block.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the configured model variant; writes a checkpoint and a JSON-lines log.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a checkpoint on a corpus; writes score and matrix reports.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Optional hierarchy file cross-checked against the checkpoint.
        #[arg(long)]
        hierarchy: Option<PathBuf>,
        /// Latent handling: "mean" (deterministic) or "sample".
        #[arg(long, default_value = "mean")]
        mode: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train every configured variant on complete and subset regimes over
    /// several seeds; writes the score grid and HCVAE-CVAE heatmaps.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check analytic gradients of every variant against central finite
    /// differences at 64-bit (requires a tiny-dims config).
    Gradcheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn exit_code_for(err: &CoreError) -> u8 {
    use hcvae_core::data::DataError;
    match err {
        CoreError::Config(_)
        | CoreError::HierarchyMismatch { .. }
        | CoreError::MissingCategory { .. }
        | CoreError::DtypeMismatch { .. }
        | CoreError::BadMagic
        | CoreError::ParamShape { .. }
        | CoreError::Metrics(_) => 2,
        CoreError::Data(e) => match e {
            DataError::Io { .. } => 1,
            _ => 2,
        },
        CoreError::NanLoss { .. }
        | CoreError::NegativeKl { .. }
        | CoreError::GradCheckFailed { .. }
        | CoreError::NonDeterministicLoss { .. } => 3,
        CoreError::Autodiff(e) => match e {
            hcvae_core::autodiff::AutodiffError::NonFinite { .. } => 3,
            _ => 2,
        },
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth { config, out, seed } => commands::synth(&config, &out, seed),
        Command::Train { config, out, seed } => commands::train(&config, &out, seed),
        Command::Eval {
            checkpoint,
            corpus,
            hierarchy,
            mode,
            out,
            seed,
        } => commands::eval(
            &checkpoint,
            &corpus,
            hierarchy.as_deref(),
            &mode,
            &out,
            seed,
        ),
        Command::Compare { config, out, seed } => commands::compare(&config, &out, seed),
        Command::Gradcheck { config, out, seed } => {
            commands::gradcheck(&config, out.as_deref(), seed)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

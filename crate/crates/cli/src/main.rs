//! Command line front end.
//!
//! Exit codes: 0 success, 1 usage error (bad flags, bad config, missing
//! inputs), 2 runtime failure.

mod manifest;
mod run;
mod settings;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Invocation mistakes, kept apart from failures while running so the
/// two map to different exit codes.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

#[derive(Parser)]
#[command(name = "hornbeam", version)]
#[command(about = "Joint embedding and rule learning over knowledge graphs")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train an embedding model on a triple file.
    Train(RunArgs),
    /// Mine Horn rules, scoring them with a trained embedding.
    Mine(RunArgs),
    /// Alternate training and mining, feeding rule inferences back into
    /// the embedding as sampled extra positives.
    Hybrid(RunArgs),
    /// Rank held-out triples under a trained embedding.
    Eval(RunArgs),
    /// Precision of the top-k rules from a rule file against a held-out
    /// split.
    RulesEval(RunArgs),
}

/// One flag surface shared by every command; each command checks for
/// the paths it needs and notes the ones it ignores.
#[derive(Args)]
pub struct RunArgs {
    /// Training triples, one head<TAB>relation<TAB>tail per line.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Validation triples.
    #[arg(long)]
    pub valid: Option<PathBuf>,
    /// Test triples.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Embedding checkpoint to load.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Rule file to evaluate.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Directory for artifacts (created if missing).
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Flat key=value config file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Score function: transe, distmult, complex, rotate, bilinear.
    #[arg(long)]
    pub model: Option<String>,
    /// Embedding dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Distance norm for transe/rotate: l2 or l1.
    #[arg(long)]
    pub norm: Option<String>,
    /// SGD learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Minibatch size.
    #[arg(long)]
    pub batch: Option<usize>,
    /// Negatives drawn per positive.
    #[arg(long)]
    pub neg_ratio: Option<usize>,
    /// Weight of embedding confidence in rule quality, in [0, 1].
    #[arg(long)]
    pub omega: Option<f64>,
    /// Softmax temperature for sampling rule inferences.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Rules kept per iteration (0 disables mining in hybrid).
    #[arg(long)]
    pub topk: Option<usize>,
    /// Global hybrid iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Embedding SGD steps per iteration.
    #[arg(long)]
    pub inner_steps: Option<usize>,
    /// Root RNG seed; every stage derives its own stream from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Keep only test triples with endpoint sparsity above this.
    #[arg(long)]
    pub sparse_threshold: Option<f64>,
    /// Minimum head coverage for mined rules, in (0, 1].
    #[arg(long)]
    pub min_hc: Option<f64>,
    /// Comma-separated k values for rules-eval.
    #[arg(long)]
    pub ks: Option<String>,
    /// Pool head and tail ranks instead of averaging them per triple.
    #[arg(long)]
    pub pooled_ranks: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap sends --help and --version to stdout; those are not errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Cmd::Train(a) => run::train(a),
        Cmd::Mine(a) => run::mine(a),
        Cmd::Hybrid(a) => run::hybrid(a),
        Cmd::Eval(a) => run::eval(a),
        Cmd::RulesEval(a) => run::rules_eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<Usage>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

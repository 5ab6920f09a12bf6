//! `spam`: train, evaluate, explain and inspect polynomial additive models.
//!
//! Machine-readable results (JSON or CSV) go to stdout and `--out`;
//! progress text goes to stderr. Failures print `{"kind", "message"}` to
//! stdout and exit with 2 for I/O errors, 1 otherwise.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use spam_core::SpamError;

#[derive(Parser, Debug)]
#[command(name = "spam", version, about = "Polynomial additive models with low-rank interactions")]
pub struct Cli {
    /// Experiment recipe (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the training seed (search: the master seed; verify: the case seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for the data-parallel kernels.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a model from a recipe; writes model.json, history.jsonl, metrics.json.
    Train(TrainArgs),
    /// Recompute the task metric of a saved model on one split.
    Eval(EvalArgs),
    /// Per-term explanation of one input as CSV (kind,i,j,contribution).
    Explain(ExplainArgs),
    /// Check the fast kernels against the dense oracle and finite differences.
    Verify(VerifyArgs),
    /// Sorted singular-value magnitudes and their decay fit.
    Spectra(SpectraArgs),
    /// Random hyperparameter search over a recipe.
    Search(SearchArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Overrides the recipe's epoch count.
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// train, val or test.
    #[arg(long, default_value = "test")]
    pub split: String,
}

#[derive(Args, Debug)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Comma-separated input, already scaled to the model's [0, 1] range.
    #[arg(long, conflicts_with = "index")]
    pub row: Option<String>,
    /// Row of the recipe's dataset split to explain (needs --config).
    #[arg(long)]
    pub index: Option<usize>,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long, default_value_t = 0)]
    pub class: usize,
    /// Number of largest terms to list; the rest are summed into a residual row.
    #[arg(long)]
    pub top: Option<usize>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 6)]
    pub max_d: usize,
    #[arg(long, default_value_t = 3)]
    pub max_k: usize,
    #[arg(long, default_value_t = 4)]
    pub max_rank: usize,
    #[arg(long, default_value_t = 3)]
    pub max_classes: usize,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Harness self-test: perturbs the oracle so the check must fail.
    #[arg(long, hide = true)]
    pub corrupt: bool,
}

#[derive(Args, Debug)]
pub struct SpectraArgs {
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    /// Search space (JSON); defaults to the standard grid for the recipe's degree.
    #[arg(long)]
    pub space: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    /// Overrides the recipe's epoch count for every trial.
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Serialize)]
struct ErrorDoc<'a> {
    kind: &'a str,
    message: String,
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    let doc = ErrorDoc { kind, message };
    println!("{}", serde_json::to_string(&doc).unwrap_or_default());
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim().to_string(), 2),
    };
    if let Some(n) = cli.threads {
        if let Err(e) = commands::set_threads(n) {
            return fail(e.kind(), e.to_string(), 1);
        }
    }
    match commands::run(&cli) {
        Ok(code) => code,
        Err(e) => {
            let code = if matches!(e, SpamError::Io { .. }) { 2 } else { 1 };
            fail(e.kind(), e.to_string(), code)
        }
    }
}

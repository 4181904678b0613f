//! `sensel`: generate data, select sensors, evaluate selections and run
//! benchmark sweeps.

mod bench;
mod config;
mod data;
mod error;
mod eval;
mod generate;
mod select;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sensel::admm::SolverConfig;
use sensel::Method;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "sensel", version, about = "Sparse sensor selection under correlated measurement noise")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic snapshot matrix with a prescribed spectrum.
    Generate(generate::GenerateArgs),
    /// Select sensors on a dataset with one method.
    Select(select::SelectArgs),
    /// Evaluate a sensor file on a dataset, optionally with cross-validation.
    Eval(eval::EvalArgs),
    /// Sweep methods over seeds and budgets or sizes on synthetic data.
    Bench(bench::BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    GreedyWn,
    GreedyCn,
    AdmmWn,
    AdmmCn,
    AdmmCnWoNorm,
    Oracle,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::GreedyWn => Method::GreedyWn,
            MethodArg::GreedyCn => Method::GreedyCn,
            MethodArg::AdmmWn => Method::AdmmWn,
            MethodArg::AdmmCn => Method::AdmmCn,
            MethodArg::AdmmCnWoNorm => Method::AdmmCnWoNorm,
            MethodArg::Oracle => Method::Oracle,
        }
    }
}

/// ADMM step-size schedule and stopping rule.
#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Initial step size γ.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Factor applied to γ every decay period.
    #[arg(long, default_value_t = 0.99)]
    eta: f64,
    /// Iterations between γ reductions.
    #[arg(long, default_value_t = 200)]
    decay_period: usize,
    /// Tolerance on ‖X⁽ᵏ⁾ − X⁽ᵏ⁻¹⁾‖_F [default: 1e-6·√(n·r1)].
    #[arg(long)]
    eps_conv: Option<f64>,
    #[arg(long, default_value_t = 200_000)]
    max_iters: usize,
    /// Row-norm threshold for counting a row of X as selected.
    #[arg(long, default_value_t = 1e-4)]
    polish_threshold: f64,
}

impl SolverArgs {
    pub fn config(&self) -> Result<SolverConfig, CliError> {
        let config = SolverConfig {
            gamma_init: self.gamma,
            eta: self.eta,
            gamma_decay_period: self.decay_period,
            eps_conv: self.eps_conv,
            max_iters: self.max_iters,
            polish_threshold: self.polish_threshold,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Dataset location and preprocessing.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Grid file (binary SSEL1 or CSV).
    #[arg(long)]
    data: PathBuf,
    /// File format [default: from the extension].
    #[arg(long, value_enum)]
    format: Option<data::FormatArg>,
    /// Subtract the temporal mean of every row.
    #[arg(long)]
    center: bool,
}

fn main() -> ExitCode {
    let args = match config::expand_args(std::env::args_os().collect()) {
        Ok(args) => args,
        Err(e) => return e.report(),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(error::EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate::run(&a),
        Command::Select(a) => select::run(&a),
        Command::Eval(a) => eval::run(&a),
        Command::Bench(a) => bench::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}

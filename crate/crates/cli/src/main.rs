mod commands;
mod config;
mod error;
mod experiment;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::ConfigFile;
use crate::error::CliError;

/// Stochastic calculus via regularization: simulate paths, estimate brackets
/// and forward integrals, and check Ito formulas and weak Dirichlet chain rules.
#[derive(Debug, Parser)]
#[command(name = "regcalc", version)]
struct Cli {
    /// Flat key=value file using the long flag names as keys; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: $REGCALC_OUT, else ./regcalc-out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a path; writes the path CSV and a ground-truth JSON sidecar.
    Simulate(experiment::ExperimentArgs),
    /// Quadratic variation along the schedule; exit 1 if it does not converge.
    Qv(experiment::ExperimentArgs),
    /// Forward integral of X, or of dF/dx(t, X) with --fn, against X.
    Forward(FnArgs),
    /// Convergence table (epsilon, sup_gap) for one estimator.
    Convergence(ConvergenceArgs),
    /// Ito formula residuals for a catalog function.
    ItoCheck(ItoArgs),
    /// Orthogonality battery, negative control and optional chain rule.
    DirichletCheck(FnArgs),
    /// Scenario, function and process catalogs.
    List {
        /// Only entries whose id or anchor contains this text.
        filter: Option<String>,
    },
}

#[derive(Debug, Args)]
struct FnArgs {
    #[command(flatten)]
    exp: experiment::ExperimentArgs,
    /// Function id from the catalog (see `list`).
    #[arg(long = "fn")]
    function: Option<String>,
}

#[derive(Debug, Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    exp: experiment::ExperimentArgs,
    /// covariation, covariation_continuous, forward or forward_rv.
    #[arg(long)]
    estimator: Option<String>,
}

#[derive(Debug, Args)]
struct ItoArgs {
    #[command(flatten)]
    exp: experiment::ExperimentArgs,
    /// Function id from the catalog [default: square].
    #[arg(long = "fn")]
    function: Option<String>,
    /// c12, measure or c1lambda [default: c12].
    #[arg(long)]
    form: Option<String>,
    /// Pass threshold for sup|residual| / sup|F(t, X_t)| [default: 0.01].
    #[arg(long)]
    max_residual: Option<f64>,
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let cfg = ConfigFile::load(cli.config.as_deref())?;
    let out = cfg.out_dir(cli.out)?;
    let resolve = |args: &experiment::ExperimentArgs| experiment::Experiment::resolve(args, &cfg, out.clone());
    match cli.command {
        Command::Simulate(a) => commands::simulate(&resolve(&a)?),
        Command::Qv(a) => commands::qv(&resolve(&a)?),
        Command::Forward(a) => commands::forward(&resolve(&a.exp)?, cfg.pick(a.function, "fn")?),
        Command::Convergence(a) => {
            let estimator = cfg.pick(a.estimator, "estimator")?.unwrap_or_else(|| "covariation".into());
            commands::convergence(&resolve(&a.exp)?, &estimator)
        }
        Command::ItoCheck(a) => {
            let function = cfg.pick(a.function, "fn")?.unwrap_or_else(|| "square".into());
            let form = cfg.pick(a.form, "form")?.unwrap_or_else(|| "c12".into());
            let max_residual = cfg.pick(a.max_residual, "max_residual")?.unwrap_or(1e-2);
            commands::ito_check(&resolve(&a.exp)?, &function, &form, max_residual)
        }
        Command::DirichletCheck(a) => commands::dirichlet_check(&resolve(&a.exp)?, cfg.pick(a.function, "fn")?),
        Command::List { filter } => {
            commands::list(filter.as_deref().unwrap_or(""));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

//! Command-line front end for the sequential experimental design solver.
//!
//! Subcommands: `solve` fits lookahead policies and writes a policy file,
//! `assess` scores a policy file or a named baseline by Monte Carlo
//! simulation, `compare` scores several policies side by side, and
//! `lg-exact` exports the closed-form solution of the linear-Gaussian
//! problem. Exit codes: 0 success, 2 configuration error, 3 numerical
//! failure.

mod commands;
mod config;
mod policy_file;

use clap::{Args, Parser, Subcommand};
use commands::{cmd_assess, cmd_compare, cmd_lg_exact, cmd_solve, AssessSource, BaselineKind};
use config::{ConfigFile, RunConfig};
use soed::{ProblemId, Repr};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
}

impl From<soed::Error> for CliError {
    fn from(e: soed::Error) -> Self {
        match e {
            soed::Error::Config(m) => CliError::Config(m),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "soed",
    about = "Sequential optimal experimental design: solve, assess, and compare policies",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit lookahead value functions and write a policy file.
    Solve(SolveArgs),
    /// Score a policy file or a named baseline by simulation.
    Assess(AssessArgs),
    /// Score several policies or baselines side by side.
    Compare(CompareArgs),
    /// Export the closed-form linear-Gaussian solution and reward surface.
    LgExact(CommonArgs),
}

/// Flags shared by every subcommand. Values resolve in three layers:
/// per-problem defaults, then the --config file, then explicit flags.
#[derive(Args)]
struct CommonArgs {
    /// Configuration file (key = value sections; see README).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Problem id: lg, plume-case1, plume-case2, plume-case3.
    #[arg(long)]
    problem: Option<String>,
    /// Belief representation: analytical or grid(M).
    #[arg(long)]
    repr: Option<String>,
    /// Number of policy updates.
    #[arg(long = "L")]
    updates: Option<usize>,
    /// Master seed; every random draw derives from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Mean of the Gaussian exploration design measure.
    #[arg(long)]
    explore_mean: Option<f64>,
    /// Variance of the Gaussian exploration design measure.
    #[arg(long)]
    explore_var: Option<f64>,
    /// Fraction of regression trajectories driven by the previous policy.
    #[arg(long)]
    exploit_frac: Option<f64>,
    /// Regression trajectories per policy update.
    #[arg(long)]
    points: Option<usize>,
    /// Assessment trajectories.
    #[arg(long)]
    trajectories: Option<usize>,
    /// Assessment framework representation: analytical or grid(M).
    #[arg(long)]
    framework: Option<String>,
    /// Stochastic-optimizer iterations per design search.
    #[arg(long)]
    kw_iterations: Option<usize>,
    /// Monte Carlo samples per optimizer gradient estimate.
    #[arg(long)]
    kw_samples: Option<usize>,
    /// Worker threads (0 = all cores); never affects results.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct AssessArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Policy file written by solve (executes its last update by default).
    #[arg(long, conflicts_with = "baseline")]
    policy: Option<PathBuf>,
    /// Which policy update to execute from the policy file.
    #[arg(long, requires = "policy")]
    update: Option<usize>,
    /// Baseline to score instead of a policy file: greedy, batch, exploration.
    #[arg(long)]
    baseline: Option<String>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Policy file path (optionally path@l) or baseline name; repeatable.
    #[arg(long = "spec", required = true)]
    specs: Vec<String>,
}

/// Resolve defaults, config file, and flags into one effective config.
fn build_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let file = match &common.config {
        Some(path) => Some(ConfigFile::parse(&commands::read_to_string(path)?)?),
        None => None,
    };
    let problem = match &common.problem {
        Some(s) => ProblemId::parse(s).map_err(|e| CliError::Config(e.to_string()))?,
        None => match file.as_ref().map(|f| f.problem()).transpose()?.flatten() {
            Some(id) => id,
            None => {
                return Err(CliError::Config(
                    "no problem selected; pass --problem or a config file with [problem] id".into(),
                ))
            }
        },
    };
    let mut cfg = RunConfig::defaults(problem);
    if let Some(file) = &file {
        file.apply(&mut cfg)?;
    }
    cfg.problem = problem;
    if let Some(s) = &common.repr {
        cfg.repr = Repr::parse(s).map_err(|e| CliError::Config(e.to_string()))?;
    }
    if let Some(v) = common.updates {
        cfg.updates = v;
    }
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = common.explore_mean {
        cfg.explore.mean = v;
    }
    if let Some(v) = common.explore_var {
        cfg.explore.var = v;
    }
    if let Some(v) = common.exploit_frac {
        cfg.exploit_frac = v;
    }
    if let Some(v) = common.points {
        cfg.points = v;
    }
    if let Some(v) = common.trajectories {
        cfg.trajectories = v;
    }
    if let Some(s) = &common.framework {
        cfg.framework = Repr::parse(s).map_err(|e| CliError::Config(e.to_string()))?;
    }
    if let Some(v) = common.kw_iterations {
        cfg.kw.iterations = v;
    }
    if let Some(v) = common.kw_samples {
        cfg.kw.mc_samples = v;
    }
    if let Some(v) = common.workers {
        cfg.workers = v;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(args) => {
            let cfg = build_config(&args.common)?;
            cmd_solve(&cfg, &args.common.out)
        }
        Command::Assess(args) => {
            let cfg = build_config(&args.common)?;
            let source = match (&args.policy, &args.baseline) {
                (Some(path), None) => AssessSource::Policy {
                    path: path.clone(),
                    update: args.update,
                },
                (None, Some(name)) => AssessSource::Baseline(BaselineKind::parse(name)?),
                (None, None) => {
                    return Err(CliError::Config(
                        "assess needs --policy <file> or --baseline <name>".into(),
                    ))
                }
                (Some(_), Some(_)) => unreachable!("clap rejects conflicting flags"),
            };
            cmd_assess(&cfg, &source, &args.common.out)
        }
        Command::Compare(args) => {
            let cfg = build_config(&args.common)?;
            cmd_compare(&cfg, &args.specs, &args.common.out)
        }
        Command::LgExact(common) => {
            let cfg = build_config(&common)?;
            cmd_lg_exact(&cfg, &common.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

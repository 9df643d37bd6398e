use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use ccop_cli::cmd::{self, ConfigOverrides, GenerateKind, SolveInvocation};

/// Solver harness for cardinality-constrained nonlinear programs.
#[derive(Parser)]
#[command(name = "ccop", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct OverrideArgs {
    /// Initial penalty parameter.
    #[arg(long)]
    rho0: Option<f64>,
    /// Progress factor of the penalty test (> 1).
    #[arg(long)]
    tau: Option<f64>,
    /// Penalty growth factor (> 1).
    #[arg(long)]
    sigma: Option<f64>,
    /// Feasibility tolerance.
    #[arg(long)]
    tol_feas: Option<f64>,
    /// Stationarity-residual tolerance.
    #[arg(long)]
    tol_opt: Option<f64>,
    /// Active-set threshold.
    #[arg(long)]
    tol_active: Option<f64>,
    /// Outer iteration cap.
    #[arg(long)]
    max_outer: Option<usize>,
    /// Penalty cap.
    #[arg(long)]
    rho_max: Option<f64>,
}

impl From<&OverrideArgs> for ConfigOverrides {
    fn from(a: &OverrideArgs) -> Self {
        ConfigOverrides {
            rho0: a.rho0,
            tau: a.tau,
            sigma: a.sigma,
            tol_feas: a.tol_feas,
            tol_opt: a.tol_opt,
            tol_active: a.tol_active,
            max_outer: a.max_outer,
            rho_max: a.rho_max,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the safeguarded augmented Lagrangian solver on an instance.
    Solve {
        /// Instance file (JSON).
        #[arg(long)]
        problem: PathBuf,
        /// Start point as comma-separated values, e.g. "2,2".
        #[arg(long)]
        x0: Option<String>,
        /// Override the instance's cardinality bound.
        #[arg(long)]
        kappa: Option<usize>,
        /// Seed for a random start (used when --x0 is absent).
        #[arg(long)]
        seed: Option<u64>,
        /// Write a trace file to this path.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Enumerate all supports and report the best restricted solution.
    Oracle {
        #[arg(long)]
        problem: PathBuf,
        /// Refuse instances with more variables than this.
        #[arg(long, default_value_t = 20)]
        oracle_cap: usize,
        /// Seed for the restricted multistarts.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Compute the stationarity certificate at a point.
    Certify {
        #[arg(long)]
        problem: PathBuf,
        /// Point as comma-separated values, e.g. "0.5,1,0".
        #[arg(long)]
        point: String,
        #[arg(long, default_value_t = 1e-6)]
        tol_active: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol_opt: f64,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Write a seeded synthetic instance file.
    Generate {
        #[command(subcommand)]
        kind: GenerateCommand,
    },
    /// Solve several instances, concurrently, with default settings.
    Batch {
        /// Instance files.
        problems: Vec<PathBuf>,
        /// Seed for random starts (zero start when absent).
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for per-instance trace files.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
}

#[derive(Subcommand)]
enum GenerateCommand {
    /// Markowitz-style selection instance.
    Portfolio {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        kappa: usize,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Sparse least squares against a planted signal.
    SparseLsq {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        kappa: usize,
        #[arg(long, default_value_t = 20)]
        rows: usize,
        #[arg(long, default_value_t = 0.01)]
        noise: f64,
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Solve {
            problem,
            x0,
            kappa,
            seed,
            trace,
            overrides,
        } => cmd::cmd_solve(&SolveInvocation {
            problem,
            x0,
            kappa,
            overrides: (&overrides).into(),
            seed,
            trace,
        }),
        Command::Oracle {
            problem,
            oracle_cap,
            seed,
            trace,
            overrides,
        } => cmd::cmd_oracle(
            &problem,
            oracle_cap,
            seed,
            &(&overrides).into(),
            trace.as_deref(),
        ),
        Command::Certify {
            problem,
            point,
            tol_active,
            tol_opt,
            trace,
        } => cmd::cmd_certify(&problem, &point, tol_active, tol_opt, trace.as_deref()),
        Command::Generate { kind } => match kind {
            GenerateCommand::Portfolio {
                seed,
                n,
                kappa,
                out,
            } => cmd::cmd_generate(&GenerateKind::Portfolio, seed, n, kappa, &out),
            GenerateCommand::SparseLsq {
                seed,
                n,
                kappa,
                rows,
                noise,
                out,
            } => cmd::cmd_generate(&GenerateKind::SparseLsq { rows, noise }, seed, n, kappa, &out),
        },
        Command::Batch {
            problems,
            seed,
            out_dir,
            overrides,
        } => cmd::cmd_batch(&problems, &(&overrides).into(), seed, out_dir.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::from(0);
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(cmd::EXIT_USAGE as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(cmd::EXIT_USAGE as u8)
        }
    }
}

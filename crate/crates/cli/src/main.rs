mod commands;
mod grid;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "hetnet-in", version, about = "Coverage of user-centric interference nulling in two-tier HetNets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytical coverage; one JSON object per threshold.
    Coverage {
        #[command(flatten)]
        base: Base,
        #[command(flatten)]
        beta: Beta,
    },
    /// Monte Carlo coverage as CSV.
    Simulate {
        #[command(flatten)]
        base: Base,
        #[command(flatten)]
        beta: Beta,
        #[command(flatten)]
        mc: MonteCarlo,
    },
    /// Analytical against Monte Carlo coverage as CSV.
    Compare {
        #[command(flatten)]
        base: Base,
        #[command(flatten)]
        beta: Beta,
        #[command(flatten)]
        mc: MonteCarlo,
    },
    /// Order gain, coefficients and optimal U of the outage at small thresholds.
    Asymptotic {
        #[command(flatten)]
        base: Base,
    },
    /// CSV and a matplotlib script for one figure.
    Plotdata {
        figure: Figure,
        #[command(flatten)]
        base: Base,
        #[command(flatten)]
        beta: Beta,
        #[command(flatten)]
        mc: MonteCarlo,
    },
    /// Asymptotically optimal number of nulled users.
    OptimalU {
        #[command(flatten)]
        base: Base,
    },
}

#[derive(Args, Clone, Default)]
pub struct Base {
    /// JSON network configuration; the Fig-2 network when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Nulling budget U (a list or range for `asymptotic`).
    #[arg(long)]
    pub u_max: Option<String>,
    /// Request threshold of macro users.
    #[arg(long)]
    pub t1: Option<f64>,
    /// Request threshold of pico users.
    #[arg(long)]
    pub t2: Option<f64>,
    /// T1 = T2; a list or range sweeps it (`compare`, `plotdata fig2a`),
    /// where T = 1 stands for the non-IN network.
    #[arg(long)]
    pub t_joint: Option<String>,
    /// Output file (directory for `plotdata`); stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
pub struct Beta {
    /// SIR thresholds in dB: LIST or START:STOP:STEP.
    #[arg(long, allow_hyphen_values = true)]
    pub beta_db: Option<String>,
}

#[derive(Args, Clone, Default)]
pub struct MonteCarlo {
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub mode: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Figure {
    /// Coverage against the request threshold.
    Fig2a,
    /// Outage against the SIR threshold, log-log.
    Fig2b,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Coverage { base, beta } => commands::coverage(&base, &beta),
        Command::Simulate { base, beta, mc } => commands::simulate(&base, &beta, &mc),
        Command::Compare { base, beta, mc } => commands::compare(&base, &beta, &mc),
        Command::Asymptotic { base } => commands::asymptotic(&base),
        Command::Plotdata { figure, base, beta, mc } => commands::plotdata(figure, &base, &beta, &mc),
        Command::OptimalU { base } => commands::optimal_u(&base),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

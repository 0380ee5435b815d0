//! `robo-mv` command-line front end.
//!
//! Every command reads a JSON run config (or a manifest written by an earlier
//! run), applies flag overrides, and writes CSV/JSON outputs plus a
//! `manifest.json` echoing the resolved configuration.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "robo-mv", version, about = "Adaptive mean-variance robo-advisor engine")]
pub struct Cli {
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, env = "ROBO_MV_THREADS", default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Run config, or a manifest from an earlier run.
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub paths: Option<usize>,
    /// Gauss–Hermite points for returns and shocks.
    #[arg(long)]
    pub quad_points: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve for the equilibrium policy and write one CSV per time slice.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate wealth paths under a cycle strategy or the solved policy.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        delta: Option<f64>,
        /// Also write per-path terminal wealth and return.
        #[arg(long)]
        dump_paths: bool,
        #[arg(long, default_value_t = 50)]
        bins: usize,
    },
    /// Personalization measures over a range of interaction periods.
    Personalize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Inclusive range `a:b`.
        #[arg(long, default_value = "1:12")]
        phi_range: String,
        /// Paths for S; defaults to `--paths`, 0 skips S.
        #[arg(long)]
        s_paths: Option<usize>,
    },
    /// Closed-form Sharpe ratio of the two-regime cycle strategy along a sweep.
    Sharpe {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        delta: Option<f64>,
        #[arg(long, value_enum, default_value_t = SweepVar::Delta)]
        sweep: SweepVar,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 21)]
        steps: usize,
    },
    /// Risk aversion under which the cycle strategy is the equilibrium policy.
    ImpliedGamma {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        delta: Option<f64>,
    },
    /// Stationary distribution of the regime chain.
    Stationary {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    Delta,
    Lambda,
    A,
    B,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::Delta => "delta",
            SweepVar::Lambda => "lambda",
            SweepVar::A => "a",
            SweepVar::B => "b",
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<robo_mv::Error>() {
            return if e.is_config_error() { 2 } else { 3 };
        }
        if let Some(e) = cause.downcast_ref::<std::io::Error>() {
            // A closed stdout pipe (e.g. `| head`) is not a failure.
            return if e.kind() == std::io::ErrorKind::BrokenPipe { 0 } else { 4 };
        }
    }
    3
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            if code != 0 {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(code)
        }
    }
}

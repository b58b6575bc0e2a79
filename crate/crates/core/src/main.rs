use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sfpme::cli::{self, Overrides};

#[derive(Parser)]
#[command(name = "sfpme", version, about = "Stochastic fractional porous medium simulator and checks")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration file.
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: config, then SFPME_WORKERS, then 1).
    #[arg(long)]
    workers: Option<usize>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { seed: self.seed, workers: self.workers, out: self.out.clone() }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one path; write mass.csv and snapshots.
    Simulate(Common),
    /// Run an ensemble; write ensemble.csv and summary.txt.
    Ensemble(Common),
    /// Tabulate the stable kernel and fit its tail.
    Kernel {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Comma-separated times.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        t: Vec<f64>,
        /// Comma-separated positions (radii in two dimensions).
        #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,2,5,10")]
        x: Vec<f64>,
    },
    /// Run the built-in property suite.
    Verify {
        /// Run a single claim.
        #[arg(long)]
        only: Option<String>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, hide = true)]
        tamper_symbol: bool,
    },
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { cli::EXIT_USAGE as u8 } else { 0 });
        }
    };
    let (mut out, mut err) = (io::stdout().lock(), io::stderr().lock());
    let code = match args.command {
        Command::Simulate(c) => cli::cmd_simulate(&c.config, &c.overrides(), &mut out, &mut err),
        Command::Ensemble(c) => cli::cmd_ensemble(&c.config, &c.overrides(), &mut out, &mut err),
        Command::Kernel { alpha, dim, t, x } => cli::cmd_kernel(alpha, dim, &t, &x, &mut out, &mut err),
        Command::Verify { only, workers, tamper_symbol } => cli::cmd_verify(
            only.as_deref(),
            tamper_symbol,
            cli::resolve_workers(workers, None),
            &mut out,
            &mut err,
        ),
    };
    ExitCode::from(code as u8)
}

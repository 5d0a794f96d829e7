//! `netwit`: witnesses, inflation bounds and see-saw searches from the shell.
//!
//! Exit codes: 0 success, 1 certification or witness violation present,
//! 2 input error, 3 solver error.

mod commands;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use report::Format;

#[derive(Parser)]
#[command(name = "netwit", version, about = "Genuine network entanglement witnesses and certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Table {
    Bounds,
    Postselection,
    Seesaw,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the entropic and GHZ-fidelity witnesses on a state.
    Witness {
        #[arg(long)]
        state: PathBuf,
        /// "computational" or a JSON POVM file.
        #[arg(long, default_value = "computational")]
        measurement: String,
        /// Local dimension for the fidelity witness.
        #[arg(long)]
        d: Option<usize>,
        /// Number of parties for the fidelity witness.
        #[arg(long)]
        k: Option<usize>,
        /// Report the best entropic margin over all party orders.
        #[arg(long)]
        all_relabelings: bool,
        #[arg(long, default_value_t = netwit::witness::DEFAULT_WITNESS_TOL)]
        tol: f64,
    },
    /// Largest target fidelity compatible with the ring inflation.
    Bound {
        /// ghz, w or a JSON amplitude file.
        #[arg(long)]
        target: String,
        /// Write the SDP in conic JSON form.
        #[arg(long)]
        dump_problem: Option<PathBuf>,
    },
    /// Test a state for genuine network 3-entanglement.
    Certify {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        dump_problem: Option<PathBuf>,
    },
    /// Critical detection probability under postselection.
    Postselect {
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 0.005)]
        tol_p: f64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// See-saw lower bound on the network-2 fidelity.
    Seesaw {
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value_t = 2)]
        hidden_dim: usize,
        #[arg(long, default_value_t = 4)]
        branches: usize,
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        /// Save the best network model as JSON.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Recompute a published table and compare.
    Reproduce {
        #[arg(value_enum)]
        table: Table,
        #[arg(long, default_value_t = 0.005)]
        tol_p: f64,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(cli.command) {
        Ok(outcome) => {
            let text = outcome.report.render(cli.format);
            let written = match &cli.out {
                Some(path) => std::fs::write(path, text),
                None => std::io::stdout().write_all(text.as_bytes()),
            };
            if let Err(e) = written {
                eprintln!("error: cannot write output: {e}");
                return ExitCode::from(2);
            }
            ExitCode::from(outcome.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

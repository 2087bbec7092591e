use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spde_lab::harness::{emit_plot_data, execute, Overrides, ResultTable};

const THREADS_ENV: &str = "SPDE_LAB_THREADS";

#[derive(Parser)]
#[command(name = "spde-lab", version, about = "Experiments for jump-driven semilinear evolution equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON configuration.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output.directory`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base seed (overrides `mc.seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads. Falls back to SPDE_LAB_THREADS, then all cores.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print `param value [bound]` columns of one quantity from a result CSV.
    Plot {
        csv: PathBuf,
        quantity: String,
    },
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, String> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| format!("{THREADS_ENV} must be a positive integer, got `{v}`")),
        Err(_) => Ok(None),
    }
}

fn run(config: PathBuf, out: Option<PathBuf>, seed: Option<u64>, flag: Option<usize>) -> u8 {
    let threads = match threads(flag) {
        Ok(Some(0)) => {
            eprintln!("error: thread count must be positive");
            return 2;
        }
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return 2;
        }
    }
    match execute(&config, &Overrides { out, seed }) {
        Ok(summary) => {
            for row in summary.table.failures() {
                eprintln!(
                    "FAIL {} {} param={:?} value={:e} bound={:?}",
                    row.experiment, row.quantity, row.param, row.value, row.bound
                );
            }
            println!("{}", summary.csv.display());
            summary.exit_code() as u8
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code() as u8
        }
    }
}

fn plot(csv: PathBuf, quantity: &str) -> u8 {
    let text = match std::fs::read_to_string(&csv) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", csv.display());
            return 2;
        }
    };
    match ResultTable::parse_csv(&text).and_then(|t| emit_plot_data(&t, quantity)) {
        Ok(data) => {
            print!("{data}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, out, seed, threads } => run(config, out, seed, threads),
        Command::Plot { csv, quantity } => plot(csv, &quantity),
    };
    ExitCode::from(code)
}

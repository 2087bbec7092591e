//! Configuration-driven experiment runner and CSV output.

mod config;
mod runner;
mod table;

use std::fmt;
use std::path::{Path, PathBuf};

pub use config::{
    load_config, parse_config, CoefficientsConfig, ConfigError, ExperimentConfig, ExperimentKind, GridConfig,
    McConfig, ModelConfig, NoiseConfig, OutputConfig, Params,
};
pub use runner::{is_numerical, run_experiment, Setup};
pub use table::{emit_plot_data, ResultTable, Row, HEADER};

use crate::error::Error;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Model(Error),
    Io { path: PathBuf, reason: String },
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => e.fmt(f),
            RunError::Model(e) => e.fmt(f),
            RunError::Io { path, reason } => write!(f, "{}: {reason}", path.display()),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Model(e)
    }
}

impl RunError {
    /// 2 for configuration and usage errors, 3 for divergence or non-finite
    /// values.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Model(e) if is_numerical(e) => 3,
            _ => 2,
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub experiment: ExperimentKind,
    pub directory: PathBuf,
    pub csv: PathBuf,
    pub table: ResultTable,
}

impl RunSummary {
    /// 0 when every row passes, 1 when some row fails, 3 when a reported
    /// value is not finite.
    pub fn exit_code(&self) -> i32 {
        if self.table.has_non_finite() {
            3
        } else if self.table.all_pass() {
            0
        } else {
            1
        }
    }
}

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> RunError + '_ {
    move |e| RunError::Io { path: path.to_path_buf(), reason: e.to_string() }
}

/// Loads, resolves and runs a configuration, writing `config.json` and
/// `<experiment>.csv` into the output directory.
pub fn execute(config_path: &Path, overrides: &Overrides) -> Result<RunSummary, RunError> {
    let mut config = load_config(config_path)?;
    if let Some(out) = &overrides.out {
        config.output.directory = out.clone();
    }
    if let Some(seed) = overrides.seed {
        config.mc.seed = seed;
    }
    execute_config(config)
}

pub fn execute_config(config: ExperimentConfig) -> Result<RunSummary, RunError> {
    let config = config.resolve()?;
    let directory = config.output.directory.clone();
    std::fs::create_dir_all(&directory).map_err(io_error(&directory))?;
    let echo = directory.join("config.json");
    let text = serde_json::to_string_pretty(&config).expect("configuration serializes") + "\n";
    std::fs::write(&echo, text).map_err(io_error(&echo))?;
    let setup = Setup::new(&config)?;
    let table = run_experiment(config.experiment, &setup)?;
    let csv = directory.join(format!("{}.csv", config.experiment.name()));
    std::fs::write(&csv, table.to_csv()).map_err(io_error(&csv))?;
    Ok(RunSummary { experiment: config.experiment, directory, csv, table })
}

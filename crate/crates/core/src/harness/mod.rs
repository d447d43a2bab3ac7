//! Experiment runners behind the command line.
//!
//! Every runner is deterministic in `(config, seed)` and has a `_to`
//! variant that writes CSV data and a `key = value` summary into an output
//! directory.

mod config;
mod demos;
mod examples;
mod fig9;

pub use config::{
    parse_config, Example2Settings, Example3Settings, ExperimentConfig, HonestSettings, ShutdownSettings,
};
pub use demos::{
    honest_summary, random_belief, run_honest, run_honest_to, run_payoff_oracle, run_shutdown_demo,
    run_shutdown_demo_to, OracleComparison, ShutdownDemoReport,
};
pub use examples::{
    run_example2, run_example2_to, run_example3, run_example3_to, write_band_csv, Example2Report, Example3Report,
    EXAMPLE2_FIXTURE,
};
pub use fig9::{run_fig9, run_fig9_to, Fig9Report, Fig9Row, MethodSummary};

use std::path::Path;

use crate::error::{Error, Result};

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("csv: {other:?}")),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

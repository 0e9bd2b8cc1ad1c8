//! Experiment driver: synthesize scenes, run the refinement cascade, score
//! detections and draw stage overlays.
//!
//! Output layout under `out`:
//!
//! ```text
//! config.json
//! scenes/scene_{seed}.json
//! features/scene_{seed}/manifest.json, level{i}.bin
//! detections/scene_{seed}.json
//! traces/scene_{seed}.jsonl
//! losses.json
//! report.csv, summary.json
//! plots/scene_{seed}/stage_{k}.svg, plots/pr_curve.svg
//! ```

pub mod commands;
pub mod config;
pub mod svg;

pub use commands::{cmd_eval, cmd_plot, cmd_run, cmd_synth, EvalSummary, LossSummary, SweepPoint};
pub use config::{parse_seeds, RegressorSpec, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Core(textpoly_core::Error),
}

impl From<textpoly_core::Error> for CliError {
    fn from(e: textpoly_core::Error) -> Self {
        match e {
            textpoly_core::Error::Config(m) => CliError::Config(m),
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    /// 2 for configuration problems, 3 for everything about inputs or data.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Core(_) => 3,
        }
    }
}

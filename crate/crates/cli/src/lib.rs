//! Config-driven experiment runner for the `gzsl` binary.

pub mod commands;
pub mod config;

pub use commands::{
    cmd_eval, cmd_pool, cmd_report, cmd_run, cmd_split, cmd_synth, cmd_train, Aggregate,
    MetricSummary, RunSummary,
};
pub use config::{DatasetPaths, EvalConfig, ExperimentConfig, Overrides, SplitConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] gzsl_core::Error),
    #[error("{method}, seed {seed}: {source}")]
    Trial {
        method: String,
        seed: u64,
        #[source]
        source: gzsl_core::Error,
    },
}

impl CliError {
    /// 1 for invalid input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Core(e) | CliError::Trial { source: e, .. } => {
                if e.is_validation() {
                    1
                } else {
                    2
                }
            }
        }
    }
}

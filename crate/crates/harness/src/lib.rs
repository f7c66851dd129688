//! Configuration, experiment drivers, result persistence and the command
//! line for the `metroforge` binary.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod record;

use thiserror::Error;

pub use config::ExperimentConfig;
pub use experiments::{run_ablation_study, run_decomposition, run_scaling_study, run_signal_distribution_study, Ablation};
pub use record::{ResultRecord, ResultRow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl HarnessError {
    /// 2 for configuration problems, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Runtime(_) => 1,
        }
    }
}

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "METROFORGE_THREADS";

/// Shipped experiment presets, by file name.
pub const PRESETS: [(&str, &str); 7] = [
    ("full-noise.toml", include_str!("../presets/full-noise.toml")),
    ("decomposition.toml", include_str!("../presets/decomposition.toml")),
    ("ablation-remove-gate-noise.toml", include_str!("../presets/ablation-remove-gate-noise.toml")),
    ("ablation-remove-readout-noise.toml", include_str!("../presets/ablation-remove-readout-noise.toml")),
    ("ablation-suppress-t1t2-x10.toml", include_str!("../presets/ablation-suppress-t1t2-x10.toml")),
    ("signal-distribution.toml", include_str!("../presets/signal-distribution.toml")),
    ("noiseless.toml", include_str!("../presets/noiseless.toml")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name || n.trim_end_matches(".toml") == name).map(|(_, text)| *text)
}

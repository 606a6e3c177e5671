//! Experiment runner for the passive tracker: configuration, parallel Monte
//! Carlo batches and CSV outputs.

pub mod batch;
pub mod config;
pub mod error;
pub mod output;

pub use batch::{run_batch, BatchResult};
pub use config::RunConfig;
pub use error::CliError;
pub use output::{frames_csv, write_outputs};

use ptrack_core::experiment::run_rngs;
use ptrack_core::scenario::{ground_truth, synthesize_frame, MeasurementFrame};

/// Measurement frames of run `run`, exactly as the tracker sees them in a
/// batch.
pub fn synth_frames(cfg: &RunConfig, run: u64) -> Result<Vec<MeasurementFrame>, CliError> {
    cfg.scenario.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let (mut rng, _) = run_rngs(cfg.base_seed, run);
    ground_truth(&cfg.scenario)?
        .iter()
        .map(|t| synthesize_frame(t, &cfg.scenario, &mut rng).map_err(CliError::from))
        .collect()
}

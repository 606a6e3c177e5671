//! Parallel Monte Carlo batches.

use rayon::prelude::*;

use ptrack_core::experiment::{simulate, RunOutcome};
use ptrack_core::metrics::{aggregate, AggregateMetrics, OspaParams, RunMetrics};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    /// Indexed by run number.
    pub runs: Vec<RunOutcome>,
    pub aggregate: AggregateMetrics,
}

/// Runs `cfg.runs` independent simulations on the rayon pool. Results do not
/// depend on thread count or scheduling.
pub fn run_batch(cfg: &RunConfig) -> Result<BatchResult, CliError> {
    cfg.validate()?;
    let runs: Vec<RunOutcome> = (0..cfg.runs as u64)
        .into_par_iter()
        .map(|k| simulate(&cfg.scenario, &cfg.tracker, cfg.mode, cfg.base_seed, k))
        .collect::<Result<_, _>>()?;
    let metrics: Vec<RunMetrics> = runs.iter().map(|r| r.metrics.clone()).collect();
    let aggregate = aggregate(&metrics, OspaParams::default().cutoff);
    Ok(BatchResult { runs, aggregate })
}

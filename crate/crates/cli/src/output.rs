//! CSV outputs of a batch.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ptrack_core::scenario::MeasurementFrame;
use ptrack_core::tracker::TrackerMode;

use crate::batch::BatchResult;
use crate::config::RunConfig;
use crate::error::CliError;

fn series_csv(header: &str, values: &[f64]) -> String {
    let mut s = format!("{header}\n");
    for (i, v) in values.iter().enumerate() {
        writeln!(s, "{},{}", i + 1, v).expect("write to String");
    }
    s
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| CliError::io(&path, e))
}

/// Writes every output file of `batch` into `dir`, creating it if needed.
///
/// `tx-only` batches have no scatterer estimates, so only `tx_mle.csv` and
/// `summary.csv` are written for them.
pub fn write_outputs(cfg: &RunConfig, batch: &BatchResult, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let agg = &batch.aggregate;
    write(dir, "tx_mle.csv", &series_csv("step,mean_error_m", &agg.tx_error))?;

    if cfg.mode != TrackerMode::TxOnly {
        write(dir, "target_mle.csv", &series_csv("step,mean_error_m", &agg.target_error))?;
        write(dir, "mospa.csv", &series_csv("step,mean_ospa_m", &agg.ospa))?;
        for (k, run) in batch.runs.iter().enumerate() {
            let mut s = String::from("step,track_id,x,y,existence_prob\n");
            for row in &run.tracks {
                writeln!(s, "{},{},{},{},{}", row.step, row.track_id, row.position.x, row.position.y, row.existence)
                    .expect("write to String");
            }
            write(dir, &format!("tracks_run{k}.csv"), &s)?;
        }
    }

    let transition = agg.stage_transition_mean.map(|t| t.to_string()).unwrap_or_default();
    let summary =
        format!("mode,runs,seed,stage_transition_mean\n{},{},{},{}\n", cfg.mode, cfg.runs, cfg.base_seed, transition);
    write(dir, "summary.csv", &summary)
}

/// Measurement frames as CSV: one row per measurement, the direct path with
/// an empty relative distance.
pub fn frames_csv(frames: &[MeasurementFrame]) -> String {
    let mut s = String::from("step,kind,rel_distance_m,aoa_rad\n");
    for f in frames {
        if let Some(d) = f.direct {
            writeln!(s, "{},direct,,{}", f.step, d.aoa).expect("write to String");
        }
        for z in &f.scatter {
            writeln!(s, "{},scatter,{},{}", f.step, z.rel_distance, z.aoa).expect("write to String");
        }
    }
    s
}

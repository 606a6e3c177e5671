//! One seeded simulation run: synthesize measurements, track, score.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::geometry::Position;
use crate::metrics::{identify_target, ospa, OspaParams, RunMetrics};
use crate::scenario::{ground_truth, synthesize_frame, ScenarioConfig};
use crate::tracker::{Tracker, TrackerConfig, TrackerMode, TrackerState};

/// Independent generators for measurement synthesis and for the tracker of
/// run `run`: streams `2 run` and `2 run + 1` of the ChaCha8 generator
/// seeded with `base_seed`.
///
/// Keeping measurements on their own stream means every tracker mode sees
/// the same frames for a given `(base_seed, run)`.
pub fn run_rngs(base_seed: u64, run: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let stream = |s: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
        rng.set_stream(s);
        rng
    };
    (stream(2 * run), stream(2 * run + 1))
}

/// A confirmed PS enters the target-identification history only once its
/// particle spread is below this, so the migration of an estimate from the
/// centroid of an ambiguous two-sided cloud to its true side does not count
/// as movement.
pub const LOCALIZED_SPREAD_M: f64 = 2.0;

/// One confirmed PS estimate at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRow {
    pub step: usize,
    pub track_id: u64,
    pub position: Position,
    pub existence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub metrics: RunMetrics,
    pub tracks: Vec<TrackRow>,
    /// Track selected as the moving target at the final step.
    pub target_track: Option<u64>,
}

/// Called after every step with the step index and the tracker state.
pub trait StepObserver {
    fn observe(&mut self, step: usize, state: &TrackerState);
}

impl<F: FnMut(usize, &TrackerState)> StepObserver for F {
    fn observe(&mut self, step: usize, state: &TrackerState) {
        self(step, state)
    }
}

/// Runs one simulation and scores it against the ground truth.
pub fn simulate(
    scenario: &ScenarioConfig,
    tracker_cfg: &TrackerConfig,
    mode: TrackerMode,
    base_seed: u64,
    run: u64,
) -> Result<RunOutcome> {
    simulate_observed(scenario, tracker_cfg, mode, base_seed, run, &mut |_: usize, _: &TrackerState| {})
}

/// [`simulate`] with a per-step observer.
pub fn simulate_observed(
    scenario: &ScenarioConfig,
    tracker_cfg: &TrackerConfig,
    mode: TrackerMode,
    base_seed: u64,
    run: u64,
    observer: &mut dyn StepObserver,
) -> Result<RunOutcome> {
    scenario.validate()?;
    let truth = ground_truth(scenario)?;
    let (mut meas_rng, mut track_rng) = run_rngs(base_seed, run);
    let mut tracker = Tracker::new(tracker_cfg.clone(), mode)?;
    let ospa_params = OspaParams::default();

    let n = truth.len();
    let mut metrics = RunMetrics {
        tx_error: Vec::with_capacity(n),
        target_error: Vec::with_capacity(n),
        ospa: Vec::with_capacity(n),
        stage_transition: None,
    };
    let mut tracks = Vec::new();
    let mut histories: BTreeMap<u64, Vec<Position>> = BTreeMap::new();
    let mut target_track = None;

    for frame_truth in &truth {
        let frame = synthesize_frame(frame_truth, scenario, &mut meas_rng)?;
        tracker.step(&frame, &frame_truth.rx_pose, &mut track_rng)?;
        observer.observe(frame_truth.step, tracker.state());
        let est = tracker.estimate();

        let tx_err = est.tx.map_or(ospa_params.cutoff, |tx| tx.distance(frame_truth.tx));
        metrics.tx_error.push(tx_err);

        let confirmed: Vec<Position> = est.scatterers.iter().map(|s| s.position).collect();
        metrics.ospa.push(ospa(&confirmed, &frame_truth.scatterers, ospa_params));

        for s in &est.scatterers {
            if s.spread < LOCALIZED_SPREAD_M {
                histories.entry(s.id).or_default().push(s.position);
            }
            tracks.push(TrackRow {
                step: frame_truth.step,
                track_id: s.id,
                position: s.position,
                existence: s.existence,
            });
        }
        let current = est.scatterers.iter().filter_map(|s| histories.get_key_value(&s.id));
        target_track = identify_target(current);
        let target = frame_truth.scatterers[0];
        metrics.target_error.push(target_track.map(|id| {
            let s = est.scatterers.iter().find(|s| s.id == id).expect("identified track is confirmed");
            s.position.distance(target)
        }));
    }
    metrics.stage_transition = tracker.state().stage_transition;
    Ok(RunOutcome { metrics, tracks, target_track })
}

//! Ground truth and measurement synthesis.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{aoa, relative_distance, Pose, Position};

/// Everything needed to simulate a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub tx_position: Position,
    pub static_scatterers: Vec<Position>,
    pub target_waypoints: Vec<Position>,
    /// Meters per step.
    pub target_speed: f64,
    pub rx_waypoints: Vec<Position>,
    /// Meters per step.
    pub rx_speed: f64,
    pub n_steps: usize,
    pub sigma_d_gen: f64,
    pub sigma_theta_gen: f64,
    pub p_detect: f64,
    pub mu_fa: f64,
    pub fa_d_range: [f64; 2],
    pub fa_theta_range: [f64; 2],
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(msg.to_string()));
        if !(self.target_speed > 0.0 && self.rx_speed > 0.0) {
            return bad("speeds must be > 0");
        }
        if !(0.0..=1.0).contains(&self.p_detect) {
            return bad("p_detect must lie in [0, 1]");
        }
        if !(self.mu_fa >= 0.0 && self.mu_fa.is_finite()) {
            return bad("mu_fa must be finite and >= 0");
        }
        if !(self.sigma_d_gen >= 0.0 && self.sigma_theta_gen >= 0.0) {
            return bad("generation noise must be >= 0");
        }
        if !(self.fa_d_range[0] < self.fa_d_range[1] && self.fa_theta_range[0] < self.fa_theta_range[1]) {
            return bad("clutter ranges must be ordered lo < hi");
        }
        if self.target_waypoints.is_empty() || self.rx_waypoints.is_empty() {
            return Err(Error::EmptyWaypoints);
        }
        Ok(())
    }
}

/// The scene used throughout the experiments: a transmitter north of a
/// rectangular receiver loop, four static reflectors and one target walking an
/// S-shaped path.
pub fn paper_scenario() -> ScenarioConfig {
    let p = |x, y| Position::new(x, y);
    ScenarioConfig {
        tx_position: p(0.0, 30.0),
        static_scatterers: vec![p(40.0, 10.0), p(40.0, -10.0), p(-40.0, -10.0), p(-40.0, 10.0)],
        target_waypoints: vec![
            p(-10.0, -10.0),
            p(10.0, -10.0),
            p(10.0, 0.0),
            p(-10.0, 0.0),
            p(-10.0, 10.0),
            p(10.0, 10.0),
        ],
        target_speed: 0.4,
        rx_waypoints: vec![
            p(0.0, -20.0),
            p(30.0, -20.0),
            p(30.0, 20.0),
            p(-30.0, 20.0),
            p(-30.0, -20.0),
            p(0.0, -20.0),
        ],
        rx_speed: 1.0,
        n_steps: 200,
        sigma_d_gen: 0.1,
        sigma_theta_gen: PI / 180.0,
        p_detect: 0.95,
        mu_fa: 1.0,
        fa_d_range: [0.0, 50.0],
        fa_theta_range: [0.0, PI],
    }
}

/// Constant-speed traversal of a polyline. Element `i` is the pose at step
/// `i + 1`, i.e. after `(i + 1) * speed` meters.
///
/// The orientation is the direction of the segment being traversed; a pose
/// exactly on a corner already faces the next segment, and poses past the end
/// hold the last position and direction.
pub fn waypoint_path(waypoints: &[Position], speed: f64, n_steps: usize) -> Result<Vec<Pose>> {
    let first = *waypoints.first().ok_or(Error::EmptyWaypoints)?;
    if !(speed >= 0.0 && speed.is_finite()) {
        return Err(Error::InvalidInput(format!("speed must be finite and >= 0, got {speed}")));
    }
    if waypoints.len() == 1 {
        let pose = Pose::new(first, Position::new(1.0, 0.0))?;
        return Ok(vec![pose; n_steps]);
    }

    let mut segments = Vec::with_capacity(waypoints.len() - 1);
    for pair in waypoints.windows(2) {
        let delta = pair[1] - pair[0];
        let len = delta.norm();
        if len == 0.0 {
            return Err(Error::InvalidInput(format!("consecutive waypoints coincide at {:?}", pair[0])));
        }
        segments.push((pair[0], delta * (1.0 / len), len));
    }

    let mut poses = Vec::with_capacity(n_steps);
    for step in 1..=n_steps {
        let mut remaining = speed * step as f64;
        let mut pose = None;
        for &(start, dir, len) in &segments {
            if remaining < len {
                pose = Some(Pose::new(start + dir * remaining, dir)?);
                break;
            }
            remaining -= len;
        }
        let pose = match pose {
            Some(p) => p,
            None => {
                let &(_, dir, _) = segments.last().expect("at least one segment");
                Pose::new(*waypoints.last().expect("non-empty"), dir)?
            }
        };
        poses.push(pose);
    }
    Ok(poses)
}

/// The true state of the world at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthFrame {
    pub step: usize,
    pub rx_pose: Pose,
    pub tx: Position,
    /// Moving target first, then the static scatterers.
    pub scatterers: Vec<Position>,
}

/// Ground truth for steps `1..=n_steps`.
pub fn ground_truth(cfg: &ScenarioConfig) -> Result<Vec<GroundTruthFrame>> {
    cfg.validate()?;
    let rx = waypoint_path(&cfg.rx_waypoints, cfg.rx_speed, cfg.n_steps)?;
    let target = waypoint_path(&cfg.target_waypoints, cfg.target_speed, cfg.n_steps)?;
    Ok(rx
        .into_iter()
        .zip(target)
        .enumerate()
        .map(|(i, (rx_pose, target))| {
            let mut scatterers = Vec::with_capacity(1 + cfg.static_scatterers.len());
            scatterers.push(target.position);
            scatterers.extend_from_slice(&cfg.static_scatterers);
            GroundTruthFrame { step: i + 1, rx_pose, tx: cfg.tx_position, scatterers }
        })
        .collect())
}

/// AOA of the direct path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectMeasurement {
    pub aoa: f64,
}

/// Relative distance and AOA of a scattered path (or a false alarm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterMeasurement {
    pub rel_distance: f64,
    pub aoa: f64,
}

/// All measurements of one step. The order of `scatter` carries no
/// information.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementFrame {
    pub step: usize,
    pub direct: Option<DirectMeasurement>,
    pub scatter: Vec<ScatterMeasurement>,
}

impl MeasurementFrame {
    pub fn num_scatter(&self) -> usize {
        self.scatter.len()
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, mean: f64, sigma: f64) -> f64 {
    let n: f64 = StandardNormal.sample(rng);
    mean + sigma * n
}

/// Draws one noisy frame from the ground truth.
///
/// Draw order is fixed (direct noise, then per scatterer detection and noise,
/// then clutter, then the shuffle) so a seeded RNG reproduces frames exactly.
pub fn synthesize_frame<R: Rng + ?Sized>(
    truth: &GroundTruthFrame,
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<MeasurementFrame> {
    let rx = &truth.rx_pose;
    let theta0 = aoa(truth.tx, rx)?;
    let direct = DirectMeasurement { aoa: gaussian(rng, theta0, cfg.sigma_theta_gen) };

    let mut scatter = Vec::new();
    for &scat in &truth.scatterers {
        if !rng.random_bool(cfg.p_detect) {
            continue;
        }
        let d = relative_distance(truth.tx, scat, rx.position);
        let theta = aoa(scat, rx)?;
        scatter.push(ScatterMeasurement {
            rel_distance: gaussian(rng, d, cfg.sigma_d_gen),
            aoa: gaussian(rng, theta, cfg.sigma_theta_gen),
        });
    }

    let n_clutter = if cfg.mu_fa > 0.0 {
        let poisson = Poisson::new(cfg.mu_fa).map_err(|e| Error::InvalidInput(format!("clutter rate: {e}")))?;
        poisson.sample(rng) as usize
    } else {
        0
    };
    for _ in 0..n_clutter {
        let d = rng.random_range(cfg.fa_d_range[0]..cfg.fa_d_range[1]);
        let theta = rng.random_range(cfg.fa_theta_range[0]..cfg.fa_theta_range[1]);
        scatter.push(ScatterMeasurement { rel_distance: d, aoa: theta });
    }
    scatter.shuffle(rng);

    Ok(MeasurementFrame { step: truth.step, direct: Some(direct), scatter })
}

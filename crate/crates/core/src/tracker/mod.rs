//! Particle-based belief-propagation tracker: transmitter bootstrap, then
//! joint transmitter/scatterer tracking with probabilistic data association.

mod messages;
mod particles;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

pub use messages::{
    birth_and_xi, compute_beta, evaluate_direct, predict_legacy, predict_tx, update_legacy_belief, update_new_belief,
    update_tx_belief, FactorTable, NewScatterer, PredictedScatterer, BIRTH_RETRIES,
};
pub use particles::{resample, ParticleSet};

use crate::association::{run_association, AssocInput, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::factors::ModelParams;
use crate::geometry::{position_from_direct, Pose, Position, Side};
use crate::scenario::MeasurementFrame;

/// A potential scatterer: position particles plus nonexistence probability.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialScatterer {
    /// Weights sum to `1 - nonexist_prob`.
    pub particles: ParticleSet,
    pub nonexist_prob: f64,
    pub id: u64,
    pub birth_step: usize,
}

impl PotentialScatterer {
    pub fn existence(&self) -> f64 {
        1.0 - self.nonexist_prob
    }

    /// `|sum of weights + q - 1|`.
    pub fn mass_error(&self) -> f64 {
        (self.particles.total_weight() + self.nonexist_prob - 1.0).abs()
    }
}

/// Which variables the tracker estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrackerMode {
    /// Joint transmitter and scatterer tracking.
    Full,
    /// Transmitter frozen at its estimate when tracking starts.
    Simplified1,
    /// Transmitter estimated from the direct path only.
    Simplified2,
    /// Transmitter bootstrap only; no scatterers.
    TxOnly,
}

impl TrackerMode {
    pub const ALL: [TrackerMode; 4] = [Self::Full, Self::Simplified1, Self::Simplified2, Self::TxOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Simplified1 => "simplified1",
            Self::Simplified2 => "simplified2",
            Self::TxOnly => "tx-only",
        }
    }
}

impl fmt::Display for TrackerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrackerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown tracker mode '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Bootstrap,
    Tracking,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub num_particles: usize,
    pub p_exist_threshold: f64,
    pub p_prune_threshold: f64,
    pub assoc_tol: f64,
    pub assoc_max_iter: usize,
    pub lambda_undetected_init: f64,
    pub lambda_birth: f64,
    pub tx_range_max: f64,
    pub bootstrap_std_threshold: f64,
    pub model: ModelParams,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            num_particles: 1000,
            p_exist_threshold: 0.5,
            p_prune_threshold: 1e-3,
            assoc_tol: DEFAULT_TOL,
            assoc_max_iter: DEFAULT_MAX_ITER,
            lambda_undetected_init: 5.0,
            lambda_birth: 1e-4,
            tx_range_max: 150.0,
            bootstrap_std_threshold: 5.0,
            model: ModelParams::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(msg.to_string()));
        if self.num_particles < 2 || !self.num_particles.is_multiple_of(2) {
            return bad("num_particles must be even and >= 2");
        }
        let unit = 0.0..=1.0;
        if !unit.contains(&self.p_exist_threshold) || !unit.contains(&self.p_prune_threshold) {
            return bad("thresholds must lie in [0, 1]");
        }
        if !(self.assoc_tol > 0.0) || self.assoc_max_iter == 0 {
            return bad("association tolerance and iteration cap must be positive");
        }
        if !(self.lambda_undetected_init >= 0.0 && self.lambda_birth >= 0.0) {
            return bad("PHD means must be >= 0");
        }
        if !(self.lambda_undetected_init.is_finite() && self.lambda_birth.is_finite()) {
            return bad("PHD means must be finite");
        }
        if !(self.tx_range_max > 0.0 && self.tx_range_max.is_finite()) {
            return bad("tx_range_max must be positive and finite");
        }
        if self.bootstrap_std_threshold.is_nan() || self.bootstrap_std_threshold < 0.0 {
            return bad("bootstrap_std_threshold must be >= 0");
        }
        self.model.validate()
    }
}

/// Draws the initial transmitter cloud along the two rays compatible with
/// the direct-path AOA, alternating sides.
pub fn init_tx_particles<R: Rng + ?Sized>(
    frame: &MeasurementFrame,
    rx: &Pose,
    cfg: &TrackerConfig,
    rng: &mut R,
) -> Result<ParticleSet> {
    let z0 = frame.direct.ok_or(Error::MissingDirect { step: frame.step })?.aoa;
    let noise =
        rand_distr::Normal::new(0.0, cfg.model.sigma_theta_lik).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let positions = (0..cfg.num_particles)
        .map(|s| {
            let theta = z0 + rng.sample(noise);
            let range = rng.random_range(0.0..cfg.tx_range_max);
            position_from_direct(rx, theta, range, Side::alternating(s))
        })
        .collect();
    Ok(ParticleSet::uniform(positions, 1.0))
}

/// Scalar PHD recursion for undetected scatterers: returns the mean number
/// of newly detected scatterers and the next undetected mean.
pub fn phd_update(lambda_undetected: f64, cfg: &TrackerConfig) -> (f64, f64) {
    let predicted = lambda_undetected + cfg.lambda_birth;
    let p_d = cfg.model.p_detect;
    (p_d * predicted, (1.0 - p_d) * predicted)
}

/// Appends the new PSs and drops every PS with existence below `threshold`.
pub fn prune_and_promote(
    legacy: Vec<PotentialScatterer>,
    new: Vec<PotentialScatterer>,
    threshold: f64,
) -> Vec<PotentialScatterer> {
    legacy.into_iter().chain(new).filter(|ps| !(ps.existence() < threshold)).collect()
}

/// Point estimate of a confirmed PS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScattererEstimate {
    pub id: u64,
    pub position: Position,
    pub existence: f64,
    /// `sqrt(trace(covariance))` of the particle cloud.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    /// `None` before the first direct-path measurement.
    pub tx: Option<Position>,
    /// Confirmed PSs only.
    pub scatterers: Vec<ScattererEstimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerState {
    /// Empty until the first direct-path measurement.
    pub tx_particles: ParticleSet,
    pub scatterers: Vec<PotentialScatterer>,
    pub lambda_undetected: f64,
    /// Index of the last processed frame.
    pub step: usize,
    pub stage: Stage,
    pub mode: TrackerMode,
    /// Step whose frame ended the bootstrap stage.
    pub stage_transition: Option<usize>,
    next_id: u64,
}

/// Per-step bookkeeping exposed for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    pub mu_new: f64,
    pub born: usize,
    pub pruned: usize,
    pub assoc_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    state: TrackerState,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig, mode: TrackerMode) -> Result<Self> {
        cfg.validate()?;
        let state = TrackerState {
            tx_particles: ParticleSet::default(),
            scatterers: Vec::new(),
            lambda_undetected: cfg.lambda_undetected_init,
            step: 0,
            stage: Stage::Bootstrap,
            mode,
            stage_transition: None,
            next_id: 0,
        };
        Ok(Self { cfg, state })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn state(&self) -> &TrackerState {
        &self.state
    }

    /// Replaces the state, e.g. to restart from a checkpoint.
    pub fn set_state(&mut self, state: TrackerState) {
        self.state = state;
    }

    /// Processes one frame taken at receiver pose `rx`.
    pub fn step<R: Rng + ?Sized>(&mut self, frame: &MeasurementFrame, rx: &Pose, rng: &mut R) -> Result<StepReport> {
        self.state.step = frame.step;
        let Some(direct) = frame.direct else {
            return Ok(StepReport::default());
        };
        match self.state.stage {
            Stage::Bootstrap => {
                self.bootstrap_step(frame, direct.aoa, rx, rng)?;
                Ok(StepReport::default())
            }
            Stage::Tracking => self.tracking_step(frame, direct.aoa, rx, rng),
        }
    }

    fn bootstrap_step<R: Rng + ?Sized>(
        &mut self,
        frame: &MeasurementFrame,
        z0: f64,
        rx: &Pose,
        rng: &mut R,
    ) -> Result<()> {
        let model = &self.cfg.model;
        let tx = &self.state.tx_particles;
        self.state.tx_particles = if tx.is_empty() {
            init_tx_particles(frame, rx, &self.cfg, rng)?
        } else {
            let pred = predict_tx(tx, model, rng);
            match evaluate_direct(&pred, z0, rx, model, rng) {
                Ok(set) => set,
                Err(_) => init_tx_particles(frame, rx, &self.cfg, rng)?,
            }
        };

        let spread = self.state.tx_particles.spread().unwrap_or(f64::INFINITY);
        if self.state.mode != TrackerMode::TxOnly && spread < self.cfg.bootstrap_std_threshold {
            self.state.stage = Stage::Tracking;
            self.state.stage_transition = Some(frame.step);
            if self.state.mode == TrackerMode::Simplified1 {
                let mean = self.state.tx_particles.arithmetic_mean().expect("nonempty tx particles");
                let n = self.state.tx_particles.len();
                self.state.tx_particles = ParticleSet::uniform(vec![mean; n], 1.0);
            }
        }
        Ok(())
    }

    fn tracking_step<R: Rng + ?Sized>(
        &mut self,
        frame: &MeasurementFrame,
        z0: f64,
        rx: &Pose,
        rng: &mut R,
    ) -> Result<StepReport> {
        let cfg = &self.cfg;
        let model = &cfg.model;
        let (mu_new, lambda_next) = phd_update(self.state.lambda_undetected, cfg);

        let tx_eval = match self.state.mode {
            TrackerMode::Simplified1 => self.state.tx_particles.clone(),
            _ => {
                let pred = predict_tx(&self.state.tx_particles, model, rng);
                evaluate_direct(&pred, z0, rx, model, rng)?
            }
        };

        let preds: Vec<PredictedScatterer> =
            self.state.scatterers.iter().map(|ps| predict_legacy(ps, model, rng)).collect();
        let tables: Vec<FactorTable> = preds
            .iter()
            .map(|p| FactorTable::build(&tx_eval.positions, &p.particles.positions, frame, rx, model))
            .collect();
        let beta: Vec<Vec<f64>> = preds.iter().zip(&tables).map(|(p, t)| compute_beta(p, t)).collect();
        let births: Vec<NewScatterer> =
            frame.scatter.iter().map(|z| birth_and_xi(&tx_eval, z, rx, mu_new, model, rng)).collect::<Result<_>>()?;

        let input = AssocInput { beta, xi0: births.iter().map(|b| b.xi0).collect() };
        let assoc = run_association(&input, cfg.assoc_max_iter, cfg.assoc_tol)?;

        let tx_next = match self.state.mode {
            TrackerMode::Full => update_tx_belief(&tx_eval, &preds, &tables, &assoc.eta, rng)?,
            _ => tx_eval,
        };

        let mut legacy = Vec::with_capacity(preds.len());
        for ((pred, table), eta) in preds.iter().zip(&tables).zip(&assoc.eta) {
            legacy.push(update_legacy_belief(pred, table, eta, rng)?);
        }
        let mut born = Vec::with_capacity(births.len());
        for (birth, varsigma) in births.iter().zip(&assoc.varsigma) {
            let id = self.state.next_id;
            self.state.next_id += 1;
            born.push(update_new_belief(birth, varsigma, mu_new, model, id, frame.step, rng)?);
        }

        let before = legacy.len() + born.len();
        let num_born = born.len();
        self.state.scatterers = prune_and_promote(legacy, born, cfg.p_prune_threshold);
        self.state.tx_particles = tx_next;
        self.state.lambda_undetected = lambda_next;

        Ok(StepReport {
            mu_new,
            born: num_born,
            pruned: before - self.state.scatterers.len(),
            assoc_iterations: assoc.iterations_used,
        })
    }

    /// Transmitter estimate and confirmed PSs.
    pub fn estimate(&self) -> Estimate {
        let scatterers = self
            .state
            .scatterers
            .iter()
            .filter(|ps| ps.existence() > self.cfg.p_exist_threshold)
            .filter_map(|ps| {
                Some(ScattererEstimate {
                    id: ps.id,
                    position: ps.particles.arithmetic_mean()?,
                    existence: ps.existence(),
                    spread: ps.particles.spread()?,
                })
            })
            .collect();
        Estimate { tx: self.state.tx_particles.arithmetic_mean(), scatterers }
    }
}

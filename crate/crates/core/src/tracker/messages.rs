//! Particle implementations of the individual messages and beliefs of one
//! tracking step.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::particles::{resample, ParticleSet};
use super::PotentialScatterer;
use crate::error::{Error, Result};
use crate::factors::{
    likelihood_scatter, log_likelihood_direct, transition_sample_ps, transition_sample_tx, ModelParams,
};
use crate::geometry::{aoa, ray_ellipse_range, relative_distance, Pose, Position, Side};
use crate::scenario::{MeasurementFrame, ScatterMeasurement};

/// Maximum number of redraws of a birth perturbation that lands on a
/// degenerate inversion.
pub const BIRTH_RETRIES: usize = 16;

/// A legacy PS after the prediction step.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedScatterer {
    pub id: u64,
    pub birth_step: usize,
    /// Weights sum to `1 - alpha_tilde`.
    pub particles: ParticleSet,
    /// Predicted nonexistence probability.
    pub alpha_tilde: f64,
}

/// Propagates every transmitter particle through the transition model.
pub fn predict_tx<R: Rng + ?Sized>(tx: &ParticleSet, model: &ModelParams, rng: &mut R) -> ParticleSet {
    let positions = tx.positions.iter().map(|p| transition_sample_tx(*p, model, rng)).collect();
    ParticleSet::uniform(positions, 1.0)
}

/// Propagates a legacy PS and accounts for survival.
pub fn predict_legacy<R: Rng + ?Sized>(
    ps: &PotentialScatterer,
    model: &ModelParams,
    rng: &mut R,
) -> PredictedScatterer {
    let positions = ps.particles.positions.iter().map(|p| transition_sample_ps(*p, model, rng)).collect();
    let mass = model.p_survival * (1.0 - ps.nonexist_prob);
    PredictedScatterer {
        id: ps.id,
        birth_step: ps.birth_step,
        particles: ParticleSet::uniform(positions, mass),
        alpha_tilde: 1.0 - mass,
    }
}

/// Weights predicted transmitter particles by the direct-path likelihood,
/// normalizes and resamples.
///
/// Weights are formed in the log domain so that a sharp likelihood cannot
/// underflow every particle at once.
pub fn evaluate_direct<R: Rng + ?Sized>(
    tx_pred: &ParticleSet,
    z0: f64,
    rx: &Pose,
    model: &ModelParams,
    rng: &mut R,
) -> Result<ParticleSet> {
    let log_w: Vec<f64> = tx_pred
        .positions
        .iter()
        .zip(&tx_pred.weights)
        .map(|(p, w)| w.ln() + log_likelihood_direct(z0, *p, rx, model))
        .collect();
    let weights = normalize_log_weights(&log_w)
        .ok_or_else(|| Error::InvalidInput("direct-path likelihood is zero for every particle".into()))?;
    resample(&ParticleSet { positions: tx_pred.positions.clone(), weights }, 1.0, rng)
}

/// `exp(l - max l)` normalized to sum one; `None` if every entry is `-inf`
/// or any is NaN.
pub(crate) fn normalize_log_weights(log_w: &[f64]) -> Option<Vec<f64>> {
    if log_w.iter().any(|l| l.is_nan()) {
        return None;
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let mut w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    Some(w)
}

/// Legacy factor `g` evaluated for every stacked particle pair of one PS and
/// every measurement, with the existence flag set.
///
/// Built once per PS and step, then shared by the association input, the
/// transmitter update and the PS belief update.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorTable {
    num_measurements: usize,
    /// `g(a = 0) = 1 - p_d`.
    miss: f64,
    /// `g(a = m)` at `[s * M + m - 1]`.
    ratio: Vec<f64>,
}

impl FactorTable {
    pub fn build(
        tx: &[Position],
        scatterers: &[Position],
        frame: &MeasurementFrame,
        rx: &Pose,
        model: &ModelParams,
    ) -> Self {
        assert_eq!(tx.len(), scatterers.len(), "stacked particle sets must have equal size");
        let m = frame.num_scatter();
        let scale = model.p_detect / model.clutter_intensity();
        let norm = 1.0 / (2.0 * std::f64::consts::PI * model.sigma_d_lik * model.sigma_theta_lik);
        let mut ratio = Vec::with_capacity(tx.len() * m);
        for (t, x) in tx.iter().zip(scatterers) {
            match aoa(*x, rx) {
                Ok(theta) => {
                    let d = relative_distance(*t, *x, rx.position);
                    for z in &frame.scatter {
                        let ud = (z.rel_distance - d) / model.sigma_d_lik;
                        let ut = (z.aoa - theta) / model.sigma_theta_lik;
                        ratio.push(scale * norm * (-0.5 * (ud * ud + ut * ut)).exp());
                    }
                }
                Err(_) => ratio.extend(std::iter::repeat_n(0.0, m)),
            }
        }
        Self { num_measurements: m, miss: 1.0 - model.p_detect, ratio }
    }

    pub fn num_measurements(&self) -> usize {
        self.num_measurements
    }

    /// `g` for particle `s` and association `a`.
    pub fn g(&self, s: usize, a: usize) -> f64 {
        if a == 0 {
            self.miss
        } else {
            self.ratio[s * self.num_measurements + a - 1]
        }
    }

    /// `sum_a eta(a) g(s, a)` for an `M + 1` row `eta`.
    pub fn weighted_sum(&self, s: usize, eta: &[f64]) -> f64 {
        let m = self.num_measurements;
        let row = &self.ratio[s * m..(s + 1) * m];
        eta[0] * self.miss + row.iter().zip(&eta[1..]).map(|(g, e)| g * e).sum::<f64>()
    }
}

/// Association input row `beta(a)`, `a = 0..=M`, of one legacy PS.
pub fn compute_beta(pred: &PredictedScatterer, table: &FactorTable) -> Vec<f64> {
    let m = table.num_measurements();
    let mut beta = vec![0.0; m + 1];
    beta[0] = pred.alpha_tilde;
    for (s, w) in pred.particles.weights.iter().enumerate() {
        beta[0] += w * table.miss;
        for (a, b) in beta.iter_mut().enumerate().skip(1) {
            *b += w * table.g(s, a);
        }
    }
    beta
}

/// Particles of a new PS born from one measurement, stacked with the
/// transmitter particles they were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct NewScatterer {
    pub positions: Vec<Position>,
    /// `f(z_m | tx_s, x_s)` per particle.
    pub likelihood: Vec<f64>,
    /// Association input `xi(b = 0)`.
    pub xi0: f64,
}

/// Samples one birth particle by inverting a perturbed copy of `z`.
fn birth_particle<R: Rng + ?Sized>(
    tx: Position,
    z: &ScatterMeasurement,
    rx: &Pose,
    side: Side,
    noise_d: &Normal<f64>,
    noise_theta: &Normal<f64>,
    rng: &mut R,
) -> Option<Position> {
    for _ in 0..BIRTH_RETRIES {
        let d = z.rel_distance + noise_d.sample(rng);
        let theta = z.aoa + noise_theta.sample(rng);
        if d < 0.0 {
            continue;
        }
        let u = side.direction(rx, theta);
        match ray_ellipse_range(tx, rx, d, u) {
            Ok(r) if r > 0.0 => return Some(rx.position + u * r),
            _ => continue,
        }
    }
    None
}

/// Draws birth particles for measurement `z` and computes `xi(b = 0)`.
///
/// Particles alternate between the two ambiguous sides. A particle whose
/// perturbations keep failing copies the nearest valid sibling; if none is
/// valid the new PS gets zero likelihood everywhere.
pub fn birth_and_xi<R: Rng + ?Sized>(
    tx: &ParticleSet,
    z: &ScatterMeasurement,
    rx: &Pose,
    mu_new: f64,
    model: &ModelParams,
    rng: &mut R,
) -> Result<NewScatterer> {
    let noise_d = Normal::new(0.0, model.sigma_d_lik).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let noise_theta = Normal::new(0.0, model.sigma_theta_lik).map_err(|e| Error::InvalidInput(e.to_string()))?;

    let drawn: Vec<Option<Position>> = tx
        .positions
        .iter()
        .enumerate()
        .map(|(s, t)| birth_particle(*t, z, rx, Side::alternating(s), &noise_d, &noise_theta, rng))
        .collect();

    let Some(fallback) = drawn.iter().flatten().next().copied() else {
        let n = tx.len();
        return Ok(NewScatterer { positions: vec![rx.position; n], likelihood: vec![0.0; n], xi0: 1.0 });
    };
    let mut last_valid = fallback;
    let positions: Vec<Position> = drawn
        .into_iter()
        .map(|p| {
            if let Some(p) = p {
                last_valid = p;
            }
            p.unwrap_or(last_valid)
        })
        .collect();

    let likelihood: Vec<f64> =
        tx.positions.iter().zip(&positions).map(|(t, x)| likelihood_scatter(z, *t, *x, rx, model)).collect();
    let mean_lik = likelihood.iter().sum::<f64>() / likelihood.len().max(1) as f64;
    let xi0 = 1.0 + mu_new / model.clutter_intensity() * mean_lik;
    Ok(NewScatterer { positions, likelihood, xi0 })
}

/// Transmitter belief from the stacked product over all legacy PSs,
/// normalized and resampled.
pub fn update_tx_belief<R: Rng + ?Sized>(
    tx_eval: &ParticleSet,
    preds: &[PredictedScatterer],
    tables: &[FactorTable],
    eta: &[Vec<f64>],
    rng: &mut R,
) -> Result<ParticleSet> {
    let n = tx_eval.len();
    let mut log_w: Vec<f64> = tx_eval.weights.iter().map(|w| w.ln()).collect();
    for ((pred, table), row) in preds.iter().zip(tables).zip(eta) {
        for (s, lw) in log_w.iter_mut().enumerate() {
            let stacked = n as f64 * pred.particles.weights[s];
            *lw += (stacked * table.weighted_sum(s, row) + row[0] * pred.alpha_tilde).ln();
        }
    }
    let weights =
        normalize_log_weights(&log_w).ok_or_else(|| Error::InvalidInput("transmitter belief has zero mass".into()))?;
    resample(&ParticleSet { positions: tx_eval.positions.clone(), weights }, 1.0, rng)
}

/// Belief of a legacy PS after association.
pub fn update_legacy_belief<R: Rng + ?Sized>(
    pred: &PredictedScatterer,
    table: &FactorTable,
    eta: &[f64],
    rng: &mut R,
) -> Result<PotentialScatterer> {
    let weights: Vec<f64> =
        pred.particles.weights.iter().enumerate().map(|(s, w)| w * table.weighted_sum(s, eta)).collect();
    let absent = eta[0] * pred.alpha_tilde;
    let total = weights.iter().sum::<f64>() + absent;
    let q = if total > 0.0 && total.is_finite() { absent / total } else { 1.0 };
    let set = ParticleSet { positions: pred.particles.positions.clone(), weights };
    Ok(PotentialScatterer {
        particles: resample(&set, 1.0 - q, rng)?,
        nonexist_prob: q,
        id: pred.id,
        birth_step: pred.birth_step,
    })
}

/// Belief of the new PS born from one measurement, given its `K + 1` row of
/// association messages.
pub fn update_new_belief<R: Rng + ?Sized>(
    birth: &NewScatterer,
    varsigma: &[f64],
    mu_new: f64,
    model: &ModelParams,
    id: u64,
    step: usize,
    rng: &mut R,
) -> Result<PotentialScatterer> {
    let n = birth.positions.len().max(1) as f64;
    let rate = varsigma[0] * mu_new / model.clutter_intensity() / n;
    let weights: Vec<f64> = birth.likelihood.iter().map(|l| rate * l).collect();
    let absent: f64 = varsigma.iter().sum();
    let total = weights.iter().sum::<f64>() + absent;
    let q = if total > 0.0 && total.is_finite() { absent / total } else { 1.0 };
    let set = ParticleSet { positions: birth.positions.clone(), weights };
    Ok(PotentialScatterer { particles: resample(&set, 1.0 - q, rng)?, nonexist_prob: q, id, birth_step: step })
}

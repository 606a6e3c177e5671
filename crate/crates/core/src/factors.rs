//! Pointwise factors of the joint posterior: measurement likelihoods, the
//! legacy-PS factor `g`, the new-PS factor `h`, and the association
//! consistency indicator `psi`.
//!
//! The new-PS position prior is never evaluated: it is realized as the birth
//! proposal in the tracker, where it cancels. Non-existence mass is carried as
//! scalar probabilities, so the dummy pdf never appears either.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{aoa, relative_distance, Pose, Position};
use crate::scenario::{MeasurementFrame, ScatterMeasurement};

/// Parameters of the statistical model used by the tracker.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub p_survival: f64,
    pub p_detect: f64,
    pub mu_fa: f64,
    pub sigma_d_lik: f64,
    pub sigma_theta_lik: f64,
    pub sigma_tx_walk: f64,
    pub sigma_ps_walk: f64,
    pub fa_d_range: [f64; 2],
    pub fa_theta_range: [f64; 2],
}

impl Default for ModelParams {
    /// Likelihood noise is inflated (0.2 m, 2 deg) relative to the generating
    /// noise so outlying samples are not over-penalized.
    fn default() -> Self {
        Self {
            p_survival: 0.999,
            p_detect: 0.95,
            mu_fa: 1.0,
            sigma_d_lik: 0.2,
            sigma_theta_lik: PI / 90.0,
            sigma_tx_walk: 0.1,
            sigma_ps_walk: 0.5,
            fa_d_range: [0.0, 50.0],
            fa_theta_range: [0.0, PI],
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !(prob(self.p_survival) && prob(self.p_detect)) {
            return Err(Error::InvalidInput("model probabilities must lie in [0, 1]".into()));
        }
        if !(self.mu_fa > 0.0 && self.mu_fa.is_finite()) {
            return Err(Error::InvalidInput("model mu_fa must be finite and > 0".into()));
        }
        let sigmas = [self.sigma_d_lik, self.sigma_theta_lik, self.sigma_tx_walk, self.sigma_ps_walk];
        if !sigmas.iter().all(|s| *s >= 0.0 && s.is_finite()) || !(self.sigma_d_lik > 0.0 && self.sigma_theta_lik > 0.0)
        {
            return Err(Error::InvalidInput("likelihood sigmas must be > 0 and walk sigmas >= 0".into()));
        }
        if !(self.fa_d_range[0] < self.fa_d_range[1] && self.fa_theta_range[0] < self.fa_theta_range[1]) {
            return Err(Error::InvalidInput("model clutter ranges must be ordered".into()));
        }
        Ok(())
    }

    /// Uniform clutter density inside the clutter box.
    pub fn fa_box_density(&self) -> f64 {
        1.0 / ((self.fa_d_range[1] - self.fa_d_range[0]) * (self.fa_theta_range[1] - self.fa_theta_range[0]))
    }

    /// `mu_FA * f_FA` as used in the denominators of the likelihood ratios.
    ///
    /// Always the in-box density: measurement noise pushes true detections
    /// slightly outside the clutter box, and a zero denominator there would
    /// make the ratio infinite.
    pub fn clutter_intensity(&self) -> f64 {
        self.mu_fa * self.fa_box_density()
    }
}

fn normal_pdf(x: f64, mean: f64, sigma: f64) -> f64 {
    let u = (x - mean) / sigma;
    (-0.5 * u * u).exp() / ((2.0 * PI).sqrt() * sigma)
}

/// Density of a scattered-path measurement given transmitter and scatterer.
/// Zero when the scatterer sits on the receiver.
#[inline]
pub fn likelihood_scatter(z: &ScatterMeasurement, tx: Position, scat: Position, rx: &Pose, p: &ModelParams) -> f64 {
    let Ok(theta) = aoa(scat, rx) else {
        return 0.0;
    };
    let d = relative_distance(tx, scat, rx.position);
    normal_pdf(z.rel_distance, d, p.sigma_d_lik) * normal_pdf(z.aoa, theta, p.sigma_theta_lik)
}

/// Log of [`likelihood_scatter`]; `-inf` when the scatterer sits on the
/// receiver.
#[inline]
pub fn log_likelihood_scatter(z: &ScatterMeasurement, tx: Position, scat: Position, rx: &Pose, p: &ModelParams) -> f64 {
    let Ok(theta) = aoa(scat, rx) else {
        return f64::NEG_INFINITY;
    };
    let d = relative_distance(tx, scat, rx.position);
    let ud = (z.rel_distance - d) / p.sigma_d_lik;
    let ut = (z.aoa - theta) / p.sigma_theta_lik;
    -0.5 * (ud * ud + ut * ut) - (2.0 * PI * p.sigma_d_lik * p.sigma_theta_lik).ln()
}

/// Density of the direct-path AOA given the transmitter position.
pub fn likelihood_direct(z0: f64, tx: Position, rx: &Pose, p: &ModelParams) -> Result<f64> {
    let theta = aoa(tx, rx)?;
    Ok(normal_pdf(z0, theta, p.sigma_theta_lik))
}

/// Log of [`likelihood_direct`], `-inf` for a transmitter on the receiver.
pub fn log_likelihood_direct(z0: f64, tx: Position, rx: &Pose, p: &ModelParams) -> f64 {
    match aoa(tx, rx) {
        Ok(theta) => {
            let u = (z0 - theta) / p.sigma_theta_lik;
            -0.5 * u * u - ((2.0 * PI).sqrt() * p.sigma_theta_lik).ln()
        }
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Clutter pdf: uniform on the `(d, theta)` box, zero outside.
pub fn fa_density(z: &ScatterMeasurement, p: &ModelParams) -> f64 {
    let inside = (p.fa_d_range[0]..=p.fa_d_range[1]).contains(&z.rel_distance)
        && (p.fa_theta_range[0]..=p.fa_theta_range[1]).contains(&z.aoa);
    if inside {
        p.fa_box_density()
    } else {
        0.0
    }
}

/// Legacy-PS factor `g(tx, scat, r, a; z)`.
///
/// `a = 0` means "no measurement"; `a = m >= 1` refers to `frame.scatter[m - 1]`.
pub fn g_factor(
    tx: Position,
    scat: Position,
    exists: bool,
    a: usize,
    frame: &MeasurementFrame,
    rx: &Pose,
    p: &ModelParams,
) -> f64 {
    match (exists, a) {
        (false, 0) => 1.0,
        (false, _) => 0.0,
        (true, 0) => 1.0 - p.p_detect,
        (true, m) => {
            let z = &frame.scatter[m - 1];
            p.p_detect * likelihood_scatter(z, tx, scat, rx, p) / p.clutter_intensity()
        }
    }
}

/// Weight of the new-PS factor `h` for an existing new PS not claimed by any
/// legacy PS (`b = 0`), with the birth pdf omitted.
pub fn h_factor_weight(
    tx: Position,
    new_scat: Position,
    z: &ScatterMeasurement,
    rx: &Pose,
    mu_new: f64,
    p: &ModelParams,
) -> f64 {
    if mu_new == 0.0 {
        return 0.0;
    }
    mu_new * likelihood_scatter(z, tx, new_scat, rx, p) / p.clutter_intensity()
}

/// Pairwise consistency of `a_k` (measurement claimed by PS `k`) and `b_m`
/// (PS claiming measurement `m`): zero when exactly one of them points at the
/// other.
pub fn psi(a: usize, m: usize, b: usize, k: usize) -> bool {
    !((a == m) ^ (b == k))
}

fn random_walk<R: Rng + ?Sized>(prev: Position, sigma: f64, rng: &mut R) -> Position {
    let dx: f64 = StandardNormal.sample(rng);
    let dy: f64 = StandardNormal.sample(rng);
    prev + Position::new(dx, dy) * sigma
}

/// One draw from the PS position transition.
pub fn transition_sample_ps<R: Rng + ?Sized>(prev: Position, p: &ModelParams, rng: &mut R) -> Position {
    random_walk(prev, p.sigma_ps_walk, rng)
}

/// One draw from the transmitter position transition.
pub fn transition_sample_tx<R: Rng + ?Sized>(prev: Position, p: &ModelParams, rng: &mut R) -> Position {
    random_walk(prev, p.sigma_tx_walk, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scene() -> (Position, Position, Pose) {
        let tx = Position::new(0.0, 30.0);
        let scat = Position::new(40.0, 10.0);
        let rx = Pose::new(Position::new(0.0, -20.0), Position::new(1.0, 0.0)).unwrap();
        (tx, scat, rx)
    }

    fn exact_z(tx: Position, scat: Position, rx: &Pose) -> ScatterMeasurement {
        ScatterMeasurement { rel_distance: relative_distance(tx, scat, rx.position), aoa: aoa(scat, rx).unwrap() }
    }

    #[test]
    fn scatter_likelihood_peak_and_tails() {
        let p = ModelParams::default();
        let (tx, scat, rx) = scene();
        let z = exact_z(tx, scat, &rx);
        let peak = likelihood_scatter(&z, tx, scat, &rx, &p);
        assert_relative_eq!(peak, 1.0 / (2.0 * PI * 0.2 * (PI / 90.0)), max_relative = 1e-12);
        assert_abs_diff_eq!(peak, 22.79727, epsilon = 1e-5);

        let shifted = ScatterMeasurement { rel_distance: z.rel_distance + 0.2, ..z };
        assert_relative_eq!(
            likelihood_scatter(&shifted, tx, scat, &rx, &p),
            peak * (-0.5f64).exp(),
            max_relative = 1e-12
        );

        let far = ScatterMeasurement { rel_distance: z.rel_distance + 10.0 * 0.2, aoa: z.aoa + 10.0 * PI / 90.0 };
        assert!(likelihood_scatter(&far, tx, scat, &rx, &p) < 1e-20 * peak);

        assert_eq!(likelihood_scatter(&z, tx, rx.position, &rx, &p), 0.0);
        assert_relative_eq!(
            log_likelihood_scatter(&shifted, tx, scat, &rx, &p).exp(),
            likelihood_scatter(&shifted, tx, scat, &rx, &p),
            max_relative = 1e-12
        );
    }

    #[test]
    fn direct_likelihood() {
        let p = ModelParams::default();
        let (tx, _, rx) = scene();
        let theta = aoa(tx, &rx).unwrap();
        let peak = likelihood_direct(theta, tx, &rx, &p).unwrap();
        assert_relative_eq!(peak, 1.0 / ((2.0 * PI).sqrt() * PI / 90.0), max_relative = 1e-12);
        let off = likelihood_direct(theta + 2.0 * PI / 90.0, tx, &rx, &p).unwrap();
        assert_relative_eq!(off, peak * (-2.0f64).exp(), max_relative = 1e-12);
        assert!(likelihood_direct(theta, rx.position, &rx, &p).is_err());
        assert_eq!(log_likelihood_direct(theta, rx.position, &rx, &p), f64::NEG_INFINITY);
        assert_relative_eq!(log_likelihood_direct(theta, tx, &rx, &p).exp(), peak, max_relative = 1e-12);
    }

    #[test]
    fn clutter_density_box() {
        let p = ModelParams::default();
        let z = |d, t| ScatterMeasurement { rel_distance: d, aoa: t };
        assert_relative_eq!(fa_density(&z(25.0, PI / 2.0), &p), 1.0 / (50.0 * PI));
        assert_abs_diff_eq!(fa_density(&z(25.0, PI / 2.0), &p), 0.0063662, epsilon = 1e-7);
        assert_eq!(fa_density(&z(60.0, PI / 2.0), &p), 0.0);
        assert_eq!(fa_density(&z(25.0, -0.1), &p), 0.0);
    }

    #[test]
    fn g_factor_branches() {
        let p = ModelParams::default();
        let (tx, scat, rx) = scene();
        let frame =
            MeasurementFrame { step: 1, direct: None, scatter: vec![exact_z(tx, scat, &rx), exact_z(tx, scat, &rx)] };
        assert_abs_diff_eq!(g_factor(tx, scat, true, 0, &frame, &rx, &p), 0.05, epsilon = 1e-15);
        assert_eq!(g_factor(tx, scat, false, 0, &frame, &rx, &p), 1.0);
        assert_eq!(g_factor(tx, scat, false, 2, &frame, &rx, &p), 0.0);
        let peak = likelihood_scatter(&frame.scatter[0], tx, scat, &rx, &p);
        assert_relative_eq!(
            g_factor(tx, scat, true, 1, &frame, &rx, &p),
            0.95 * peak * 50.0 * PI,
            max_relative = 1e-12
        );
    }

    #[test]
    fn h_factor_weight_examples() {
        let p = ModelParams::default();
        let (tx, scat, rx) = scene();
        let z = exact_z(tx, scat, &rx);
        assert_eq!(h_factor_weight(tx, scat, &z, &rx, 0.0, &p), 0.0);
        let far = ScatterMeasurement { rel_distance: z.rel_distance + 100.0, ..z };
        assert_eq!(h_factor_weight(tx, scat, &far, &rx, 1.0, &p), 0.0);
        let h = h_factor_weight(tx, scat, &z, &rx, p.mu_fa, &p);
        assert_abs_diff_eq!(h, 50.0 * PI * 22.79727, epsilon = 1e-3);
        assert_abs_diff_eq!(h, 3580.986, epsilon = 1e-3);
    }

    #[test]
    fn psi_truth_table() {
        assert!(psi(2, 2, 3, 3));
        assert!(!psi(2, 2, 1, 3));
        assert!(!psi(1, 2, 3, 3));
        assert!(psi(0, 1, 0, 1));
        assert!(psi(1, 2, 1, 3));
    }

    /// Exhaustive check against a literal transcription of the definition.
    #[test]
    fn psi_matches_definition_exhaustively() {
        for m_max in 1..=4 {
            for k_max in 1..=4 {
                for a in 0..=m_max {
                    for b in 0..=k_max {
                        for m in 1..=m_max {
                            for k in 1..=k_max {
                                let zero = (a == m && b != k) || (b == k && a != m);
                                assert_eq!(psi(a, m, b, k), !zero);
                                // Swapping the roles of (a, m) and (b, k) is a symmetry.
                                assert_eq!(psi(a, m, b, k), psi(b, k, a, m));
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn zero_walk_is_identity() {
        let p = ModelParams { sigma_ps_walk: 0.0, sigma_tx_walk: 0.0, ..ModelParams::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Position::new(3.0, -4.0);
        assert_eq!(transition_sample_ps(x, &p, &mut rng), x);
        assert_eq!(transition_sample_tx(x, &p, &mut rng), x);
    }

    fn check_walk_moments(sigma: f64, draw: impl Fn(&mut ChaCha8Rng) -> Position, prev: Position) {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let samples: Vec<Position> = (0..n).map(|_| draw(&mut rng)).collect();
        let nf = n as f64;
        let mean_x = samples.iter().map(|s| s.x).sum::<f64>() / nf;
        let mean_y = samples.iter().map(|s| s.y).sum::<f64>() / nf;
        let bound = 3.0 * sigma / nf.sqrt();
        assert!((mean_x - prev.x).abs() < bound && (mean_y - prev.y).abs() < bound);
        let var_x = samples.iter().map(|s| (s.x - prev.x).powi(2)).sum::<f64>() / nf;
        let var_y = samples.iter().map(|s| (s.y - prev.y).powi(2)).sum::<f64>() / nf;
        let target = sigma * sigma;
        assert!((var_x / target - 1.0).abs() < 0.05, "var_x {var_x}");
        assert!((var_y / target - 1.0).abs() < 0.05, "var_y {var_y}");
    }

    #[test]
    fn walk_moments() {
        let p = ModelParams::default();
        let prev = Position::new(1.0, 2.0);
        check_walk_moments(p.sigma_ps_walk, |r| transition_sample_ps(prev, &p, r), prev);
        check_walk_moments(p.sigma_tx_walk, |r| transition_sample_tx(prev, &p, r), prev);
    }
}

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::Position;

/// Weighted position particles. The universal message and belief
/// representation of the tracker.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParticleSet {
    pub positions: Vec<Position>,
    pub weights: Vec<f64>,
}

impl ParticleSet {
    /// Equal weights summing to `mass`.
    pub fn uniform(positions: Vec<Position>, mass: f64) -> Self {
        let w = if positions.is_empty() { 0.0 } else { mass / positions.len() as f64 };
        let weights = vec![w; positions.len()];
        Self { positions, weights }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Plain average of the positions, ignoring weights.
    pub fn arithmetic_mean(&self) -> Option<Position> {
        if self.is_empty() {
            return None;
        }
        let sum = self.positions.iter().fold(Position::ORIGIN, |acc, p| acc + *p);
        Some(sum * (1.0 / self.len() as f64))
    }

    /// Weighted mean with weights normalized to one.
    pub fn weighted_mean(&self) -> Option<Position> {
        let total = self.total_weight();
        if !(total > 0.0) {
            return None;
        }
        let sum = self.positions.iter().zip(&self.weights).fold(Position::ORIGIN, |acc, (p, w)| acc + *p * *w);
        Some(sum * (1.0 / total))
    }

    /// `sqrt(trace(covariance))` of the weighted cloud.
    pub fn spread(&self) -> Option<f64> {
        let mean = self.weighted_mean()?;
        let total = self.total_weight();
        let var = self.positions.iter().zip(&self.weights).map(|(p, w)| w * (*p - mean).norm_sq()).sum::<f64>() / total;
        Some(var.max(0.0).sqrt())
    }
}

/// Systematic resampling: `S` draws on a single random stratum offset.
/// Output weights all equal `target_mass / S`.
///
/// A set whose weights are all zero keeps its positions and gets zero
/// weights.
pub fn resample<R: Rng + ?Sized>(set: &ParticleSet, target_mass: f64, rng: &mut R) -> Result<ParticleSet> {
    let n = set.len();
    if n == 0 {
        return Ok(ParticleSet::default());
    }
    if set.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidInput("particle weights must be finite and >= 0".into()));
    }
    let total = set.total_weight();
    if total == 0.0 {
        return Ok(ParticleSet::uniform(set.positions.clone(), 0.0));
    }

    let step = 1.0 / n as f64;
    let offset: f64 = rng.random::<f64>() * step;
    let mut positions = Vec::with_capacity(n);
    let mut cumulative = set.weights[0] / total;
    let mut j = 0;
    for i in 0..n {
        let u = offset + i as f64 * step;
        while u > cumulative && j + 1 < n {
            j += 1;
            cumulative += set.weights[j] / total;
        }
        positions.push(set.positions[j]);
    }
    Ok(ParticleSet::uniform(positions, target_mass))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line(n: usize) -> Vec<Position> {
        (0..n).map(|i| Position::new(i as f64, -(i as f64))).collect()
    }

    #[test]
    fn equal_weights_keep_the_multiset() {
        let set = ParticleSet::uniform(line(64), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let out = resample(&set, 0.7, &mut rng).unwrap();
            assert_eq!(out.positions, set.positions);
            assert!(out.weights.iter().all(|w| (*w - 0.7 / 64.0).abs() < 1e-15));
        }
    }

    #[test]
    fn single_nonzero_weight_collapses() {
        let mut set = ParticleSet::uniform(line(10), 1.0);
        set.weights = vec![0.0; 10];
        set.weights[6] = 0.3;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = resample(&set, 1.0, &mut rng).unwrap();
        assert!(out.positions.iter().all(|p| *p == set.positions[6]));
        assert_abs_diff_eq!(out.total_weight(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_mass_is_preserved() {
        let mut set = ParticleSet::uniform(line(4), 1.0);
        set.weights = vec![0.0; 4];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = resample(&set, 0.0, &mut rng).unwrap();
        assert_eq!(out.positions, set.positions);
        assert_eq!(out.total_weight(), 0.0);
    }

    #[test]
    fn weighted_mean_is_preserved_statistically() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 500;
        let positions: Vec<Position> =
            (0..n).map(|_| Position::new(rng.random_range(-5.0..5.0), rng.random_range(0.0..3.0))).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(3)).collect();
        let set = ParticleSet { positions, weights };
        let mean = set.weighted_mean().unwrap();
        let std = set.spread().unwrap();
        let bound = 3.0 * std / (n as f64).sqrt();
        for _ in 0..50 {
            let out = resample(&set, 1.0, &mut rng).unwrap();
            let m = out.arithmetic_mean().unwrap();
            assert!(m.distance(mean) < bound, "{m:?} vs {mean:?} (bound {bound})");
        }
    }

    #[test]
    fn spread_of_symmetric_pair() {
        let set = ParticleSet::uniform(vec![Position::new(-3.0, 0.0), Position::new(3.0, 0.0)], 1.0);
        assert_abs_diff_eq!(set.spread().unwrap(), 3.0);
        assert_eq!(set.weighted_mean().unwrap(), Position::ORIGIN);
    }

    #[test]
    fn rejects_negative_weights() {
        let set = ParticleSet { positions: line(2), weights: vec![1.0, -1.0] };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(resample(&set, 1.0, &mut rng).is_err());
    }
}

use rand::Rng;

use super::{stream, FilterState, Particle, ParticleBounds, Stream};
use crate::error::{Error, Result};

/// Kish effective sample size `1 / Σ w²` of normalised weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
    if sum_sq > 0.0 {
        1.0 / sum_sq
    } else {
        0.0
    }
}

/// Systematic resampling: `n` indices drawn with comb offsets `(u0 + k) / n`,
/// `u0 ∈ [0, 1)`. `weights` must sum to one.
pub fn systematic_indices(weights: &[f64], n: usize, u0: f64) -> Vec<usize> {
    let mut out = Vec::with_capacity(n);
    if weights.is_empty() {
        return out;
    }
    let last = weights.len() - 1;
    let mut cumulative = weights[0];
    let mut i = 0;
    for k in 0..n {
        let u = (u0 + k as f64) / n as f64;
        while u >= cumulative && i < last {
            i += 1;
            cumulative += weights[i];
        }
        // Skip trailing zero-weight particles reached through rounding.
        while weights[i] == 0.0 && i > 0 {
            i -= 1;
        }
        out.push(i);
    }
    out
}

/// Particle count for the next generation, shrinking linearly from
/// `bounds.max` towards `bounds.min` as the pose covariance determinant
/// falls below `convergence_det`.
pub fn target_particle_count(bounds: &ParticleBounds, covariance_det: f64, convergence_det: f64) -> usize {
    let ratio = if covariance_det.is_finite() {
        (covariance_det / convergence_det).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let span = (bounds.max - bounds.min) as f64;
    bounds.min + (span * ratio).round() as usize
}

/// Resample when the effective sample size drops below half the particle
/// count. Returns whether resampling happened. The population is resized to
/// [`target_particle_count`] for the current spread.
pub fn resample(state: &mut FilterState, covariance_det: f64) -> Result<bool> {
    let weights = state.weights();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Divergence);
    }
    let n = state.len();
    let target = target_particle_count(&state.bounds, covariance_det, state.convergence_det);
    let ess = effective_sample_size(&weights);
    if ess >= 0.5 * n as f64 && target == n {
        return Ok(false);
    }
    let u0: f64 = stream(state.rng_seed, Stream::Resample, state.steps, 0).random();
    let w = 1.0 / target as f64;
    state.particles = systematic_indices(&weights, target, u0)
        .into_iter()
        .map(|i| Particle::new(state.particles[i].pose, w))
        .collect();
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose2D;
    use proptest::prelude::*;

    #[test]
    fn ess_extremes() {
        assert!((effective_sample_size(&[0.25; 4]) - 4.0).abs() < 1e-12);
        assert!((effective_sample_size(&[1.0, 0.0, 0.0]) - 1.0).abs() < 1e-12);
        assert_eq!(effective_sample_size(&[]), 0.0);
    }

    #[test]
    fn systematic_counts() {
        let idx = systematic_indices(&[0.5, 0.0, 0.25, 0.25], 8, 0.3);
        let count = |k| idx.iter().filter(|&&i| i == k).count();
        assert_eq!((count(0), count(1), count(2), count(3)), (4, 0, 2, 2));
    }

    #[test]
    fn particle_count_schedule() {
        let b = ParticleBounds::new(100, 1000).unwrap();
        assert_eq!(target_particle_count(&b, 1.0, 1e-4), 1000);
        assert_eq!(target_particle_count(&b, 0.0, 1e-4), 100);
        assert_eq!(target_particle_count(&b, 0.5e-4, 1e-4), 550);
        assert_eq!(target_particle_count(&b, f64::NAN, 1e-4), 1000);
    }

    #[test]
    fn all_zero_weights_diverge() {
        let particles = vec![Particle { pose: Pose2D::default(), log_weight: f64::NEG_INFINITY, weight: 0.0 }; 3];
        let mut state = FilterState::new(particles, ParticleBounds::new(1, 3).unwrap(), 0);
        assert!(matches!(resample(&mut state, 1.0), Err(Error::Divergence)));
    }

    #[test]
    fn degenerate_set_collapses_to_survivor() {
        let mut particles: Vec<_> = (0..10)
            .map(|i| Particle { pose: Pose2D::new(i as f64, 0.0, 0.0), log_weight: f64::NEG_INFINITY, weight: 0.0 })
            .collect();
        particles[7].log_weight = 0.0;
        let mut state = FilterState::new(particles, ParticleBounds::new(10, 10).unwrap(), 3);
        assert!(resample(&mut state, 1.0).unwrap());
        assert_eq!(state.len(), 10);
        assert!(state.particles.iter().all(|p| p.pose.x == 7.0 && (p.weight - 0.1).abs() < 1e-15));
    }

    proptest! {
        #[test]
        fn systematic_is_unbiased_within_one(
            raw in prop::collection::vec(0.0f64..1.0, 1..40),
            n in 1usize..200,
            u0 in 0.0f64..1.0,
        ) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 1e-6);
            let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let idx = systematic_indices(&w, n, u0);
            prop_assert_eq!(idx.len(), n);
            prop_assert!(idx.windows(2).all(|p| p[0] <= p[1]));
            for (k, wk) in w.iter().enumerate() {
                let c = idx.iter().filter(|&&i| i == k).count() as f64;
                prop_assert!((c - wk * n as f64).abs() < 1.0 + 1e-9);
                if *wk == 0.0 {
                    prop_assert_eq!(c, 0.0);
                }
            }
        }
    }
}

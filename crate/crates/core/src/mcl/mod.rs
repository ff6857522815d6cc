//! Monte-Carlo localisation over a semantic floorplan.
//!
//! Particles carry log-weights as the canonical quantity; `weight` is the
//! normalised linear weight, refreshed by [`FilterState::normalize`].

mod config;
mod filter;
mod motion;
mod observation;
mod resample;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use crate::geometry::Pose2D;
pub use config::{FilterConfig, Mode};
pub use filter::{estimate_pose, init_global, init_room, step, PoseEstimate, StepOutput};
pub use motion::{motion_prior, motion_update, sample_odometry};
pub use observation::{
    beam_likelihood, range_ray_likelihood, scan_log_likelihood_range, scan_log_likelihood_ray, sensor_update_range,
    sensor_update_ray, RangeRay,
};
pub use resample::{effective_sample_size, resample, systematic_indices, target_particle_count};

use crate::error::{Error, Result};
use crate::fields::LikelihoodFieldSet;
use crate::floorplan::SemanticFloorplan;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub pose: Pose2D,
    pub log_weight: f64,
    pub weight: f64,
}

impl Particle {
    pub fn new(pose: Pose2D, weight: f64) -> Self {
        Self {
            pose,
            log_weight: weight.ln(),
            weight,
        }
    }
}

/// Relative motion as rotate, translate, rotate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OdometryDelta {
    pub rot1: f64,
    pub trans: f64,
    pub rot2: f64,
}

impl OdometryDelta {
    pub const ZERO: OdometryDelta = OdometryDelta {
        rot1: 0.0,
        trans: 0.0,
        rot2: 0.0,
    };

    /// Decompose a motion `(dx, dy, dθ)` expressed in the previous robot frame.
    pub fn from_relative(dx: f64, dy: f64, dtheta: f64) -> Self {
        let trans = dx.hypot(dy);
        let rot1 = if trans < 1e-9 { 0.0 } else { dy.atan2(dx) };
        Self {
            rot1,
            trans,
            rot2: crate::geometry::normalize_angle(dtheta - rot1),
        }
    }

    pub fn between(from: &Pose2D, to: &Pose2D) -> Self {
        let rel = from.between(to);
        Self::from_relative(rel.x, rel.y, rel.theta)
    }

    pub fn to_relative(&self) -> Pose2D {
        Pose2D::new(
            self.trans * self.rot1.cos(),
            self.trans * self.rot1.sin(),
            self.rot1 + self.rot2,
        )
    }
}

/// Noise coefficients of the odometry motion model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionNoise {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
}

impl Default for MotionNoise {
    fn default() -> Self {
        Self {
            alpha1: 0.1,
            alpha2: 0.1,
            alpha3: 0.05,
            alpha4: 0.05,
        }
    }
}

impl MotionNoise {
    pub const ZERO: MotionNoise = MotionNoise {
        alpha1: 0.0,
        alpha2: 0.0,
        alpha3: 0.0,
        alpha4: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        if [self.alpha1, self.alpha2, self.alpha3, self.alpha4]
            .iter()
            .any(|a| !(*a >= 0.0))
        {
            return Err(Error::Config("motion noise coefficients must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModelConfig {
    pub eps_rng: f64,
    pub eps_lbl: f64,
    pub sigma_occ: f64,
    /// Lower bound on every per-ray likelihood.
    pub p_floor: f64,
    /// Ghost factor, per metre of distance to the nearest door.
    pub ghost_factor: f64,
    /// Raycasting horizon for the range-less model.
    pub max_range: f64,
    /// Exponent on each scan's likelihood before it enters the weights.
    /// Values below one soften the product over correlated rays.
    pub scan_exponent: f64,
}

impl Default for SensorModelConfig {
    fn default() -> Self {
        Self {
            eps_rng: 0.25,
            eps_lbl: 0.75,
            sigma_occ: 0.2,
            p_floor: 1e-3,
            ghost_factor: 3.0,
            max_range: crate::sensor::DEFAULT_MAX_RANGE,
            scan_exponent: 1.0,
        }
    }
}

impl SensorModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_rng >= 0.0 && self.eps_lbl >= 0.0 && self.eps_rng + self.eps_lbl > 0.0) {
            return Err(Error::Config(format!(
                "mixture weights must be >= 0 with a positive sum (got {}, {})",
                self.eps_rng, self.eps_lbl
            )));
        }
        if !(self.p_floor > 0.0 && self.p_floor < 1.0) {
            return Err(Error::Config(format!("p_floor {} outside (0, 1)", self.p_floor)));
        }
        if !(self.sigma_occ > 0.0) {
            return Err(Error::Config(format!("sigma_occ {} must be positive", self.sigma_occ)));
        }
        if !(self.ghost_factor >= 0.0) {
            return Err(Error::Config(format!("ghost_factor {} must be >= 0", self.ghost_factor)));
        }
        if !(self.scan_exponent > 0.0 && self.scan_exponent <= 1.0) {
            return Err(Error::Config(format!("scan_exponent {} outside (0, 1]", self.scan_exponent)));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::Config(format!("max_range {} must be positive", self.max_range)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticleBounds {
    pub min: usize,
    pub max: usize,
}

impl ParticleBounds {
    pub fn new(min: usize, max: usize) -> Result<Self> {
        if min == 0 || min > max {
            return Err(Error::Config(format!(
                "particle bounds need 0 < min <= max (got {min}, {max})"
            )));
        }
        Ok(Self { min, max })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterState {
    pub particles: Vec<Particle>,
    pub bounds: ParticleBounds,
    pub rng_seed: u64,
    /// Number of completed [`step`] calls; keys the per-step random streams.
    pub steps: u64,
    /// Pose covariance determinant below which the filter counts as converged.
    pub convergence_det: f64,
    pub converged: bool,
}

impl FilterState {
    pub fn new(particles: Vec<Particle>, bounds: ParticleBounds, rng_seed: u64) -> Self {
        let mut state = Self {
            particles,
            bounds,
            rng_seed,
            steps: 0,
            convergence_det: config::DEFAULT_CONVERGENCE_DET,
            converged: false,
        };
        state.normalize().ok();
        state
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Shift log-weights so the linear weights sum to one.
    pub fn normalize(&mut self) -> Result<()> {
        let max = self
            .particles
            .iter()
            .map(|p| p.log_weight)
            .fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            for p in &mut self.particles {
                p.weight = 0.0;
            }
            return Err(Error::Divergence);
        }
        let sum: f64 = self
            .particles
            .iter()
            .map(|p| (p.log_weight - max).exp())
            .sum();
        let log_norm = max + sum.ln();
        for p in &mut self.particles {
            p.log_weight -= log_norm;
            p.weight = p.log_weight.exp();
        }
        Ok(())
    }

    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.weight).collect()
    }
}

/// Immutable map data shared by every update.
#[derive(Debug, Clone, Copy)]
pub struct MapContext<'a> {
    pub plan: &'a SemanticFloorplan,
    pub fields: &'a LikelihoodFieldSet,
}

impl<'a> MapContext<'a> {
    pub fn new(plan: &'a SemanticFloorplan, fields: &'a LikelihoodFieldSet) -> Self {
        Self { plan, fields }
    }
}

/// Purposes for which independent random streams are derived.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub(crate) enum Stream {
    Init = 1,
    Motion = 2,
    Resample = 3,
}

/// Random stream keyed by `(seed, purpose, step, index)`, so particle
/// updates can run in any order or in parallel with identical results.
pub(crate) fn stream(seed: u64, purpose: Stream, step: u64, index: u64) -> ChaCha8Rng {
    let mut key = splitmix(seed ^ splitmix(purpose as u64));
    key = splitmix(key ^ step);
    key = splitmix(key ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    ChaCha8Rng::seed_from_u64(key)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

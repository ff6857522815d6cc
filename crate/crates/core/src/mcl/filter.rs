use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::observation::{sensor_update_range, sensor_update_ray};
use super::resample::{effective_sample_size, resample};
use super::{motion_update, stream, FilterConfig, FilterState, MapContext, Mode, OdometryDelta, Particle, ParticleBounds, Stream};
use crate::error::{Error, Result};
use crate::floorplan::{GridIndex, SemanticFloorplan};
use crate::geometry::{normalize_angle, Pose2D};
use crate::sensor::SedarScan;

/// Spread `bounds.max` particles uniformly over the free space of `plan`
/// with uniform headings.
pub fn init_global(plan: &SemanticFloorplan, bounds: ParticleBounds, seed: u64) -> Result<FilterState> {
    let free: Vec<GridIndex> = plan.free_cells().collect();
    if free.is_empty() {
        return Err(Error::NoFreeCells);
    }
    let particles = (0..bounds.max)
        .map(|i| {
            let mut rng = stream(seed, Stream::Init, 0, i as u64);
            let cell = free[rng.random_range(0..free.len())];
            let u = cell.col as f64 + rng.random::<f64>();
            let v = cell.row as f64 + rng.random::<f64>();
            let (x, y) = plan.local_to_world(u, v);
            let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            Particle::new(Pose2D::new(x, y, theta), 1.0 / bounds.max as f64)
        })
        .collect();
    Ok(FilterState::new(particles, bounds, seed))
}

/// Gaussian cloud of `bounds.max` particles around `center`.
pub fn init_room(center: &Pose2D, sigma_xy: f64, sigma_theta: f64, bounds: ParticleBounds, seed: u64) -> FilterState {
    let particles = (0..bounds.max)
        .map(|i| {
            let mut rng = stream(seed, Stream::Init, 0, i as u64);
            let zx: f64 = rng.sample(StandardNormal);
            let zy: f64 = rng.sample(StandardNormal);
            let zt: f64 = rng.sample(StandardNormal);
            Particle::new(
                Pose2D::new(
                    center.x + sigma_xy * zx,
                    center.y + sigma_xy * zy,
                    center.theta + sigma_theta * zt,
                ),
                1.0 / bounds.max as f64,
            )
        })
        .collect();
    FilterState::new(particles, bounds, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoseEstimate {
    pub pose: Pose2D,
    /// Weighted covariance of `(x, y, θ)`, heading residuals wrapped.
    pub covariance: [[f64; 3]; 3],
}

impl PoseEstimate {
    pub fn determinant(&self) -> f64 {
        let c = &self.covariance;
        c[0][0] * (c[1][1] * c[2][2] - c[1][2] * c[2][1]) - c[0][1] * (c[1][0] * c[2][2] - c[1][2] * c[2][0])
            + c[0][2] * (c[1][0] * c[2][1] - c[1][1] * c[2][0])
    }
}

/// Weighted mean pose (circular mean for the heading) and covariance.
pub fn estimate_pose(state: &FilterState) -> Result<PoseEstimate> {
    let total: f64 = state.particles.iter().map(|p| p.weight).sum();
    if !(total > 0.0) {
        return Err(Error::Divergence);
    }
    let (mut x, mut y, mut s, mut c) = (0.0, 0.0, 0.0, 0.0);
    for p in &state.particles {
        let w = p.weight / total;
        x += w * p.pose.x;
        y += w * p.pose.y;
        s += w * p.pose.theta.sin();
        c += w * p.pose.theta.cos();
    }
    let theta = s.atan2(c);
    let mut cov = [[0.0; 3]; 3];
    for p in &state.particles {
        let w = p.weight / total;
        let d = [p.pose.x - x, p.pose.y - y, normalize_angle(p.pose.theta - theta)];
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += w * d[i] * d[j];
            }
        }
    }
    Ok(PoseEstimate {
        pose: Pose2D::new(x, y, theta),
        covariance: cov,
    })
}

/// What one filter iteration reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepOutput {
    pub estimate: PoseEstimate,
    /// Effective sample size after weighting, before resampling.
    pub ess: f64,
    /// Particle count used for this update.
    pub n_particles: usize,
    pub resampled: bool,
}

/// One iteration: motion, observation, pose estimate, resampling.
///
/// Returns [`Error::Divergence`] when every particle's weight vanished; the
/// state is left as it was after the failing update.
pub fn step(
    state: &mut FilterState,
    odom: &OdometryDelta,
    scan: &SedarScan,
    ctx: &MapContext<'_>,
    cfg: &FilterConfig,
) -> Result<StepOutput> {
    state.convergence_det = cfg.convergence_det;
    motion_update(state, odom, &cfg.motion, ctx, cfg.sensor.ghost_factor, state.rng_seed);
    match cfg.mode {
        Mode::Range => {
            let label_only = super::SensorModelConfig {
                eps_rng: 0.0,
                eps_lbl: 1.0,
                ..cfg.sensor
            };
            sensor_update_range(state, scan, ctx, &label_only)?;
        }
        Mode::Combined => sensor_update_range(state, scan, ctx, &cfg.sensor)?,
        Mode::Ray => sensor_update_ray(state, scan, ctx, &cfg.sensor),
    }
    state.normalize()?;
    let n_particles = state.len();
    let ess = effective_sample_size(&state.weights());
    let estimate = estimate_pose(state)?;
    let det = estimate.determinant();
    state.converged = det < cfg.convergence_det;
    let resampled = resample(state, det)?;
    state.steps += 1;
    Ok(StepOutput {
        estimate,
        ess,
        n_particles,
        resampled,
    })
}

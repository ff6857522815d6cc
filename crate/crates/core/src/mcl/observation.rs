//! Observation models: range endpoints scored in the occupancy and label
//! likelihood fields, and range-less semantic raycasting.

use rayon::prelude::*;

use super::{FilterState, MapContext, SensorModelConfig};
use crate::error::{Error, Result};
use crate::fields::field_likelihood;
use crate::floorplan::Label;
use crate::geometry::Pose2D;
use crate::sensor::{cast_local_exiting, SedarScan};

/// A reading with its range, unpacked once per scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeRay {
    pub bearing: f64,
    pub range: f64,
    pub label: Option<Label>,
}

/// Beam-model hit term comparing a measured and a raycast range.
pub fn beam_likelihood(r_obs: f64, r_cast: f64, sigma_occ: f64) -> f64 {
    field_likelihood(r_obs - r_cast, sigma_occ)
}

/// Mixture score of one endpoint given its occupancy distance and its label
/// likelihood (`None` for an unlabeled or uninformative reading).
#[inline]
pub fn range_ray_likelihood(d_occ: f64, label_lik: Option<f64>, cfg: &SensorModelConfig) -> f64 {
    let range_term = if cfg.eps_rng > 0.0 {
        cfg.eps_rng * field_likelihood(d_occ, cfg.sigma_occ)
    } else {
        0.0
    };
    let label_term = cfg.eps_lbl * label_lik.unwrap_or(cfg.p_floor);
    (range_term + label_term).max(cfg.p_floor)
}

pub(crate) fn unpack_ranges(scan: &SedarScan) -> Result<Vec<RangeRay>> {
    scan.readings()
        .iter()
        .enumerate()
        .map(|(index, r)| {
            let range = r.range().ok_or(Error::MissingRange { index })?;
            Ok(RangeRay {
                bearing: r.bearing,
                range,
                label: r.label,
            })
        })
        .collect()
}

/// Per-ray direction cosines and labels; never touches ranges.
fn unpack_bearings(scan: &SedarScan) -> Vec<(f64, f64, Option<Label>)> {
    scan.readings()
        .iter()
        .map(|r| {
            let (s, c) = r.bearing.sin_cos();
            (c, s, r.label)
        })
        .collect()
}

/// Log-likelihood of a ranged scan from `pose`.
pub fn scan_log_likelihood_range(pose: &Pose2D, rays: &[RangeRay], ctx: &MapContext<'_>, cfg: &SensorModelConfig) -> f64 {
    let plan = ctx.plan;
    let fields = ctx.fields;
    let (u0, v0) = plan.world_to_local(pose.x, pose.y);
    let (s, c) = (pose.theta - plan.origin().theta).sin_cos();
    let inv_res = 1.0 / plan.resolution();
    let floor_ln = cfg.p_floor.ln();
    let mut total = 0.0;
    for ray in rays {
        let (sb, cb) = ray.bearing.sin_cos();
        let (dx, dy) = (c * cb - s * sb, s * cb + c * sb);
        let t = ray.range * inv_res;
        let Some(idx) = plan.local_to_grid(u0 + t * dx, v0 + t * dy) else {
            total += floor_ln;
            continue;
        };
        let d_occ = if cfg.eps_rng > 0.0 {
            fields.occ.get(idx.col, idx.row)
        } else {
            0.0
        };
        let label_lik = ray
            .label
            .and_then(|l| fields.label_likelihood_at(l, idx.col, idx.row));
        total += range_ray_likelihood(d_occ, label_lik, cfg).ln();
    }
    total
}

/// Log-likelihood of a range-less scan from `pose` by semantic raycasting:
/// each ray is cast to the first occupied cell, where the observed label's
/// field is evaluated. A pose inside structure looks out of it first, so a
/// particle buried in a wall does not see that wall on every ray.
pub fn scan_log_likelihood_ray(
    pose: &Pose2D,
    rays: &[(f64, f64, Option<Label>)],
    ctx: &MapContext<'_>,
    cfg: &SensorModelConfig,
) -> f64 {
    let plan = ctx.plan;
    let fields = ctx.fields;
    let floor_ln = cfg.p_floor.ln();
    let (u0, v0) = plan.world_to_local(pose.x, pose.y);
    if plan.local_to_grid(u0, v0).is_none() {
        return floor_ln * rays.len() as f64;
    }
    let (s, c) = (pose.theta - plan.origin().theta).sin_cos();
    let max_t = cfg.max_range / plan.resolution();
    let mut total = 0.0;
    for &(cb, sb, label) in rays {
        let Some(label) = label else {
            total += floor_ln;
            continue;
        };
        let (dx, dy) = (c * cb - s * sb, s * cb + c * sb);
        let lik = cast_local_exiting(plan, u0, v0, dx, dy, max_t)
            .and_then(|(col, row, _)| fields.label_likelihood_at(label, col, row))
            .map_or(cfg.p_floor, |l| l.max(cfg.p_floor));
        total += lik.ln();
    }
    total
}

/// Weight particles by a scan whose readings all carry ranges.
pub fn sensor_update_range(state: &mut FilterState, scan: &SedarScan, ctx: &MapContext<'_>, cfg: &SensorModelConfig) -> Result<()> {
    let rays = unpack_ranges(scan)?;
    state.particles.par_iter_mut().for_each(|p| {
        if p.log_weight.is_finite() {
            p.log_weight += cfg.scan_exponent * scan_log_likelihood_range(&p.pose, &rays, ctx, cfg);
        }
    });
    let _ = state.normalize();
    Ok(())
}

/// Weight particles by a scan without reading any range.
pub fn sensor_update_ray(state: &mut FilterState, scan: &SedarScan, ctx: &MapContext<'_>, cfg: &SensorModelConfig) {
    let rays = unpack_bearings(scan);
    state.particles.par_iter_mut().for_each(|p| {
        if p.log_weight.is_finite() {
            p.log_weight += cfg.scan_exponent * scan_log_likelihood_ray(&p.pose, &rays, ctx, cfg);
        }
    });
    let _ = state.normalize();
}

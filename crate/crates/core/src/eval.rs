//! Trajectory registration and absolute trajectory error.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Pose2D};

/// Default association window for [`time_align`], in seconds.
pub const DEFAULT_MAX_DT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedPose {
    pub t: f64,
    pub pose: Pose2D,
}

impl TimedPose {
    pub fn new(t: f64, pose: Pose2D) -> Self {
        Self { t, pose }
    }
}

/// Estimate/ground-truth association.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosePair {
    pub estimate: TimedPose,
    pub truth: TimedPose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    pub pairs: Vec<PosePair>,
    /// Estimates with no ground truth within `max_dt`.
    pub dropped: usize,
}

fn check_increasing(traj: &[TimedPose], name: &str) -> Result<()> {
    if traj.is_empty() {
        return Err(Error::InvalidArgument(format!("{name} trajectory is empty")));
    }
    if let Some(i) = traj.windows(2).position(|w| !(w[1].t > w[0].t)) {
        return Err(Error::InvalidArgument(format!(
            "{name} timestamps not strictly increasing at index {}",
            i + 1
        )));
    }
    Ok(())
}

/// Pair every estimate with the nearest ground-truth pose in time, dropping
/// estimates farther than `max_dt` from any.
pub fn time_align(est: &[TimedPose], gt: &[TimedPose], max_dt: f64) -> Result<Association> {
    check_increasing(est, "estimate")?;
    check_increasing(gt, "ground-truth")?;
    let mut pairs = Vec::with_capacity(est.len());
    let mut dropped = 0;
    for e in est {
        let i = gt.partition_point(|g| g.t < e.t);
        let nearest = [i.checked_sub(1), (i < gt.len()).then_some(i)]
            .into_iter()
            .flatten()
            .min_by(|&a, &b| (gt[a].t - e.t).abs().total_cmp(&(gt[b].t - e.t).abs()))
            .expect("ground truth is non-empty");
        if (gt[nearest].t - e.t).abs() <= max_dt {
            pairs.push(PosePair {
                estimate: *e,
                truth: gt[nearest],
            });
        } else {
            dropped += 1;
        }
    }
    if pairs.is_empty() {
        return Err(Error::NoPairs);
    }
    Ok(Association { pairs, dropped })
}

/// Planar rigid motion `p ↦ R(rotation)·p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform2D {
    pub rotation: f64,
    pub translation: (f64, f64),
}

impl Default for RigidTransform2D {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl RigidTransform2D {
    pub const IDENTITY: RigidTransform2D = RigidTransform2D {
        rotation: 0.0,
        translation: (0.0, 0.0),
    };

    pub fn new(rotation: f64, tx: f64, ty: f64) -> Self {
        Self {
            rotation: normalize_angle(rotation),
            translation: (tx, ty),
        }
    }

    pub fn apply_point(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.rotation.sin_cos();
        (c * x - s * y + self.translation.0, s * x + c * y + self.translation.1)
    }

    pub fn apply(&self, pose: &Pose2D) -> Pose2D {
        let (x, y) = self.apply_point(pose.x, pose.y);
        Pose2D::new(x, y, pose.theta + self.rotation)
    }
}

/// Result of [`horn_align`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Alignment {
    pub transform: RigidTransform2D,
    /// Similarity scale; exactly 1 unless scale estimation was requested.
    pub scale: f64,
    /// The estimate positions were coincident, so only a translation was fit.
    pub degenerate: bool,
}

impl Alignment {
    pub fn apply_point(&self, x: f64, y: f64) -> (f64, f64) {
        self.transform.apply_point(self.scale * x, self.scale * y)
    }
}

/// Closed-form planar least-squares rigid registration of estimates onto
/// ground truth.
pub fn horn_align(pairs: &[PosePair]) -> Result<Alignment> {
    horn_align_with(pairs, false)
}

/// [`horn_align`] with optional similarity scale, for diagnostics.
pub fn horn_align_with(pairs: &[PosePair], estimate_scale: bool) -> Result<Alignment> {
    if pairs.is_empty() {
        return Err(Error::NoPairs);
    }
    let n = pairs.len() as f64;
    let (mut ex, mut ey, mut gx, mut gy) = (0.0, 0.0, 0.0, 0.0);
    for p in pairs {
        ex += p.estimate.pose.x;
        ey += p.estimate.pose.y;
        gx += p.truth.pose.x;
        gy += p.truth.pose.y;
    }
    let (ex, ey, gx, gy) = (ex / n, ey / n, gx / n, gy / n);
    let (mut sxx, mut sxy, mut spread) = (0.0, 0.0, 0.0);
    for p in pairs {
        let (ax, ay) = (p.estimate.pose.x - ex, p.estimate.pose.y - ey);
        let (bx, by) = (p.truth.pose.x - gx, p.truth.pose.y - gy);
        sxx += ax * bx + ay * by;
        sxy += ax * by - ay * bx;
        spread += ax * ax + ay * ay;
    }
    let scale_ref = pairs
        .iter()
        .map(|p| p.estimate.pose.x.abs().max(p.estimate.pose.y.abs()))
        .fold(1.0, f64::max);
    let degenerate = spread <= (1e-12 * scale_ref).powi(2) * n;
    let rotation = if degenerate { 0.0 } else { sxy.atan2(sxx) };
    let (s, c) = rotation.sin_cos();
    let scale = if estimate_scale && !degenerate {
        (c * sxx + s * sxy) / spread
    } else {
        1.0
    };
    let translation = (gx - scale * (c * ex - s * ey), gy - scale * (s * ex + c * ey));
    Ok(Alignment {
        transform: RigidTransform2D {
            rotation,
            translation,
        },
        scale,
        degenerate,
    })
}

/// Summary statistics in the column order RMSE, Mean, Median, Std, Min, Max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AteStats {
    pub rmse: f64,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl AteStats {
    pub const HEADER: [&'static str; 6] = ["RMSE", "Mean", "Median", "Std. Dev.", "Min", "Max"];

    /// Statistics of a non-empty error list; the median is the lower median
    /// and the standard deviation is the population one.
    pub fn from_errors(errors: &[f64]) -> Result<Self> {
        if errors.is_empty() {
            return Err(Error::NoPairs);
        }
        let n = errors.len() as f64;
        let mean = errors.iter().sum::<f64>() / n;
        let mean_sq = errors.iter().map(|e| e * e).sum::<f64>() / n;
        let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
        let mut sorted = errors.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            rmse: mean_sq.sqrt(),
            mean,
            median: sorted[(sorted.len() - 1) / 2],
            std: var.sqrt(),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
        })
    }

    pub fn row(&self) -> [f64; 6] {
        [self.rmse, self.mean, self.median, self.std, self.min, self.max]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AteReport {
    #[serde(flatten)]
    pub stats: AteStats,
    pub timestamps: Vec<f64>,
    pub per_step_error: Vec<f64>,
    /// Wrapped heading difference per step, radians; diagnostic only.
    pub heading_error: Vec<f64>,
    pub dropped: usize,
}

/// Translational error of `g⁻¹ ∘ T ∘ x` for every pair.
pub fn ate(pairs: &[PosePair], transform: &RigidTransform2D) -> Result<AteReport> {
    let mut errors = Vec::with_capacity(pairs.len());
    let mut heading = Vec::with_capacity(pairs.len());
    for p in pairs {
        let mapped = transform.apply(&p.estimate.pose);
        // The rotation of g⁻¹ preserves length, so the norm is a plain difference.
        errors.push((mapped.x - p.truth.pose.x).hypot(mapped.y - p.truth.pose.y));
        heading.push(normalize_angle(mapped.theta - p.truth.pose.theta));
    }
    Ok(AteReport {
        stats: AteStats::from_errors(&errors)?,
        timestamps: pairs.iter().map(|p| p.estimate.t).collect(),
        per_step_error: errors,
        heading_error: heading,
        dropped: 0,
    })
}

/// Associate, optionally align, and score an estimated trajectory.
pub fn evaluate(est: &[TimedPose], gt: &[TimedPose], max_dt: f64, align: bool) -> Result<(AteReport, Alignment)> {
    let assoc = time_align(est, gt, max_dt)?;
    let alignment = if align {
        horn_align(&assoc.pairs)?
    } else {
        Alignment {
            transform: RigidTransform2D::IDENTITY,
            scale: 1.0,
            degenerate: false,
        }
    };
    let mut report = ate(&assoc.pairs, &alignment.transform)?;
    report.dropped = assoc.dropped;
    Ok((report, alignment))
}

impl AteReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    /// Error-versus-time curve as `t,ate_m,heading_err_rad`.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("t,ate_m,heading_err_rad\n");
        for ((t, e), h) in self.timestamps.iter().zip(&self.per_step_error).zip(&self.heading_error) {
            let _ = writeln!(out, "{t},{e},{h}");
        }
        out
    }

    pub fn save_curve_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.curve_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Parse a `t,x,y,theta` trajectory; an optional header line is skipped.
pub fn parse_trajectory_csv(text: &str, source: &str) -> Result<Vec<TimedPose>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if n == 0 && fields.first().is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let loc = || format!("{source}:{}", n + 1);
        if fields.len() != 4 {
            return Err(Error::parse(loc(), format!("expected 4 fields, found {}", fields.len())));
        }
        let mut v = [0.0; 4];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f
                .parse()
                .map_err(|_| Error::parse(loc(), format!("`{f}` is not a number")))?;
        }
        out.push(TimedPose::new(v[0], Pose2D::new(v[1], v[2], v[3])));
    }
    Ok(out)
}

pub fn read_trajectory_csv(path: &Path) -> Result<Vec<TimedPose>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory_csv(&text, &path.display().to_string())
}

pub fn trajectory_csv(traj: &[TimedPose]) -> String {
    let mut out = String::from("t,x,y,theta\n");
    for p in traj {
        let _ = writeln!(out, "{},{},{},{}", p.t, p.pose.x, p.pose.y, p.pose.theta);
    }
    out
}

pub fn write_trajectory_csv(path: &Path, traj: &[TimedPose]) -> Result<()> {
    std::fs::write(path, trajectory_csv(traj)).map_err(|e| Error::io(path, e))
}

//! SeDAR scans: bearing/label readings with optional range, grid
//! raycasting, and a simulator standing in for a segmentation front-end.

use std::cell::Cell as StdCell;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floorplan::{GridIndex, Label, SemanticFloorplan};
use crate::geometry::Pose2D;

pub const DEFAULT_MAX_RANGE: f64 = 10.0;
pub const DEFAULT_RAY_COUNT: usize = 64;
/// Roughly the horizontal field of view of a Kinect-class RGB-D camera.
pub const DEFAULT_FOV: f64 = 1.0;

thread_local! {
    static RANGE_READS: StdCell<usize> = const { StdCell::new(0) };
}

/// Number of times [`SedarReading::range`] has been called on this thread.
pub fn range_reads() -> usize {
    RANGE_READS.with(StdCell::get)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SedarReading {
    pub bearing: f64,
    range: Option<f64>,
    pub label: Option<Label>,
}

impl SedarReading {
    pub fn new(bearing: f64, range: Option<f64>, label: Option<Label>) -> Self {
        Self {
            bearing,
            range,
            label,
        }
    }

    pub fn range(&self) -> Option<f64> {
        RANGE_READS.with(|c| c.set(c.get() + 1));
        self.range
    }

    pub fn has_range(&self) -> bool {
        self.range.is_some()
    }
}

/// Readings along one horizontal scanline, ordered by strictly increasing
/// bearing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SedarScan {
    readings: Vec<SedarReading>,
    pub timestamp: f64,
}

impl SedarScan {
    pub fn new(readings: Vec<SedarReading>, timestamp: f64) -> Result<Self> {
        if readings.is_empty() {
            return Err(Error::DegenerateScan);
        }
        for pair in readings.windows(2) {
            if !(pair[1].bearing > pair[0].bearing) {
                return Err(Error::InvalidArgument(format!(
                    "bearings must be strictly increasing ({} then {})",
                    pair[0].bearing, pair[1].bearing
                )));
            }
        }
        for r in &readings {
            if !(-PI..PI).contains(&r.bearing) {
                return Err(Error::InvalidArgument(format!(
                    "bearing {} outside [-π, π)",
                    r.bearing
                )));
            }
            if let Some(range) = r.range {
                if !(range > 0.0 && range.is_finite()) {
                    return Err(Error::InvalidArgument(format!("non-positive range {range}")));
                }
            }
        }
        Ok(Self {
            readings,
            timestamp,
        })
    }

    pub fn readings(&self) -> &[SedarReading] {
        &self.readings
    }

    pub fn len(&self) -> usize {
        self.readings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.readings.is_empty()
    }

    pub fn has_all_ranges(&self) -> bool {
        self.readings.iter().all(SedarReading::has_range)
    }

    pub fn with_timestamp(mut self, timestamp: f64) -> Self {
        self.timestamp = timestamp;
        self
    }
}

/// The same scan with every range removed.
pub fn strip_ranges(scan: &SedarScan) -> SedarScan {
    SedarScan {
        readings: scan
            .readings
            .iter()
            .map(|r| SedarReading {
                range: None,
                ..*r
            })
            .collect(),
        timestamp: scan.timestamp,
    }
}

/// Pinhole column-to-bearing model: `K` columns spread over the image width.
pub fn bearings_for_camera(horizontal_fov: f64, count: usize) -> Result<Vec<f64>> {
    if !(horizontal_fov > 0.0 && horizontal_fov < PI) || count < 2 {
        return Err(Error::InvalidArgument(format!(
            "need 0 < fov < π and at least 2 rays (got {horizontal_fov}, {count})"
        )));
    }
    let half = (horizontal_fov / 2.0).tan();
    let denom = (count - 1) as f64;
    Ok(mirrored(count, |k| {
        let x = (2.0 * k as f64 - denom) / denom;
        (half * x).atan()
    }))
}

/// Evenly spaced bearings, for emulating a scanning range finder.
pub fn bearings_equiangular(fov: f64, count: usize) -> Result<Vec<f64>> {
    if !(fov > 0.0 && fov < 2.0 * PI) || count < 2 {
        return Err(Error::InvalidArgument(format!(
            "need 0 < fov < 2π and at least 2 rays (got {fov}, {count})"
        )));
    }
    let denom = (count - 1) as f64;
    Ok(mirrored(count, |k| fov * ((2.0 * k as f64 - denom) / denom) / 2.0))
}

/// Evaluate the lower half and negate it so the set is exactly antisymmetric.
fn mirrored(count: usize, f: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; count];
    for k in 0..count / 2 {
        let v = f(k);
        out[k] = v;
        out[count - 1 - k] = -v;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaycastHit {
    /// Metres from the ray origin to where it enters `cell`. Zero only when
    /// the origin itself lies inside structure.
    pub range: f64,
    pub cell: GridIndex,
    pub label: Option<Label>,
}

/// Cast a ray from `pose` along `bearing`; `Ok(None)` is a miss.
pub fn raycast(plan: &SemanticFloorplan, pose: &Pose2D, bearing: f64, max_range: f64) -> Result<Option<RaycastHit>> {
    let (u, v) = plan.world_to_local(pose.x, pose.y);
    if plan.local_to_grid(u, v).is_none() {
        return Err(Error::PoseOutsideMap {
            x: pose.x,
            y: pose.y,
        });
    }
    let (s, c) = (pose.theta + bearing - plan.origin().theta).sin_cos();
    Ok(cast_local(plan, u, v, c, s, max_range / plan.resolution()).map(|(col, row, t)| RaycastHit {
        range: t * plan.resolution(),
        cell: GridIndex::new(col, row),
        label: plan.dominant_label(col, row),
    }))
}

/// Cell-exact traversal in grid units from `(u, v)` along the unit direction
/// `(dx, dy)`. Returns the first occupied cell and the ray parameter at which
/// it is entered, or `None` when the ray leaves the map or exceeds `max_t`.
/// The origin must lie on the grid.
#[inline]
pub(crate) fn cast_local(
    plan: &SemanticFloorplan,
    u: f64,
    v: f64,
    dx: f64,
    dy: f64,
    max_t: f64,
) -> Option<(usize, usize, f64)> {
    traverse::<false>(plan, u, v, dx, dy, max_t)
}

/// Like [`cast_local`], but an origin inside structure first walks out of the
/// occupied run it starts in and reports the next occupied cell beyond it.
#[inline]
pub(crate) fn cast_local_exiting(
    plan: &SemanticFloorplan,
    u: f64,
    v: f64,
    dx: f64,
    dy: f64,
    max_t: f64,
) -> Option<(usize, usize, f64)> {
    traverse::<true>(plan, u, v, dx, dy, max_t)
}

#[inline(always)]
fn traverse<const EXIT: bool>(
    plan: &SemanticFloorplan,
    u: f64,
    v: f64,
    dx: f64,
    dy: f64,
    max_t: f64,
) -> Option<(usize, usize, f64)> {
    let (w, h) = (plan.width() as isize, plan.height() as isize);
    let occupied = plan.occupied_mask();
    let mut col = u.floor() as isize;
    let mut row = v.floor() as isize;
    let mut inside = occupied[(row * w + col) as usize];
    if inside && !EXIT {
        return Some((col as usize, row as usize, 0.0));
    }
    let (step_c, mut next_c, delta_c) = axis_setup(u, col, dx);
    let (step_r, mut next_r, delta_r) = axis_setup(v, row, dy);
    loop {
        let t;
        if next_c < next_r {
            t = next_c;
            col += step_c;
            next_c += delta_c;
            if col < 0 || col >= w {
                return None;
            }
        } else {
            t = next_r;
            row += step_r;
            next_r += delta_r;
            if row < 0 || row >= h {
                return None;
            }
        }
        if t > max_t {
            return None;
        }
        if occupied[(row * w + col) as usize] {
            if !inside {
                return Some((col as usize, row as usize, t));
            }
        } else {
            inside = false;
        }
    }
}

#[inline]
fn axis_setup(origin: f64, cell: isize, dir: f64) -> (isize, f64, f64) {
    if dir > 0.0 {
        (1, ((cell + 1) as f64 - origin) / dir, 1.0 / dir)
    } else if dir < 0.0 {
        (-1, (origin - cell as f64) / -dir, -1.0 / dir)
    } else {
        (0, f64::INFINITY, f64::INFINITY)
    }
}

/// Index into the confusion matrix rows/columns; `None` is the last slot.
pub fn confusion_index(label: Option<Label>) -> usize {
    label.map_or(3, Label::index)
}

fn confusion_label(index: usize) -> Option<Label> {
    Label::ALL.get(index).copied()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorNoise {
    pub range_sigma: f64,
    /// Row = true label, column = reported label, over {wall, door, window, none}.
    pub label_confusion: [[f64; 4]; 4],
    pub dropout: f64,
}

pub const IDENTITY_CONFUSION: [[f64; 4]; 4] = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

impl SensorNoise {
    pub fn noiseless() -> Self {
        Self {
            range_sigma: 0.0,
            label_confusion: IDENTITY_CONFUSION,
            dropout: 0.0,
        }
    }

    /// Each label is reported correctly with probability `1 - error`, and
    /// otherwise as one of the other three classes uniformly.
    pub fn symmetric(range_sigma: f64, label_error: f64, dropout: f64) -> Self {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = if i == j { 1.0 - label_error } else { label_error / 3.0 };
            }
        }
        Self {
            range_sigma,
            label_confusion: m,
            dropout,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.range_sigma >= 0.0) {
            return Err(Error::Config(format!("range_sigma {} < 0", self.range_sigma)));
        }
        if !(0.0..1.0).contains(&self.dropout) && self.dropout != 1.0 {
            return Err(Error::Config(format!("dropout {} outside [0, 1]", self.dropout)));
        }
        for (i, row) in self.label_confusion.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("confusion row {i} is not a distribution")));
            }
        }
        Ok(())
    }
}

/// Synthetic scan from `true_pose`: exact raycasts perturbed by Gaussian
/// range noise, confusion-matrix label noise and random dropout. Rays that
/// miss produce no reading.
pub fn simulate_scan(
    plan: &SemanticFloorplan,
    true_pose: &Pose2D,
    bearings: &[f64],
    noise: &SensorNoise,
    max_range: f64,
    rng_seed: u64,
) -> Result<SedarScan> {
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let gauss = Normal::new(0.0, 1.0).expect("unit normal");
    let mut readings = Vec::with_capacity(bearings.len());
    for &bearing in bearings {
        // Draw every variate unconditionally so one ray's outcome never
        // shifts the random stream of the next.
        let dropped = rng.random::<f64>() < noise.dropout;
        let z: f64 = gauss.sample(&mut rng);
        let u: f64 = rng.random();
        let Some(hit) = raycast(plan, true_pose, bearing, max_range)? else {
            continue;
        };
        if dropped {
            continue;
        }
        let range = (hit.range + noise.range_sigma * z).clamp(1e-3, max_range);
        let row = &noise.label_confusion[confusion_index(hit.label)];
        let mut acc = 0.0;
        let mut reported = 3;
        for (j, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                reported = j;
                break;
            }
        }
        readings.push(SedarReading::new(bearing, Some(range), confusion_label(reported)));
    }
    SedarScan::new(readings, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floorplan::{Cell, DEFAULT_OCCUPIED_THRESH};
    use std::f64::consts::FRAC_PI_4;

    /// 10 m × 2 m corridor at 0.1 m, walls around and a wall column at x = 8.
    fn corridor() -> SemanticFloorplan {
        let (w, h) = (100, 20);
        let mut cells = vec![Cell::FREE; w * h];
        for row in 0..h {
            for col in 0..w {
                if row == 0 || row == h - 1 || col == 0 || col == w - 1 || col == 80 {
                    cells[row * w + col] = Cell::labelled(Label::Wall);
                }
            }
        }
        cells[10 * w + 80] = Cell::labelled(Label::Door);
        SemanticFloorplan::new(w, h, 0.1, Pose2D::default(), DEFAULT_OCCUPIED_THRESH, cells).unwrap()
    }

    #[test]
    fn camera_bearings() {
        let b = bearings_for_camera(PI / 2.0, 3).unwrap();
        assert!((b[0] + FRAC_PI_4).abs() < 1e-15 && b[1] == 0.0 && (b[2] - FRAC_PI_4).abs() < 1e-15);
        let b = bearings_for_camera(1.0, 2).unwrap();
        assert!((b[0] + 0.5).abs() < 1e-15 && (b[1] - 0.5).abs() < 1e-15);
        let b = bearings_for_camera(1.0, 5).unwrap();
        let expect = (0.5 * 0.5f64.tan()).atan();
        assert!((b[3] - expect).abs() < 1e-15);
        assert!((b[3] - 0.26665).abs() < 1e-5);
        assert_eq!(b[1], -b[3]);
        for k in [2, 7, 64, 65] {
            let b = bearings_for_camera(1.2, k).unwrap();
            assert!(b.windows(2).all(|p| p[1] > p[0]));
            for i in 0..k {
                assert_eq!(b[i], -b[k - 1 - i]);
            }
        }
        assert!(bearings_for_camera(PI, 4).is_err());
        assert!(bearings_for_camera(1.0, 1).is_err());
        let e = bearings_equiangular(PI, 5).unwrap();
        assert!((e[1] + PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn raycast_hits_wall_ahead() {
        let plan = corridor();
        // Cell 80 starts at x = 8.0; pose at x = 5.0 in the middle of row 5.
        let pose = Pose2D::new(5.0, 0.55, 0.0);
        let hit = raycast(&plan, &pose, 0.0, 10.0).unwrap().unwrap();
        assert!((hit.range - 3.0).abs() <= 0.05 + 1e-9);
        assert_eq!(hit.label, Some(Label::Wall));
        assert_eq!(hit.cell, GridIndex::new(80, 5));
        let door = raycast(&plan, &Pose2D::new(5.0, 1.05, 0.0), 0.0, 10.0).unwrap().unwrap();
        assert_eq!(door.label, Some(Label::Door));
        assert!(raycast(&plan, &pose, 0.0, 2.9).unwrap().is_none());
        assert!(raycast(&plan, &Pose2D::new(-1.0, 0.5, 0.0), 0.0, 5.0).is_err());
    }

    #[test]
    fn raycast_misses_in_open_space() {
        let plan = SemanticFloorplan::new(50, 50, 0.1, Pose2D::default(), 0.65, vec![Cell::FREE; 2500]).unwrap();
        for k in 0..16 {
            let b = -PI + k as f64 * PI / 8.0;
            assert!(raycast(&plan, &Pose2D::new(2.5, 2.5, 0.3), b, 5.0).unwrap().is_none());
        }
    }

    #[test]
    fn origin_inside_structure_is_immediate_hit() {
        let plan = corridor();
        let hit = raycast(&plan, &Pose2D::new(8.05, 1.0, 0.0), 1.0, 5.0).unwrap().unwrap();
        assert_eq!(hit.range, 0.0);
        assert_eq!(hit.cell, GridIndex::new(80, 10));
    }

    #[test]
    fn exiting_cast_skips_the_starting_wall() {
        let plan = corridor();
        assert_eq!(cast_local(&plan, 80.5, 5.5, 1.0, 0.0, 100.0), Some((80, 5, 0.0)));
        let (col, row, t) = cast_local_exiting(&plan, 80.5, 5.5, 1.0, 0.0, 100.0).unwrap();
        assert_eq!((col, row), (99, 5));
        assert!((t - 18.5).abs() < 1e-12);
        let (col, _, t) = cast_local_exiting(&plan, 80.5, 5.5, -1.0, 0.0, 100.0).unwrap();
        assert_eq!(col, 0);
        assert!((t - 79.5).abs() < 1e-12);
        // From free space both casts agree.
        assert_eq!(
            cast_local(&plan, 50.5, 5.5, 1.0, 0.0, 100.0),
            cast_local_exiting(&plan, 50.5, 5.5, 1.0, 0.0, 100.0)
        );
        // Running along the outer wall never leaves it.
        assert_eq!(cast_local_exiting(&plan, 10.5, 0.5, 1.0, 0.0, 100.0), None);
    }

    #[test]
    fn noiseless_simulation_equals_raycast() {
        let plan = corridor();
        let pose = Pose2D::new(3.0, 1.0, 0.1);
        let bearings = bearings_for_camera(1.0, 16).unwrap();
        let scan = simulate_scan(&plan, &pose, &bearings, &SensorNoise::noiseless(), 10.0, 3).unwrap();
        assert_eq!(scan.len(), 16);
        for r in scan.readings() {
            let hit = raycast(&plan, &pose, r.bearing, 10.0).unwrap().unwrap();
            assert_eq!(r.range(), Some(hit.range));
            assert_eq!(r.label, hit.label);
        }
    }

    #[test]
    fn simulation_is_seeded_and_dropout_degenerates() {
        let plan = corridor();
        let pose = Pose2D::new(3.0, 1.0, 0.1);
        let bearings = bearings_for_camera(1.0, 32).unwrap();
        let noise = SensorNoise::symmetric(0.05, 0.2, 0.3);
        let a = simulate_scan(&plan, &pose, &bearings, &noise, 10.0, 42).unwrap();
        let b = simulate_scan(&plan, &pose, &bearings, &noise, 10.0, 42).unwrap();
        assert_eq!(a, b);
        let c = simulate_scan(&plan, &pose, &bearings, &noise, 10.0, 43).unwrap();
        assert_ne!(a, c);
        let all = SensorNoise {
            dropout: 1.0,
            ..noise
        };
        assert!(matches!(
            simulate_scan(&plan, &pose, &bearings, &all, 10.0, 1),
            Err(Error::DegenerateScan)
        ));
    }

    #[test]
    fn confusion_rows_must_be_stochastic() {
        let mut noise = SensorNoise::noiseless();
        noise.label_confusion[1][1] = 0.9;
        assert!(noise.validate().is_err());
        assert!(SensorNoise::symmetric(0.0, 0.3, 0.0).validate().is_ok());
    }

    #[test]
    fn strip_preserves_bearings_and_labels() {
        let plan = corridor();
        let bearings = bearings_for_camera(1.0, 8).unwrap();
        let scan = simulate_scan(&plan, &Pose2D::new(2.0, 1.0, 0.0), &bearings, &SensorNoise::noiseless(), 10.0, 0).unwrap();
        let stripped = strip_ranges(&scan);
        assert_eq!(stripped.len(), scan.len());
        assert!(stripped.readings().iter().all(|r| !r.has_range()));
        assert_eq!(strip_ranges(&stripped), stripped);
        for (a, b) in scan.readings().iter().zip(stripped.readings()) {
            assert_eq!(a.bearing, b.bearing);
            assert_eq!(a.label, b.label);
        }
    }

    #[test]
    fn scan_validation() {
        assert!(matches!(SedarScan::new(vec![], 0.0), Err(Error::DegenerateScan)));
        let r = |b| SedarReading::new(b, None, None);
        assert!(SedarScan::new(vec![r(0.1), r(0.1)], 0.0).is_err());
        assert!(SedarScan::new(vec![r(PI)], 0.0).is_err());
        assert!(SedarScan::new(vec![SedarReading::new(0.0, Some(-1.0), None)], 0.0).is_err());
    }
}

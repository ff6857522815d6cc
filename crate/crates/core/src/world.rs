//! Synthetic multi-room floorplans with a ground-truth tour through doors,
//! and the simulated odometry and scans recorded along it.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, OdometryRecord};
use crate::error::{Error, Result};
use crate::eval::TimedPose;
use crate::floorplan::{Cell, Label, SemanticFloorplan, DEFAULT_OCCUPIED_THRESH};
use crate::geometry::{normalize_angle, Pose2D};
use crate::kv::KeyValues;
use crate::sensor::{bearings_for_camera, simulate_scan, SensorNoise, DEFAULT_MAX_RANGE, DEFAULT_RAY_COUNT};

/// Door-labelled frame cells on each side of an opening.
const DOOR_FRAME: usize = 2;
/// Minimum wall left between a door frame and a room corner.
const CORNER_MARGIN: usize = 4;
/// How far in front of a wall face the tour lines up before crossing.
const APPROACH: f64 = 0.45;
/// Horizontal field of view of the simulated wide-angle camera, about 160°.
pub const SIM_FOV: f64 = 2.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWorldSpec {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub rooms: usize,
    /// Opening width in cells.
    pub door_width: usize,
    /// Fraction of each exterior room side covered by a window.
    pub window_density: f64,
    pub wall_thickness: usize,
    /// Probability of a door between adjacent rooms beyond the spanning tree.
    pub extra_door_prob: f64,
    pub trajectory_steps: usize,
    /// Metres per step.
    pub speed: f64,
    /// Radians per step.
    pub turn_rate: f64,
    /// Seconds per step.
    pub dt: f64,
}

impl Default for SyntheticWorldSpec {
    fn default() -> Self {
        Self {
            width: 200,
            height: 200,
            resolution: 0.05,
            rooms: 9,
            door_width: 16,
            window_density: 0.4,
            wall_thickness: 3,
            extra_door_prob: 0.25,
            trajectory_steps: 300,
            speed: 0.08,
            turn_rate: 0.25,
            dt: 0.1,
        }
    }
}

impl SyntheticWorldSpec {
    pub const KEYS: [&'static str; 12] = [
        "width", "height", "resolution", "rooms", "door_width", "window_density", "wall_thickness",
        "extra_door_prob", "trajectory_steps", "speed", "turn_rate", "dt",
    ];

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let d = Self::default();
        let spec = Self {
            width: kv.get_or("width", d.width)?,
            height: kv.get_or("height", d.height)?,
            resolution: kv.get_or("resolution", d.resolution)?,
            rooms: kv.get_or("rooms", d.rooms)?,
            door_width: kv.get_or("door_width", d.door_width)?,
            window_density: kv.get_or("window_density", d.window_density)?,
            wall_thickness: kv.get_or("wall_thickness", d.wall_thickness)?,
            extra_door_prob: kv.get_or("extra_door_prob", d.extra_door_prob)?,
            trajectory_steps: kv.get_or("trajectory_steps", d.trajectory_steps)?,
            speed: kv.get_or("speed", d.speed)?,
            turn_rate: kv.get_or("turn_rate", d.turn_rate)?,
            dt: kv.get_or("dt", d.dt)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.rooms == 0 {
            return bad("rooms must be >= 1".into());
        }
        if self.door_width == 0 || self.wall_thickness == 0 {
            return bad("door_width and wall_thickness must be >= 1".into());
        }
        if !(self.resolution > 0.0 && self.speed > 0.0 && self.turn_rate > 0.0 && self.dt > 0.0) {
            return bad("resolution, speed, turn_rate and dt must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.window_density) || !(0.0..=1.0).contains(&self.extra_door_prob) {
            return bad("window_density and extra_door_prob must lie in [0, 1]".into());
        }
        if self.trajectory_steps < 2 {
            return bad("trajectory_steps must be >= 2".into());
        }
        Ok(())
    }
}

/// Free interior of a room in cells, end-exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Room {
    pub col0: usize,
    pub col1: usize,
    pub row0: usize,
    pub row1: usize,
}

impl Room {
    fn center(&self, res: f64) -> (f64, f64) {
        (
            0.5 * (self.col0 + self.col1) as f64 * res,
            0.5 * (self.row0 + self.row1) as f64 * res,
        )
    }

    pub fn contains(&self, col: usize, row: usize) -> bool {
        (self.col0..self.col1).contains(&col) && (self.row0..self.row1).contains(&row)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WallAxis {
    /// Wall running along y; crossed in x.
    Vertical,
    /// Wall running along x; crossed in y.
    Horizontal,
}

/// An opening between `rooms.0` (on the low side of the wall) and `rooms.1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Door {
    pub rooms: (usize, usize),
    pub axis: WallAxis,
    /// First cell (col or row) of the wall across its thickness.
    pub wall_start: usize,
    /// Opening span along the wall, end-exclusive.
    pub open_lo: usize,
    pub open_hi: usize,
}

impl Door {
    /// Point in front of the door on the side of `room`.
    fn approach(&self, room: usize, res: f64, thickness: usize) -> (f64, f64) {
        let center_line = (self.wall_start as f64 + 0.5 * thickness as f64) * res;
        let along = 0.5 * (self.open_lo + self.open_hi) as f64 * res;
        let offset = 0.5 * thickness as f64 * res + APPROACH;
        let across = if room == self.rooms.0 {
            center_line - offset
        } else {
            center_line + offset
        };
        match self.axis {
            WallAxis::Vertical => (across, along),
            WallAxis::Horizontal => (along, across),
        }
    }

    fn other(&self, room: usize) -> usize {
        if room == self.rooms.0 {
            self.rooms.1
        } else {
            self.rooms.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    pub plan: SemanticFloorplan,
    pub trajectory: Vec<TimedPose>,
    pub rooms: Vec<Room>,
    pub doors: Vec<Door>,
    /// Rooms the trajectory passes through, in order, consecutive repeats
    /// removed.
    pub visited: Vec<usize>,
}

impl SyntheticWorld {
    pub fn room_of(&self, x: f64, y: f64) -> Option<usize> {
        let idx = self.plan.world_to_grid(x, y)?;
        self.rooms.iter().position(|r| r.contains(idx.col, idx.row))
    }
}

struct Raster {
    width: usize,
    cells: Vec<Option<Option<Label>>>,
}

impl Raster {
    /// `None` is free space; `Some(label)` is structure.
    fn set(&mut self, col: usize, row: usize, v: Option<Option<Label>>) {
        self.cells[row * self.width + col] = v;
    }

    fn fill(&mut self, cols: std::ops::Range<usize>, rows: std::ops::Range<usize>, v: Option<Option<Label>>) {
        for row in rows {
            for col in cols.clone() {
                self.set(col, row, v);
            }
        }
    }

    /// Paint a span of a wall across its full thickness.
    fn paint_wall(&mut self, axis: WallAxis, start: usize, thick: usize, span: std::ops::Range<usize>, v: Option<Option<Label>>) {
        match axis {
            WallAxis::Vertical => self.fill(start..start + thick, span, v),
            WallAxis::Horizontal => self.fill(span, start..start + thick, v),
        }
    }
}

/// Recursive binary partition of the interior into `count` rooms whose sides
/// are all at least `min_side` cells.
fn partition(spec: &SyntheticWorldSpec, count: usize, min_side: usize, rng: &mut ChaCha8Rng) -> Option<Vec<Room>> {
    let t = spec.wall_thickness;
    let mut leaves = vec![Room {
        col0: t,
        col1: spec.width.checked_sub(t)?,
        row0: t,
        row1: spec.height.checked_sub(t)?,
    }];
    let need = 2 * min_side + t;
    while leaves.len() < count {
        let (idx, leaf) = leaves
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, r)| r.col1 - r.col0 >= need || r.row1 - r.row0 >= need)
            .max_by_key(|(_, r)| (r.col1 - r.col0) * (r.row1 - r.row0))?;
        let (w, h) = (leaf.col1 - leaf.col0, leaf.row1 - leaf.row0);
        let vertical = match (w >= need, h >= need) {
            (true, false) => true,
            (false, true) => false,
            _ => rng.random::<f64>() < if w >= h { 0.75 } else { 0.25 },
        };
        let (lo, hi) = if vertical { (leaf.col0, leaf.col1) } else { (leaf.row0, leaf.row1) };
        let cut = rng.random_range(lo + min_side..=hi - min_side - t);
        let (a, b) = if vertical {
            (Room { col1: cut, ..leaf }, Room { col0: cut + t, ..leaf })
        } else {
            (Room { row1: cut, ..leaf }, Room { row0: cut + t, ..leaf })
        };
        leaves[idx] = a;
        leaves.push(b);
    }
    Some(leaves)
}

/// Wall spans shared by two rooms that are long enough to hold a door.
fn shared_walls(rooms: &[Room], t: usize, min_span: usize) -> Vec<Door> {
    let mut out = Vec::new();
    for i in 0..rooms.len() {
        for j in 0..rooms.len() {
            let (a, b) = (rooms[i], rooms[j]);
            if a.col1 + t == b.col0 {
                let (lo, hi) = (a.row0.max(b.row0), a.row1.min(b.row1));
                if hi >= lo + min_span {
                    out.push(Door { rooms: (i, j), axis: WallAxis::Vertical, wall_start: a.col1, open_lo: lo, open_hi: hi });
                }
            }
            if a.row1 + t == b.row0 {
                let (lo, hi) = (a.col0.max(b.col0), a.col1.min(b.col1));
                if hi >= lo + min_span {
                    out.push(Door { rooms: (i, j), axis: WallAxis::Horizontal, wall_start: a.row1, open_lo: lo, open_hi: hi });
                }
            }
        }
    }
    out
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Build a connected multi-room world and a ground-truth tour through it.
pub fn generate_world(spec: &SyntheticWorldSpec, seed: u64) -> Result<SyntheticWorld> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = spec.wall_thickness;
    let min_room = spec.door_width + 2 * (DOOR_FRAME + CORNER_MARGIN);
    let min_room_m = 2.0 * (APPROACH + 0.5 * t as f64 * spec.resolution) + 0.2;
    let min_side = min_room.max((min_room_m / spec.resolution).ceil() as usize);
    let unsatisfiable = || {
        Error::UnsatisfiableWorld(format!(
            "{} connected rooms of at least {min_side} cells do not fit in {}x{} cells",
            spec.rooms, spec.width, spec.height
        ))
    };
    // Some partitions leave a room without a wall long enough for a door;
    // draw again until every room can be reached.
    let mut layout = None;
    for _ in 0..64 {
        let rooms = partition(spec, spec.rooms, min_side, &mut rng).ok_or_else(unsatisfiable)?;
        let segments = shared_walls(&rooms, t, min_room);
        let mut parent: Vec<usize> = (0..rooms.len()).collect();
        for seg in &segments {
            let (ra, rb) = (find(&mut parent, seg.rooms.0), find(&mut parent, seg.rooms.1));
            parent[ra] = rb;
        }
        let root = find(&mut parent, 0);
        if (0..rooms.len()).all(|r| find(&mut parent, r) == root) {
            layout = Some((rooms, segments));
            break;
        }
    }
    let (rooms, mut segments) = layout.ok_or_else(unsatisfiable)?;

    let mut raster = Raster {
        width: spec.width,
        cells: vec![Some(Some(Label::Wall)); spec.width * spec.height],
    };
    for r in &rooms {
        raster.fill(r.col0..r.col1, r.row0..r.row1, None);
    }

    segments.shuffle(&mut rng);
    let mut parent: Vec<usize> = (0..rooms.len()).collect();
    let mut chosen: Vec<Door> = Vec::new();
    let mut linked = std::collections::BTreeSet::new();
    for seg in &segments {
        let (ra, rb) = (find(&mut parent, seg.rooms.0), find(&mut parent, seg.rooms.1));
        if ra != rb {
            parent[ra] = rb;
            linked.insert(seg.rooms);
            chosen.push(*seg);
        }
    }
    for seg in &segments {
        if !linked.contains(&seg.rooms) && rng.random::<f64>() < spec.extra_door_prob {
            linked.insert(seg.rooms);
            chosen.push(*seg);
        }
    }

    let mut doors = Vec::with_capacity(chosen.len());
    for seg in chosen {
        let lo = seg.open_lo + CORNER_MARGIN + DOOR_FRAME;
        let Some(hi) = seg.open_hi.checked_sub(CORNER_MARGIN + DOOR_FRAME + spec.door_width).filter(|&hi| hi >= lo) else {
            return Err(Error::UnsatisfiableWorld("a shared wall is too short for a door".into()));
        };
        let start = rng.random_range(lo..=hi);
        let door = Door {
            open_lo: start,
            open_hi: start + spec.door_width,
            ..seg
        };
        raster.paint_wall(door.axis, door.wall_start, t, door.open_lo..door.open_hi, None);
        let frame = Some(Some(Label::Door));
        raster.paint_wall(door.axis, door.wall_start, t, door.open_lo - DOOR_FRAME..door.open_lo, frame);
        raster.paint_wall(door.axis, door.wall_start, t, door.open_hi..door.open_hi + DOOR_FRAME, frame);
        doors.push(door);
    }

    // Windows on exterior room sides; a lone room gets a closed door instead.
    let (right, top) = (spec.width - t, spec.height - t);
    for room in &rooms {
        let sides = [
            (room.col0 == t, WallAxis::Vertical, 0, room.row0..room.row1),
            (room.col1 == right, WallAxis::Vertical, right, room.row0..room.row1),
            (room.row0 == t, WallAxis::Horizontal, 0, room.col0..room.col1),
            (room.row1 == top, WallAxis::Horizontal, top, room.col0..room.col1),
        ];
        for (exterior, axis, start, span) in sides {
            if !exterior {
                continue;
            }
            // One to three panes of uneven length so that rooms rarely look
            // alike or symmetric.
            let len = span.end - span.start;
            let panes = rng.random_range(1..=3usize);
            let slot = len / panes;
            for k in 0..panes {
                let scale = rng.random_range(0.5..1.5);
                let wlen = ((spec.window_density * scale * slot as f64).round() as usize).min(slot.saturating_sub(2));
                if wlen < 2 {
                    continue;
                }
                let from = span.start + k * slot + rng.random_range(1..=slot - wlen - 1);
                raster.paint_wall(axis, start, t, from..from + wlen, Some(Some(Label::Window)));
            }
        }
    }
    if rooms.len() == 1 {
        let r = rooms[0];
        let mid = (r.row0 + r.row1) / 2;
        let lo = mid.saturating_sub(spec.door_width / 2).max(r.row0);
        raster.paint_wall(WallAxis::Vertical, 0, t, lo..(lo + spec.door_width).min(r.row1), Some(Some(Label::Door)));
    }

    let cells = raster
        .cells
        .iter()
        .map(|c| match c {
            None => Cell::FREE,
            Some(None) => Cell::occupied(),
            Some(Some(l)) => Cell::labelled(*l),
        })
        .collect();
    let plan = SemanticFloorplan::new(spec.width, spec.height, spec.resolution, Pose2D::default(), DEFAULT_OCCUPIED_THRESH, cells)?;
    let trajectory = tour(spec, &rooms, &doors, &mut rng);
    let mut world = SyntheticWorld {
        plan,
        trajectory,
        rooms,
        doors,
        visited: Vec::new(),
    };
    for tp in &world.trajectory {
        if let Some(r) = world.room_of(tp.pose.x, tp.pose.y) {
            if world.visited.last() != Some(&r) {
                world.visited.push(r);
            }
        }
    }
    Ok(world)
}

/// Waypoint tour starting at a random room centre and walking through
/// randomly chosen doors, traced with turn-then-drive motion.
fn tour(spec: &SyntheticWorldSpec, rooms: &[Room], doors: &[Door], rng: &mut ChaCha8Rng) -> Vec<TimedPose> {
    let res = spec.resolution;
    let t = spec.wall_thickness;
    let mut room = rng.random_range(0..rooms.len());
    let (x0, y0) = rooms[room].center(res);
    let mut pose = Pose2D::new(x0, y0, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));
    let mut poses = vec![pose];
    let mut came_through: Option<usize> = None;
    let margin = APPROACH + 0.1;
    while poses.len() < spec.trajectory_steps {
        let mut options: Vec<usize> = (0..doors.len())
            .filter(|&d| doors[d].rooms.0 == room || doors[d].rooms.1 == room)
            .collect();
        let waypoints: Vec<(f64, f64)> = if options.is_empty() {
            // Nowhere to go: wander between random interior points.
            let r = rooms[room];
            let pick = |rng: &mut ChaCha8Rng, lo: usize, hi: usize| {
                let (lo, hi) = (lo as f64 * res + margin, hi as f64 * res - margin);
                if hi > lo {
                    rng.random_range(lo..hi)
                } else {
                    0.5 * (lo + hi)
                }
            };
            vec![(pick(rng, r.col0, r.col1), pick(rng, r.row0, r.row1))]
        } else {
            if options.len() > 1 {
                options.retain(|&d| Some(d) != came_through);
            }
            let d = options[rng.random_range(0..options.len())];
            let next = doors[d].other(room);
            let path = vec![
                doors[d].approach(room, res, t),
                doors[d].approach(next, res, t),
                rooms[next].center(res),
            ];
            room = next;
            came_through = Some(d);
            path
        };
        for (wx, wy) in waypoints {
            loop {
                if poses.len() >= spec.trajectory_steps {
                    break;
                }
                let (dx, dy) = (wx - pose.x, wy - pose.y);
                let dist = dx.hypot(dy);
                if dist < 1e-9 {
                    break;
                }
                let err = normalize_angle(dy.atan2(dx) - pose.theta);
                pose = if err.abs() > spec.turn_rate {
                    Pose2D::new(pose.x, pose.y, pose.theta + spec.turn_rate.copysign(err))
                } else {
                    let heading = dy.atan2(dx);
                    let step = spec.speed.min(dist);
                    if step == dist {
                        Pose2D::new(wx, wy, heading)
                    } else {
                        Pose2D::new(pose.x + step * heading.cos(), pose.y + step * heading.sin(), heading)
                    }
                };
                poses.push(pose);
            }
        }
    }
    poses
        .into_iter()
        .enumerate()
        .map(|(k, p)| TimedPose::new(k as f64 * spec.dt, p))
        .collect()
}

/// Sensor and odometry noise for recording a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSpec {
    pub rays: usize,
    pub fov: f64,
    pub max_range: f64,
    pub noise: SensorNoise,
    /// Relative standard deviation of the odometry translation.
    pub odom_trans_noise: f64,
    /// Standard deviation of the heading increment per radian turned plus
    /// per metre driven.
    pub odom_rot_noise: f64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            rays: DEFAULT_RAY_COUNT,
            fov: SIM_FOV,
            max_range: DEFAULT_MAX_RANGE,
            noise: SensorNoise::symmetric(0.03, 0.05, 0.02),
            odom_trans_noise: 0.05,
            odom_rot_noise: 0.05,
        }
    }
}

impl SimulationSpec {
    pub const KEYS: [&'static str; 8] = [
        "rays", "fov", "sim_max_range", "range_sigma", "label_error", "dropout", "odom_trans_noise",
        "odom_rot_noise",
    ];

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let d = Self::default();
        let noise = SensorNoise::symmetric(
            kv.get_or("range_sigma", d.noise.range_sigma)?,
            kv.get_or("label_error", 1.0 - d.noise.label_confusion[0][0])?,
            kv.get_or("dropout", d.noise.dropout)?,
        );
        noise.validate()?;
        Ok(Self {
            rays: kv.get_or("rays", d.rays)?,
            fov: kv.get_or("fov", d.fov)?,
            max_range: kv.get_or("sim_max_range", d.max_range)?,
            noise,
            odom_trans_noise: kv.get_or("odom_trans_noise", d.odom_trans_noise)?,
            odom_rot_noise: kv.get_or("odom_rot_noise", d.odom_rot_noise)?,
        })
    }
}

/// Record noisy odometry and scans along a ground-truth trajectory.
pub fn simulate_run(plan: &SemanticFloorplan, truth: &[TimedPose], sim: &SimulationSpec, seed: u64) -> Result<Dataset> {
    let bearings = bearings_for_camera(sim.fov, sim.rays)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EDA_5EDA);
    let mut scans = Vec::with_capacity(truth.len());
    let mut odometry = Vec::with_capacity(truth.len());
    for (k, tp) in truth.iter().enumerate() {
        let scan_seed: u64 = rng.random();
        let z: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let rel = if k == 0 { Pose2D::default() } else { truth[k - 1].pose.between(&tp.pose) };
        let trans = rel.x.hypot(rel.y);
        let noisy = if k == 0 {
            rel
        } else {
            Pose2D {
                x: rel.x + sim.odom_trans_noise * trans * z[0],
                y: rel.y + sim.odom_trans_noise * trans * z[1],
                theta: rel.theta + sim.odom_rot_noise * (rel.theta.abs() + trans) * z[2],
            }
        };
        odometry.push(OdometryRecord {
            t: tp.t,
            dx: noisy.x,
            dy: noisy.y,
            dtheta: noisy.theta,
        });
        scans.push(simulate_scan(plan, &tp.pose, &bearings, &sim.noise, sim.max_range, scan_seed)?.with_timestamp(tp.t));
    }
    Ok(Dataset {
        scans,
        odometry,
        truth: Some(truth.to_vec()),
    })
}

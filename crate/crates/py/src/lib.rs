//! Python bindings: floorplans, synthetic worlds, the particle filter,
//! trajectory evaluation and experiments.

use std::path::Path;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use sedar_core::dataset::OdometryRecord;
use sedar_core::eval::TimedPose;
use sedar_core::fields::{build_distance_map, Source};
use sedar_core::kv::KeyValues;
use sedar_core::mcl::{self, FilterConfig, FilterState, MapContext, OdometryDelta};
use sedar_core::world::{SimulationSpec, SyntheticWorldSpec};
use sedar_core::{Error, Label, LikelihoodFieldSet, Pose2D, SedarReading, SedarScan, SemanticFloorplan};

type PoseTuple = (f64, f64, f64);
type TimedTuple = (f64, f64, f64, f64);
type ReadingTuple = (f64, Option<f64>, Option<String>);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Divergence => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_label(name: Option<&str>) -> PyResult<Option<Label>> {
    match name {
        None => Ok(None),
        Some(n) => Label::ALL
            .into_iter()
            .find(|l| l.name() == n)
            .map(Some)
            .ok_or_else(|| PyValueError::new_err(format!("unknown label `{n}`"))),
    }
}

fn to_timed(traj: &[TimedTuple]) -> Vec<TimedPose> {
    traj.iter().map(|&(t, x, y, th)| TimedPose::new(t, Pose2D::new(x, y, th))).collect()
}

fn from_timed(traj: &[TimedPose]) -> Vec<TimedTuple> {
    traj.iter().map(|tp| (tp.t, tp.pose.x, tp.pose.y, tp.pose.theta)).collect()
}

fn to_scan(readings: Vec<ReadingTuple>, timestamp: f64) -> PyResult<SedarScan> {
    let readings = readings
        .into_iter()
        .map(|(b, r, l)| Ok(SedarReading::new(b, r, parse_label(l.as_deref())?)))
        .collect::<PyResult<Vec<_>>>()?;
    SedarScan::new(readings, timestamp).map_err(py_err)
}

fn from_scan(scan: &SedarScan) -> Vec<ReadingTuple> {
    scan.readings()
        .iter()
        .map(|r| (r.bearing, r.range(), r.label.map(|l| l.name().to_string())))
        .collect()
}

/// A semantic occupancy grid.
#[pyclass(module = "sedar")]
#[derive(Clone)]
struct Floorplan {
    inner: SemanticFloorplan,
}

#[pymethods]
impl Floorplan {
    #[staticmethod]
    fn load(occupancy: &str, labels: &str, meta: &str) -> PyResult<Self> {
        let inner = sedar_core::floorplan::load_floorplan(Path::new(occupancy), Path::new(labels), Path::new(meta)).map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Write `<stem>_occ.png`, `<stem>_labels.png` and `<stem>.meta`.
    #[pyo3(signature = (dir, stem = "map"))]
    fn save(&self, dir: &str, stem: &str) -> PyResult<()> {
        self.inner.save(Path::new(dir), stem).map(|_| ()).map_err(py_err)
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    #[getter]
    fn resolution(&self) -> f64 {
        self.inner.resolution()
    }

    fn is_occupied(&self, col: usize, row: usize) -> PyResult<bool> {
        if col >= self.inner.width() || row >= self.inner.height() {
            return Err(PyValueError::new_err("cell outside the map"));
        }
        Ok(self.inner.is_occupied(col, row))
    }

    fn label(&self, col: usize, row: usize) -> PyResult<Option<&'static str>> {
        if col >= self.inner.width() || row >= self.inner.height() {
            return Err(PyValueError::new_err("cell outside the map"));
        }
        Ok(self.inner.dominant_label(col, row).map(Label::name))
    }

    fn world_to_grid(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        self.inner.world_to_grid(x, y).map(|g| (g.col, g.row))
    }

    /// Fractions of occupied cells labelled wall, door and window.
    fn label_priors(&self) -> PyResult<(f64, f64, f64)> {
        let p = self.inner.label_priors().map_err(py_err)?;
        Ok((p[0], p[1], p[2]))
    }

    /// Row-major distances in metres to the nearest occupied cell, or to
    /// the nearest cell with the given label.
    #[pyo3(signature = (label = None))]
    fn distance_map(&self, label: Option<&str>) -> PyResult<Vec<f64>> {
        let source = match parse_label(label)? {
            None => Source::Occupancy,
            Some(l) => Source::Label(l),
        };
        let map = build_distance_map(&self.inner, source);
        Ok((0..self.inner.height())
            .flat_map(|row| (0..self.inner.width()).map(move |col| (col, row)))
            .map(|(col, row)| map.get(col, row))
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Floorplan({}x{} cells at {} m)",
            self.inner.width(),
            self.inner.height(),
            self.inner.resolution()
        )
    }
}

/// Generate a world; returns the plan and its ground-truth tour as
/// `(t, x, y, theta)` tuples.
#[pyfunction]
#[pyo3(signature = (seed, rooms = 9, steps = 300))]
fn generate_world(seed: u64, rooms: usize, steps: usize) -> PyResult<(Floorplan, Vec<TimedTuple>)> {
    let spec = SyntheticWorldSpec {
        rooms,
        trajectory_steps: steps,
        ..SyntheticWorldSpec::default()
    };
    let w = sedar_core::world::generate_world(&spec, seed).map_err(py_err)?;
    Ok((Floorplan { inner: w.plan }, from_timed(&w.trajectory)))
}

/// Record a run along `truth`. Returns `(odometry, scans)` where odometry
/// rows are `(t, dx, dy, dtheta)` and each scan is `(t, readings)`.
#[pyfunction]
#[pyo3(signature = (plan, truth, seed = 0, fov = None, rays = None))]
#[allow(clippy::type_complexity)]
fn simulate_run(
    plan: &Floorplan,
    truth: Vec<TimedTuple>,
    seed: u64,
    fov: Option<f64>,
    rays: Option<usize>,
) -> PyResult<(Vec<TimedTuple>, Vec<(f64, Vec<ReadingTuple>)>)> {
    let d = SimulationSpec::default();
    let sim = SimulationSpec {
        fov: fov.unwrap_or(d.fov),
        rays: rays.unwrap_or(d.rays),
        ..d
    };
    let ds = sedar_core::world::simulate_run(&plan.inner, &to_timed(&truth), &sim, seed).map_err(py_err)?;
    let odom = ds.odometry.iter().map(|o: &OdometryRecord| (o.t, o.dx, o.dy, o.dtheta)).collect();
    let scans = ds.scans.iter().map(|s| (s.timestamp, from_scan(s))).collect();
    Ok((odom, scans))
}

/// Particle filter over one floorplan.
#[pyclass(module = "sedar")]
struct Filter {
    plan: SemanticFloorplan,
    fields: LikelihoodFieldSet,
    config: FilterConfig,
    state: FilterState,
}

#[pymethods]
impl Filter {
    /// `config` is filter key-value text; `init` is a pose for a room-level
    /// start, or `None` for a uniform cloud over free space.
    #[new]
    #[pyo3(signature = (plan, config = "", init = None, sigma_xy = 0.5, sigma_theta = 0.5))]
    fn new(plan: &Floorplan, config: &str, init: Option<PoseTuple>, sigma_xy: f64, sigma_theta: f64) -> PyResult<Self> {
        let kv = KeyValues::parse(config, "config").map_err(py_err)?;
        let config = FilterConfig::from_key_values(&kv).map_err(py_err)?;
        let fields = LikelihoodFieldSet::build(&plan.inner, config.sensor.sigma_occ, config.sigma_base).map_err(py_err)?;
        let state = match init {
            None => mcl::init_global(&plan.inner, config.bounds, config.seed).map_err(py_err)?,
            Some((x, y, th)) => mcl::init_room(&Pose2D::new(x, y, th), sigma_xy, sigma_theta, config.bounds, config.seed),
        };
        Ok(Self {
            plan: plan.inner.clone(),
            fields,
            config,
            state,
        })
    }

    /// Apply one odometry increment and scan. Returns
    /// `((x, y, theta), ess, n_particles)`; raises `RuntimeError` when every
    /// particle weight vanished.
    #[pyo3(signature = (odometry, readings, timestamp = 0.0))]
    fn step(&mut self, odometry: PoseTuple, readings: Vec<ReadingTuple>, timestamp: f64) -> PyResult<(PoseTuple, f64, usize)> {
        let scan = to_scan(readings, timestamp)?;
        let odom = OdometryDelta::from_relative(odometry.0, odometry.1, odometry.2);
        let ctx = MapContext::new(&self.plan, &self.fields);
        let out = mcl::step(&mut self.state, &odom, &scan, &ctx, &self.config).map_err(py_err)?;
        let p = out.estimate.pose;
        Ok(((p.x, p.y, p.theta), out.ess, out.n_particles))
    }

    /// `(x, y, theta, weight)` for every particle.
    fn particles(&self) -> Vec<(f64, f64, f64, f64)> {
        self.state
            .particles
            .iter()
            .map(|p| (p.pose.x, p.pose.y, p.pose.theta, p.weight))
            .collect()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.state.converged
    }

    fn __len__(&self) -> usize {
        self.state.len()
    }
}

/// ATE statistics and the per-step error curve as a dict.
#[pyfunction]
#[pyo3(signature = (estimate, truth, max_dt = 0.05, align = false))]
fn evaluate<'py>(py: Python<'py>, estimate: Vec<TimedTuple>, truth: Vec<TimedTuple>, max_dt: f64, align: bool) -> PyResult<Bound<'py, PyDict>> {
    let (report, _) = sedar_core::eval::evaluate(&to_timed(&estimate), &to_timed(&truth), max_dt, align).map_err(py_err)?;
    let d = PyDict::new(py);
    let s = report.stats;
    for (k, v) in [("rmse", s.rmse), ("mean", s.mean), ("median", s.median), ("std", s.std), ("min", s.min), ("max", s.max)] {
        d.set_item(k, v)?;
    }
    d.set_item("per_step_error", report.per_step_error)?;
    d.set_item("dropped", report.dropped)?;
    Ok(d)
}

/// Run an experiment file's contents; relative paths resolve against
/// `base_dir`. Returns the summary JSON.
#[pyfunction]
#[pyo3(signature = (config, base_dir = "."))]
fn run_experiment(py: Python<'_>, config: &str, base_dir: &str) -> PyResult<String> {
    let kv = KeyValues::parse(config, "config").map_err(py_err)?;
    let cfg = sedar_core::experiment::ExperimentConfig::from_key_values(&kv, Path::new(base_dir)).map_err(py_err)?;
    let summary = py.allow_threads(|| sedar_core::experiment::run_experiment(&cfg)).map_err(py_err)?;
    summary.to_json().map_err(py_err)
}

/// Median and minimum milliseconds of one sensor update.
#[pyfunction]
#[pyo3(signature = (mode, particles, rays = 64, repeats = 5, seed = 0))]
fn bench_sensor_update(py: Python<'_>, mode: &str, particles: usize, rays: usize, repeats: usize, seed: u64) -> PyResult<(f64, f64)> {
    let mode = mode.parse().map_err(py_err)?;
    let b = py
        .allow_threads(|| sedar_core::bench::bench_sensor_update(mode, particles, rays, repeats, seed))
        .map_err(py_err)?;
    Ok((b.median_ms, b.min_ms))
}

#[pymodule]
fn sedar(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Floorplan>()?;
    m.add_class::<Filter>()?;
    m.add_function(wrap_pyfunction!(generate_world, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_run, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(bench_sensor_update, m)?)?;
    Ok(())
}

//! Seeded localisation experiments: replay odometry and scans through the
//! filter, score every step against ground truth, and write per-seed error
//! curves, a JSON summary and optional frames.
//!
//! The experiment file uses the key-value format. Recognised keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `occupancy`, `labels`, `meta` | map rasters and metadata |
//! | `dataset` | directory holding `scans.log`, `odometry.csv`, `truth.csv` |
//! | `world_seed` | synthetic world layout seed (default: the run seed) |
//! | `filter` | filter configuration file; filter keys may also appear inline |
//! | `seeds` | `0,1,5` or `0..20` |
//! | `output` | output directory |
//! | `init` | `global` or `room` |
//! | `room_sigma_xy`, `room_sigma_theta` | spread of the room-level prior |
//! | `render`, `frame_stride`, `render_seed` | frame output |
//! | `align`, `max_dt` | trajectory evaluation |
//! | `convergence_radius`, `convergence_window`, `convergence_horizon` | convergence rule |
//! | `max_steps` | truncate every run |
//!
//! Without map files a synthetic world is generated per seed, configured by
//! the world and simulation keys of [`SyntheticWorldSpec`] and
//! [`SimulationSpec`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dataset::{Dataset, DatasetPaths};
use crate::error::{Error, Result};
use crate::eval::{evaluate, AteStats, TimedPose, DEFAULT_MAX_DT};
use crate::fields::LikelihoodFieldSet;
use crate::floorplan::{load_paths, MapPaths, SemanticFloorplan};
use crate::kv::KeyValues;
use crate::mcl::{self, FilterConfig, FilterState, MapContext, Mode};
use crate::render::{render_frame, save_frame, RenderStyle};
use crate::sensor::strip_ranges;
use crate::world::{generate_world, simulate_run, SimulationSpec, SyntheticWorldSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Files {
        map: MapPaths,
        dataset: DatasetPaths,
    },
    Synthetic {
        world: SyntheticWorldSpec,
        sim: SimulationSpec,
        world_seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Init {
    Global,
    Room { sigma_xy: f64, sigma_theta: f64 },
}

/// A run converges at the first step from which `window` consecutive errors
/// stay below `radius`, provided that step is at most `horizon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRule {
    pub radius: f64,
    pub window: usize,
    pub horizon: usize,
}

impl Default for ConvergenceRule {
    fn default() -> Self {
        Self {
            radius: 0.25,
            window: 20,
            horizon: 150,
        }
    }
}

impl ConvergenceRule {
    pub fn first_converged_step(&self, errors: &[f64]) -> Option<usize> {
        let mut run = 0;
        for (i, e) in errors.iter().enumerate() {
            run = if *e < self.radius { run + 1 } else { 0 };
            if run == self.window {
                let start = i + 1 - self.window;
                return (start <= self.horizon).then_some(start);
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: Source,
    pub filter: FilterConfig,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    pub init: Init,
    /// Frame stride; `None` disables rendering.
    pub render_stride: Option<usize>,
    /// Seed whose frames are written; defaults to the first seed.
    pub render_seed: Option<u64>,
    pub align: bool,
    pub max_dt: f64,
    pub convergence: ConvergenceRule,
    pub max_steps: Option<usize>,
}

const EXPERIMENT_KEYS: [&str; 20] = [
    "occupancy", "labels", "meta", "dataset", "world_seed", "filter", "seeds", "output", "init",
    "room_sigma_xy", "room_sigma_theta", "render", "frame_stride", "render_seed", "align", "max_dt",
    "convergence_radius", "convergence_window", "convergence_horizon", "max_steps",
];

/// `0,1,5`, `0..20` or a mix such as `0..3,7`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("cannot parse seed list `{text}`"));
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            seeds.extend(a..b);
        } else {
            seeds.push(part.parse().map_err(|_| bad())?);
        }
    }
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    Ok(seeds)
}

impl ExperimentConfig {
    /// Synthetic-world experiment with default world, simulation and filter.
    pub fn synthetic(seeds: Vec<u64>, output: PathBuf) -> Self {
        Self {
            source: Source::Synthetic {
                world: SyntheticWorldSpec::default(),
                sim: SimulationSpec::default(),
                world_seed: None,
            },
            filter: FilterConfig::default(),
            seeds,
            output,
            init: Init::Global,
            render_stride: None,
            render_seed: None,
            align: false,
            max_dt: DEFAULT_MAX_DT,
            convergence: ConvergenceRule::default(),
            max_steps: None,
        }
    }

    /// Relative paths are resolved against `base`.
    pub fn from_key_values(kv: &KeyValues, base: &Path) -> Result<Self> {
        let known = |k: &str| {
            EXPERIMENT_KEYS.contains(&k)
                || FilterConfig::KEYS.contains(&k)
                || SyntheticWorldSpec::KEYS.contains(&k)
                || SimulationSpec::KEYS.contains(&k)
        };
        if let Some(unknown) = kv.keys().find(|k| !known(k)) {
            return Err(Error::Config(format!("unknown experiment key `{unknown}`")));
        }
        let path = |key: &str| -> Result<Option<PathBuf>> {
            Ok(kv.get::<String>(key)?.map(|p| base.join(p)))
        };
        let mut filter_kv = match path("filter")? {
            Some(p) => KeyValues::read(&p)?,
            None => KeyValues::default(),
        };
        filter_kv.merge(&kv.subset(&FilterConfig::KEYS));
        let filter = FilterConfig::from_key_values(&filter_kv)?;

        let source = match (path("occupancy")?, path("labels")?, path("meta")?, path("dataset")?) {
            (Some(occupancy), Some(labels), Some(meta), Some(dataset)) => Source::Files {
                map: MapPaths { occupancy, labels, meta },
                dataset: DatasetPaths::in_dir(&dataset),
            },
            (None, None, None, None) => Source::Synthetic {
                world: SyntheticWorldSpec::from_key_values(&kv.subset(&SyntheticWorldSpec::KEYS))?,
                sim: SimulationSpec::from_key_values(&kv.subset(&SimulationSpec::KEYS))?,
                world_seed: kv.get("world_seed")?,
            },
            _ => {
                return Err(Error::Config(
                    "give all of occupancy, labels, meta and dataset, or none for a synthetic world".into(),
                ))
            }
        };
        let init = match kv.get_or("init", "global".to_string())?.as_str() {
            "global" => Init::Global,
            "room" => Init::Room {
                sigma_xy: kv.get_or("room_sigma_xy", 0.5)?,
                sigma_theta: kv.get_or("room_sigma_theta", 0.5)?,
            },
            other => return Err(Error::Config(format!("unknown init `{other}`"))),
        };
        let d = ConvergenceRule::default();
        let cfg = Self {
            source,
            filter,
            seeds: parse_seeds(&kv.get_or("seeds", "0".to_string())?)?,
            output: path("output")?.unwrap_or_else(|| base.join("out")),
            init,
            render_stride: if kv.get_or("render", false)? {
                Some(kv.get_or("frame_stride", 10)?)
            } else {
                None
            },
            render_seed: kv.get("render_seed")?,
            align: kv.get_or("align", false)?,
            max_dt: kv.get_or("max_dt", DEFAULT_MAX_DT)?,
            convergence: ConvergenceRule {
                radius: kv.get_or("convergence_radius", d.radius)?,
                window: kv.get_or("convergence_window", d.window)?,
                horizon: kv.get_or("convergence_horizon", d.horizon)?,
            },
            max_steps: kv.get("max_steps")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_key_values(&KeyValues::read(path)?, base)
    }

    pub fn validate(&self) -> Result<()> {
        self.filter.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.render_stride == Some(0) || self.convergence.window == 0 {
            return Err(Error::Config("frame_stride and convergence_window must be >= 1".into()));
        }
        if let Source::Files { map, dataset } = &self.source {
            for p in [&map.occupancy, &map.labels, &map.meta, &dataset.scans, &dataset.odometry] {
                if !p.exists() {
                    return Err(Error::Config(format!("{} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }
}

/// One row of `errors_<seed>.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorRow {
    pub step: usize,
    pub t: f64,
    pub ate_m: f64,
    pub heading_err_rad: f64,
    pub ess: f64,
    pub n_particles: usize,
}

pub const ERROR_CSV_HEADER: &str = "step,t,ate_m,heading_err_rad,ess,n_particles";

pub fn error_csv(rows: &[ErrorRow]) -> String {
    let mut out = format!("{ERROR_CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{},{}", r.step, r.t, r.ate_m, r.heading_err_rad, r.ess, r.n_particles);
    }
    out
}

pub fn parse_error_csv(text: &str) -> Result<Vec<ErrorRow>> {
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let loc = format!("errors csv:{}", n + 1);
        if f.len() != 6 {
            return Err(Error::parse(loc, "expected 6 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::parse(loc.clone(), format!("bad number `{s}`")));
        rows.push(ErrorRow {
            step: num(f[0])? as usize,
            t: num(f[1])?,
            ate_m: num(f[2])?,
            heading_err_rad: num(f[3])?,
            ess: num(f[4])?,
            n_particles: num(f[5])? as usize,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedResult {
    pub seed: u64,
    pub steps: usize,
    pub stats: Option<AteStats>,
    /// First step of a sustained run of errors below the convergence radius.
    pub convergence_step: Option<usize>,
    /// First step whose pose covariance fell below the filter's threshold.
    pub covariance_converged_step: Option<usize>,
    /// Global restarts after the filter diverged.
    pub reinitialisations: usize,
    pub failure: Option<String>,
    #[serde(skip)]
    pub rows: Vec<ErrorRow>,
    #[serde(skip)]
    pub estimates: Vec<TimedPose>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub mode: Mode,
    pub init: Init,
    pub convergence: ConvergenceRule,
    pub seeds: Vec<SeedResult>,
    /// Statistics over every scored step of every seed.
    pub aggregate: Option<AteStats>,
    pub converged_seeds: usize,
    /// Lower median over all seeds, counting unconverged seeds as never;
    /// `None` when that median is "never".
    pub median_convergence_step: Option<usize>,
    /// Lower median of the per-seed RMSE.
    pub median_rmse: Option<f64>,
}

struct Run {
    plan: SemanticFloorplan,
    dataset: Dataset,
}

fn load_run(cfg: &ExperimentConfig, seed: u64, shared: Option<&Run>) -> Result<Run> {
    match (&cfg.source, shared) {
        (Source::Files { .. }, Some(run)) => Ok(Run {
            plan: run.plan.clone(),
            dataset: run.dataset.clone(),
        }),
        (Source::Files { map, dataset }, None) => Ok(Run {
            plan: load_paths(map)?,
            dataset: Dataset::load(dataset)?,
        }),
        (Source::Synthetic { world, sim, world_seed }, _) => {
            let w = generate_world(world, world_seed.unwrap_or(seed))?;
            let dataset = simulate_run(&w.plan, &w.trajectory, sim, seed)?;
            Ok(Run { plan: w.plan, dataset })
        }
    }
}

/// Run the filter for one seed, writing frames when requested.
fn run_seed(cfg: &ExperimentConfig, seed: u64, run: &Run) -> SeedResult {
    let mut result = SeedResult {
        seed,
        steps: 0,
        stats: None,
        convergence_step: None,
        covariance_converged_step: None,
        reinitialisations: 0,
        failure: None,
        rows: Vec::new(),
        estimates: Vec::new(),
    };
    if let Err(e) = filter_seed(cfg, seed, run, &mut result) {
        result.failure = Some(e.to_string());
    }
    result
}

fn filter_seed(cfg: &ExperimentConfig, seed: u64, run: &Run, result: &mut SeedResult) -> Result<()> {
    let truth = run
        .dataset
        .truth
        .as_ref()
        .ok_or_else(|| Error::Config("dataset has no ground truth".into()))?;
    let filter = FilterConfig { seed, ..cfg.filter };
    let fields = LikelihoodFieldSet::build(&run.plan, filter.sensor.sigma_occ, filter.sigma_base)?;
    let ctx = MapContext::new(&run.plan, &fields);
    let mut state: FilterState = match cfg.init {
        Init::Global => mcl::init_global(&run.plan, filter.bounds, seed)?,
        Init::Room { sigma_xy, sigma_theta } => mcl::init_room(&truth[0].pose, sigma_xy, sigma_theta, filter.bounds, seed),
    };
    let render = cfg
        .render_stride
        .filter(|_| cfg.render_seed.unwrap_or(cfg.seeds[0]) == seed);
    let n = cfg.max_steps.map_or(run.dataset.scans.len(), |m| m.min(run.dataset.scans.len()));
    let mut ess = Vec::with_capacity(n);
    let mut counts = Vec::with_capacity(n);
    let mut outcome = Ok(());
    for k in 0..n {
        let odom = run.dataset.odometry[k].delta();
        let raw = &run.dataset.scans[k];
        // Ray mode never sees a range.
        let stripped;
        let scan = if filter.mode == Mode::Ray {
            stripped = strip_ranges(raw);
            &stripped
        } else {
            raw
        };
        let mut attempt = mcl::step(&mut state, &odom, scan, &ctx, &filter);
        if matches!(attempt, Err(Error::Divergence)) {
            // Start over from a uniform cloud and replay this step.
            result.reinitialisations += 1;
            let restart = seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(result.reinitialisations as u64);
            state = mcl::init_global(&run.plan, filter.bounds, restart)?;
            attempt = mcl::step(&mut state, &odom, scan, &ctx, &filter);
        }
        let out = match attempt {
            Ok(out) => out,
            Err(e) => {
                outcome = Err(e);
                break;
            }
        };
        result.estimates.push(TimedPose::new(raw.timestamp, out.estimate.pose));
        ess.push(out.ess);
        counts.push(out.n_particles);
        if state.converged && result.covariance_converged_step.is_none() {
            result.covariance_converged_step = Some(k);
        }
        if render.is_some_and(|stride| k % stride == 0) {
            let img = render_frame(&run.plan, &state.particles, Some(&truth[k].pose), Some(&out.estimate.pose), &RenderStyle::default());
            save_frame(&img, &cfg.output.join("frames").join(format!("frame_{k}.png")))?;
        }
    }
    result.steps = result.estimates.len();
    if !result.estimates.is_empty() {
        let (report, _) = evaluate(&result.estimates, truth, cfg.max_dt, cfg.align)?;
        let ts: Vec<f64> = result.estimates.iter().map(|e| e.t).collect();
        let mut j = 0;
        for (k, t) in ts.iter().enumerate() {
            if j < report.timestamps.len() && report.timestamps[j] == *t {
                result.rows.push(ErrorRow {
                    step: k,
                    t: *t,
                    ate_m: report.per_step_error[j],
                    heading_err_rad: report.heading_error[j],
                    ess: ess[k],
                    n_particles: counts[k],
                });
                j += 1;
            }
        }
        result.convergence_step = cfg.convergence.first_converged_step(&report.per_step_error);
        result.stats = Some(report.stats);
    }
    outcome
}

fn lower_median<T: Copy + PartialOrd>(mut v: Vec<T>) -> Option<T> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("comparable"));
    Some(v[(v.len() - 1) / 2])
}

impl ExperimentSummary {
    pub fn from_results(cfg: &ExperimentConfig, seeds: Vec<SeedResult>) -> Result<Self> {
        let all: Vec<f64> = seeds.iter().flat_map(|s| s.rows.iter().map(|r| r.ate_m)).collect();
        let conv: Vec<usize> = seeds.iter().map(|s| s.convergence_step.unwrap_or(usize::MAX)).collect();
        Ok(Self {
            mode: cfg.filter.mode,
            init: cfg.init,
            convergence: cfg.convergence,
            aggregate: if all.is_empty() { None } else { Some(AteStats::from_errors(&all)?) },
            converged_seeds: seeds.iter().filter(|s| s.convergence_step.is_some()).count(),
            median_convergence_step: lower_median(conv).filter(|&m| m != usize::MAX),
            median_rmse: lower_median(seeds.iter().filter_map(|s| s.stats.map(|st| st.rmse)).collect()),
            seeds,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Run every seed and write `errors_<seed>.csv`, `trajectory_<seed>.csv`,
/// `summary.json` and frames under `cfg.output`. Per-seed failures are
/// recorded in the summary; only I/O problems abort the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e))?;
    let shared = match cfg.source {
        Source::Files { .. } => Some(load_run(cfg, cfg.seeds[0], None)?),
        Source::Synthetic { .. } => None,
    };
    let mut results = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let result = match load_run(cfg, seed, shared.as_ref()) {
            Ok(run) => run_seed(cfg, seed, &run),
            Err(e) => SeedResult {
                seed,
                steps: 0,
                stats: None,
                convergence_step: None,
                covariance_converged_step: None,
                reinitialisations: 0,
                failure: Some(e.to_string()),
                rows: Vec::new(),
                estimates: Vec::new(),
            },
        };
        let write = |name: String, text: String| {
            let p = cfg.output.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        write(format!("errors_{seed}.csv"), error_csv(&result.rows))?;
        write(format!("trajectory_{seed}.csv"), crate::eval::trajectory_csv(&result.estimates))?;
        results.push(result);
    }
    let summary = ExperimentSummary::from_results(cfg, results)?;
    let p = cfg.output.join("summary.json");
    std::fs::write(&p, summary.to_json()?).map_err(|e| Error::io(&p, e))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0..3,7").unwrap(), vec![0, 1, 2, 7]);
        assert_eq!(parse_seeds(" 4 ").unwrap(), vec![4]);
        assert!(parse_seeds("").is_err());
        assert!(parse_seeds("a").is_err());
    }

    #[test]
    fn convergence_rule() {
        let rule = ConvergenceRule { radius: 0.25, window: 3, horizon: 4 };
        assert_eq!(rule.first_converged_step(&[1.0, 0.1, 0.1, 0.3, 0.1, 0.1, 0.1]), Some(4));
        assert_eq!(rule.first_converged_step(&[1.0, 0.1, 0.1]), None);
        let late = [1.0, 1.0, 1.0, 1.0, 1.0, 0.1, 0.1, 0.1];
        assert_eq!(rule.first_converged_step(&late), None);
    }

    #[test]
    fn config_parsing() {
        let kv = KeyValues::parse(
            "seeds: 1..3\ninit: room\nroom_sigma_xy: 0.3\nmode: ray\nghost_factor: 0\nrooms: 8\nrender: true\noutput: res",
            "t",
        )
        .unwrap();
        let cfg = ExperimentConfig::from_key_values(&kv, Path::new("/tmp/base")).unwrap();
        assert_eq!(cfg.seeds, vec![1, 2]);
        assert_eq!(cfg.filter.mode, Mode::Ray);
        assert_eq!(cfg.filter.sensor.ghost_factor, 0.0);
        assert_eq!(cfg.output, PathBuf::from("/tmp/base/res"));
        assert_eq!(cfg.render_stride, Some(10));
        assert!(matches!(cfg.init, Init::Room { sigma_xy, .. } if sigma_xy == 0.3));
        assert!(matches!(cfg.source, Source::Synthetic { world, .. } if world.rooms == 8));
        let bad = KeyValues::parse("sedes: 1", "t").unwrap();
        assert!(ExperimentConfig::from_key_values(&bad, Path::new(".")).is_err());
        let partial = KeyValues::parse("occupancy: a.png", "t").unwrap();
        assert!(ExperimentConfig::from_key_values(&partial, Path::new(".")).is_err());
    }

    #[test]
    fn error_csv_round_trip() {
        let rows = vec![
            ErrorRow { step: 0, t: 0.0, ate_m: 1.0 / 3.0, heading_err_rad: -0.1, ess: 12.5, n_particles: 100 },
            ErrorRow { step: 1, t: 0.1, ate_m: 0.2, heading_err_rad: 0.0, ess: 99.0, n_particles: 90 },
        ];
        let text = error_csv(&rows);
        assert!(text.starts_with(ERROR_CSV_HEADER));
        assert_eq!(parse_error_csv(&text).unwrap(), rows);
    }
}

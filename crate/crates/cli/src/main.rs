//! `sedar`: generate worlds, simulate runs, localise, score and benchmark.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sedar_core::bench::bench_sensor_update;
use sedar_core::dataset::{Dataset, DatasetPaths};
use sedar_core::eval::{evaluate, read_trajectory_csv, write_trajectory_csv, TimedPose, DEFAULT_MAX_DT};
use sedar_core::experiment::{run_experiment, ExperimentConfig};
use sedar_core::fields::LikelihoodFieldSet;
use sedar_core::floorplan::{load_paths, MapPaths, SemanticFloorplan};
use sedar_core::kv::KeyValues;
use sedar_core::mcl::{FilterConfig, Mode};
use sedar_core::render::{render_frame, save_frame, RenderStyle};
use sedar_core::world::{generate_world, simulate_run, SimulationSpec, SyntheticWorldSpec};

#[derive(Parser)]
#[command(name = "sedar", version, about = "Semantic Monte-Carlo localisation on floorplans")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a multi-room floorplan and a ground-truth tour.
    GenWorld(GenWorld),
    /// Record noisy odometry and SeDAR scans along a ground-truth tour.
    Simulate(Simulate),
    /// Run a seeded localisation experiment.
    Localize(Localize),
    /// Score an estimated trajectory against ground truth.
    Evaluate(Evaluate),
    /// Draw a map frame, optionally with poses, and dump distance maps.
    Render(Render),
    /// Time single sensor updates.
    Bench(Bench),
}

/// Map written by `gen-world`: `<dir>/<stem>_occ.png`, `_labels.png`, `.meta`.
#[derive(Args)]
struct MapArgs {
    /// Directory holding the map files.
    #[arg(long)]
    map: PathBuf,
    #[arg(long, default_value = "map")]
    stem: String,
}

impl MapArgs {
    fn paths(&self) -> MapPaths {
        MapPaths {
            occupancy: self.map.join(format!("{}_occ.png", self.stem)),
            labels: self.map.join(format!("{}_labels.png", self.stem)),
            meta: self.map.join(format!("{}.meta", self.stem)),
        }
    }

    fn load(&self) -> Result<SemanticFloorplan> {
        load_paths(&self.paths()).with_context(|| format!("loading map from {}", self.map.display()))
    }
}

#[derive(Args)]
struct GenWorld {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// World parameter override such as `rooms=8`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Also write 16-bit distance-map PNGs.
    #[arg(long)]
    fields: bool,
}

#[derive(Args)]
struct Simulate {
    #[command(flatten)]
    map: MapArgs,
    /// Ground-truth trajectory CSV (`t,x,y,theta`).
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dataset directory to write.
    #[arg(long)]
    out: PathBuf,
    /// Simulation parameter override such as `fov=2.0`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct Localize {
    /// Experiment file; every flag below overrides it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `0,1,5` or `0..20`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
    /// `global` or `room`.
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    render: bool,
    #[arg(long)]
    frame_stride: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Any experiment, filter, world or simulation key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct Evaluate {
    #[arg(long)]
    estimate: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Rigidly align the estimate before scoring.
    #[arg(long)]
    align: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_DT)]
    max_dt: f64,
    /// Directory for `ate.json` and `ate_curve.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Render {
    #[command(flatten)]
    map: MapArgs,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    estimate: Option<PathBuf>,
    /// Trajectory index drawn from `--truth` and `--estimate`.
    #[arg(long, default_value_t = 0)]
    step: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    scale: u32,
    /// Directory for 16-bit distance-map PNGs.
    #[arg(long)]
    fields: Option<PathBuf>,
}

#[derive(Args)]
struct Bench {
    /// Particle counts, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "250,50000")]
    particles: Vec<usize>,
    #[arg(long, default_value_t = 64)]
    rays: usize,
    #[arg(long, value_delimiter = ',', default_value = "combined,ray")]
    modes: Vec<Mode>,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

fn overrides(kv: &mut KeyValues, pairs: &[String]) -> Result<()> {
    for pair in pairs {
        let Some((k, v)) = pair.split_once('=') else {
            bail!("`{pair}` is not KEY=VALUE");
        };
        kv.set(k.trim(), v.trim());
    }
    Ok(())
}

fn gen_world(a: &GenWorld) -> Result<()> {
    let mut kv = KeyValues::default();
    overrides(&mut kv, &a.set)?;
    let spec = SyntheticWorldSpec::from_key_values(&kv)?;
    let world = generate_world(&spec, a.seed)?;
    world.plan.save(&a.out, "map")?;
    write_trajectory_csv(&a.out.join("truth.csv"), &world.trajectory)?;
    let layout = serde_json::json!({
        "seed": a.seed,
        "rooms": world.rooms,
        "doors": world.doors,
        "visited": world.visited,
    });
    let p = a.out.join("world.json");
    std::fs::write(&p, serde_json::to_string_pretty(&layout)? + "\n").with_context(|| p.display().to_string())?;
    if a.fields {
        let f = FilterConfig::default();
        LikelihoodFieldSet::build(&world.plan, f.sensor.sigma_occ, f.sigma_base)?.save_debug(&a.out.join("fields"), "dist")?;
    }
    println!(
        "{} rooms, {} doors, {} poses visiting {} rooms -> {}",
        world.rooms.len(),
        world.doors.len(),
        world.trajectory.len(),
        world.visited.len(),
        a.out.display()
    );
    Ok(())
}

fn simulate(a: &Simulate) -> Result<()> {
    let plan = a.map.load()?;
    let truth = read_trajectory_csv(&a.truth)?;
    let mut kv = KeyValues::default();
    overrides(&mut kv, &a.set)?;
    let sim = SimulationSpec::from_key_values(&kv)?;
    let ds: Dataset = simulate_run(&plan, &truth, &sim, a.seed)?;
    ds.save(&DatasetPaths::in_dir(&a.out))?;
    println!("{} scans of {} readings -> {}", ds.scans.len(), sim.rays, a.out.display());
    Ok(())
}

fn localize(a: &Localize) -> Result<()> {
    let (mut kv, base) = match &a.config {
        Some(p) => (KeyValues::read(p)?, p.parent().unwrap_or(Path::new(".")).to_path_buf()),
        None => (KeyValues::default(), PathBuf::from(".")),
    };
    if let Some(s) = &a.seeds {
        kv.set("seeds", s);
    }
    if let Some(o) = &a.output {
        // Relative to the working directory, not the config file.
        kv.set("output", std::path::absolute(o)?.display());
    }
    if let Some(m) = a.mode {
        kv.set("mode", m);
    }
    if let Some(i) = &a.init {
        kv.set("init", i);
    }
    if a.render {
        kv.set("render", true);
    }
    if let Some(s) = a.frame_stride {
        kv.set("frame_stride", s);
    }
    if let Some(m) = a.max_steps {
        kv.set("max_steps", m);
    }
    overrides(&mut kv, &a.set)?;
    let cfg = ExperimentConfig::from_key_values(&kv, &base)?;
    let summary = run_experiment(&cfg)?;
    for s in &summary.seeds {
        let conv = s.convergence_step.map_or("-".to_string(), |c| c.to_string());
        match (&s.failure, s.stats) {
            (Some(f), _) => println!("seed {:>4}  failed: {f}", s.seed),
            (None, Some(st)) => println!(
                "seed {:>4}  steps {:>4}  rmse {:.3} m  converged at {conv}",
                s.seed, s.steps, st.rmse
            ),
            (None, None) => println!("seed {:>4}  no scored steps", s.seed),
        }
    }
    println!(
        "{} mode: {}/{} seeds converged, median step {}, median rmse {} -> {}",
        summary.mode,
        summary.converged_seeds,
        summary.seeds.len(),
        summary.median_convergence_step.map_or("-".to_string(), |m| m.to_string()),
        summary.median_rmse.map_or("-".to_string(), |r| format!("{r:.3} m")),
        cfg.output.display()
    );
    Ok(())
}

fn evaluate_cmd(a: &Evaluate) -> Result<()> {
    let est = read_trajectory_csv(&a.estimate)?;
    let gt = read_trajectory_csv(&a.truth)?;
    let (report, alignment) = evaluate(&est, &gt, a.max_dt, a.align)?;
    std::fs::create_dir_all(&a.out).with_context(|| a.out.display().to_string())?;
    report.save_json(&a.out.join("ate.json"))?;
    report.save_curve_csv(&a.out.join("ate_curve.csv"))?;
    let s = report.stats;
    println!(
        "{} pairs ({} dropped)  rmse {:.4}  mean {:.4}  median {:.4}  std {:.4}  min {:.4}  max {:.4}",
        report.per_step_error.len(),
        report.dropped,
        s.rmse,
        s.mean,
        s.median,
        s.std,
        s.min,
        s.max
    );
    if alignment.degenerate {
        eprintln!("warning: alignment is degenerate; rotation left at identity");
    }
    Ok(())
}

fn pose_at(path: &Option<PathBuf>, step: usize) -> Result<Option<sedar_core::Pose2D>> {
    let Some(p) = path else { return Ok(None) };
    let traj: Vec<TimedPose> = read_trajectory_csv(p)?;
    match traj.get(step) {
        Some(tp) => Ok(Some(tp.pose)),
        None => bail!("{} has {} poses, no step {step}", p.display(), traj.len()),
    }
}

fn render(a: &Render) -> Result<()> {
    let plan = a.map.load()?;
    let truth = pose_at(&a.truth, a.step)?;
    let estimate = pose_at(&a.estimate, a.step)?;
    let style = RenderStyle {
        scale: a.scale,
        ..RenderStyle::default()
    };
    save_frame(&render_frame(&plan, &[], truth.as_ref(), estimate.as_ref(), &style), &a.out)?;
    if let Some(dir) = &a.fields {
        let f = FilterConfig::default();
        LikelihoodFieldSet::build(&plan, f.sensor.sigma_occ, f.sigma_base)?.save_debug(dir, "dist")?;
    }
    println!("-> {}", a.out.display());
    Ok(())
}

fn bench(a: &Bench) -> Result<()> {
    let mut results = Vec::new();
    for &mode in &a.modes {
        for &n in &a.particles {
            results.push(bench_sensor_update(mode, n, a.rays, a.repeats, a.seed)?);
        }
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&results)?);
        return Ok(());
    }
    println!("{:<9} {:>9} {:>5} {:>12} {:>12}", "mode", "particles", "rays", "median ms", "min ms");
    for r in &results {
        println!("{:<9} {:>9} {:>5} {:>12.3} {:>12.3}", r.mode, r.particles, r.rays, r.median_ms, r.min_ms);
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenWorld(a) => gen_world(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Localize(a) => localize(&a),
        Command::Evaluate(a) => evaluate_cmd(&a),
        Command::Render(a) => render(&a),
        Command::Bench(a) => bench(&a),
    }
}

use std::path::Path;

use sedar_core::dataset::{Dataset, DatasetPaths};
use sedar_core::eval::{evaluate, read_trajectory_csv, write_trajectory_csv};
use sedar_core::experiment::{parse_error_csv, run_experiment, ExperimentConfig, ERROR_CSV_HEADER};
use sedar_core::floorplan::load_paths;
use sedar_core::kv::KeyValues;
use sedar_core::world::{generate_world, simulate_run, SimulationSpec, SyntheticWorldSpec};

fn small_world() -> SyntheticWorldSpec {
    SyntheticWorldSpec {
        rooms: 4,
        trajectory_steps: 60,
        ..SyntheticWorldSpec::default()
    }
}

fn config(text: &str, base: &Path) -> ExperimentConfig {
    ExperimentConfig::from_key_values(&KeyValues::parse(text, "test").unwrap(), base).unwrap()
}

#[test]
fn files_on_disk_reproduce_the_synthetic_run() {
    let dir = tempfile::tempdir().unwrap();
    let world = generate_world(&small_world(), 11).unwrap();
    let map = world.plan.save(dir.path(), "map").unwrap();
    assert_eq!(load_paths(&map).unwrap(), world.plan);

    let ds = simulate_run(&world.plan, &world.trajectory, &SimulationSpec::default(), 11).unwrap();
    let paths = DatasetPaths::in_dir(&dir.path().join("run"));
    ds.save(&paths).unwrap();
    let back = Dataset::load(&paths).unwrap();
    assert_eq!(back.scans.len(), ds.scans.len());
    assert_eq!(back.truth, ds.truth);

    let text = "occupancy: map_occ.png\nlabels: map_labels.png\nmeta: map.meta\ndataset: run\n\
                init: room\nroom_sigma_xy: 0.2\nseeds: 4\noutput: from_files\n";
    let from_files = run_experiment(&config(text, dir.path())).unwrap();
    let s = &from_files.seeds[0];
    assert!(s.failure.is_none(), "{:?}", s.failure);
    assert_eq!(s.steps, 60);
    assert!(s.stats.unwrap().rmse < 0.5, "{:?}", s.stats);

    let csv = std::fs::read_to_string(dir.path().join("from_files/errors_4.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some(ERROR_CSV_HEADER));
    assert_eq!(parse_error_csv(&csv).unwrap().len(), 60);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("from_files/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["mode"], "combined");
    assert_eq!(summary["seeds"][0]["seed"], 4);

    // The written trajectory scores the same as the in-memory one.
    let est = read_trajectory_csv(&dir.path().join("from_files/trajectory_4.csv")).unwrap();
    let (report, _) = evaluate(&est, &world.trajectory, 0.05, false).unwrap();
    assert!((report.stats.rmse - s.stats.unwrap().rmse).abs() < 1e-12);
}

#[test]
fn every_mode_tracks_from_a_room_level_start() {
    let dir = tempfile::tempdir().unwrap();
    for mode in ["range", "combined", "ray"] {
        let text = format!(
            "rooms: 4\ntrajectory_steps: 80\ninit: room\nroom_sigma_xy: 0.2\nroom_sigma_theta: 0.2\n\
             mode: {mode}\nseeds: 0..2\noutput: {mode}\nfov: 2.0\nsigma_base: 0.5\nsigma_occ: 0.5\nscan_exponent: 0.3\n"
        );
        let summary = run_experiment(&config(&text, dir.path())).unwrap();
        for s in &summary.seeds {
            assert!(s.failure.is_none(), "{mode} seed {}: {:?}", s.seed, s.failure);
            assert_eq!(s.steps, 80);
        }
        let rmse = summary.median_rmse.unwrap();
        assert!(rmse < 1.0, "{mode}: median rmse {rmse}");
    }
}

#[test]
fn frames_follow_the_stride() {
    let dir = tempfile::tempdir().unwrap();
    let text = "rooms: 4\ntrajectory_steps: 25\ninit: room\nseeds: 2,3\nrender: true\nframe_stride: 10\nrender_seed: 3\nmin_particles: 50\nmax_particles: 100\n";
    run_experiment(&config(text, dir.path())).unwrap();
    let mut frames: Vec<String> = std::fs::read_dir(dir.path().join("out/frames"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    frames.sort();
    assert_eq!(frames, ["frame_0.png", "frame_10.png", "frame_20.png"]);
}

#[test]
fn truth_written_by_one_run_feeds_the_next() {
    let dir = tempfile::tempdir().unwrap();
    let world = generate_world(&small_world(), 2).unwrap();
    let p = dir.path().join("truth.csv");
    write_trajectory_csv(&p, &world.trajectory).unwrap();
    let back = read_trajectory_csv(&p).unwrap();
    let (report, _) = evaluate(&back, &world.trajectory, 0.05, true).unwrap();
    assert!(report.stats.max < 1e-9);
}

use std::path::Path;
use std::process::Command;

fn sedar(args: &[&str], cwd: &Path) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_sedar"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("run sedar");
    assert!(
        out.status.success(),
        "sedar {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn world_to_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let said = sedar(&["gen-world", "--seed", "5", "--out", "w", "--set", "rooms=4", "--set", "trajectory_steps=60", "--fields"], d);
    assert!(said.starts_with("4 rooms"), "{said}");
    for f in ["map_occ.png", "map_labels.png", "map.meta", "truth.csv", "world.json", "fields/dist_door.png"] {
        assert!(d.join("w").join(f).exists(), "missing {f}");
    }

    sedar(&["simulate", "--map", "w", "--truth", "w/truth.csv", "--out", "run", "--seed", "5"], d);
    std::fs::write(
        d.join("exp.cfg"),
        "occupancy: w/map_occ.png\nlabels: w/map_labels.png\nmeta: w/map.meta\ndataset: run\ninit: room\nroom_sigma_xy: 0.2\n",
    )
    .unwrap();
    let said = sedar(&["localize", "--config", "exp.cfg", "--seeds", "1,2", "--output", "out", "--render", "--frame-stride", "30"], d);
    assert!(said.contains("combined mode"), "{said}");
    for f in ["errors_1.csv", "errors_2.csv", "summary.json", "frames/frame_0.png", "frames/frame_30.png"] {
        assert!(d.join("out").join(f).exists(), "missing {f}");
    }

    sedar(&["evaluate", "--estimate", "out/trajectory_1.csv", "--truth", "w/truth.csv", "--out", "ev", "--align"], d);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("ev/ate.json")).unwrap()).unwrap();
    assert!(report["rmse"].as_f64().unwrap() < 0.5);
    assert!(std::fs::read_to_string(d.join("ev/ate_curve.csv")).unwrap().starts_with("t,ate_m,heading_err_rad\n"));

    sedar(&["render", "--map", "w", "--truth", "w/truth.csv", "--estimate", "out/trajectory_1.csv", "--step", "10", "--out", "f.png"], d);
    assert!(d.join("f.png").exists());
}

#[test]
fn bench_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = sedar(&["bench", "--particles", "20", "--rays", "8", "--repeats", "2", "--json"], dir.path());
    let rows: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert_eq!(rows[0]["particles"], 20);
}

#[test]
fn bad_override_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sedar"))
        .args(["gen-world", "--out", "w", "--set", "rooms"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("KEY=VALUE"));
}

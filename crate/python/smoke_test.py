"""End-to-end check of the Python bindings.

Build and install first:

    pip install maturin
    maturin build --release -m crates/py/Cargo.toml
    pip install target/wheels/sedar-*.whl

then run `python python/smoke_test.py`.
"""

import json
import math
import tempfile

import sedar


def main():
    plan, truth = sedar.generate_world(seed=3, rooms=9, steps=120)
    assert plan.width == 200 and plan.height == 200
    assert abs(plan.resolution - 0.05) < 1e-12
    assert plan.is_occupied(0, 0)
    wall, door, window = plan.label_priors()
    assert abs(wall + door + window - 1.0) < 1e-9

    dist = plan.distance_map("door")
    assert len(dist) == plan.width * plan.height
    assert min(dist) == 0.0

    odometry, scans = sedar.simulate_run(plan, truth, seed=1, fov=2.0)
    assert len(odometry) == len(scans) == len(truth)

    x0, y0, th0 = truth[0][1:]
    filt = sedar.Filter(plan, "mode: combined\nseed: 7", init=(x0, y0, th0), sigma_xy=0.3)
    estimates = []
    for (t, dx, dy, dth), (_, readings) in zip(odometry, scans):
        (x, y, th), ess, n = filt.step((dx, dy, dth), readings, t)
        assert 1.0 <= ess <= n + 1e-9
        estimates.append((t, x, y, th))
    report = sedar.evaluate(estimates, truth)
    print(f"room-level combined run: rmse {report['rmse']:.3f} m over {len(estimates)} steps")
    assert math.isfinite(report["rmse"]) and report["rmse"] < 1.0
    assert len(filt.particles()) == len(filt)

    with tempfile.TemporaryDirectory() as out:
        summary = json.loads(
            sedar.run_experiment(f"seeds: 0..2\nmax_steps: 40\ntrajectory_steps: 40\noutput: {out}")
        )
        assert len(summary["seeds"]) == 2

    median_ms, min_ms = sedar.bench_sensor_update("combined", 250, repeats=3)
    print(f"250 particles x 64 rays: {median_ms:.2f} ms median")
    print("ok")


if __name__ == "__main__":
    main()

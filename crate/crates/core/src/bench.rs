//! Wall-clock timing of a single sensor update on a generated world.

use std::time::Instant;

use serde::Serialize;

use crate::error::Result;
use crate::fields::LikelihoodFieldSet;
use crate::mcl::{self, FilterConfig, MapContext, Mode, ParticleBounds};
use crate::sensor::{bearings_for_camera, simulate_scan, strip_ranges, SensorNoise, DEFAULT_MAX_RANGE};
use crate::world::{generate_world, SyntheticWorldSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensorBench {
    pub mode: Mode,
    pub particles: usize,
    pub rays: usize,
    pub repeats: usize,
    /// Median over the repeats.
    pub median_ms: f64,
    pub min_ms: f64,
}

/// Time the observation step alone: `particles` uniform poses weighted
/// against one `rays`-reading scan taken at the start of the tour.
pub fn bench_sensor_update(mode: Mode, particles: usize, rays: usize, repeats: usize, seed: u64) -> Result<SensorBench> {
    let world = generate_world(&SyntheticWorldSpec::default(), seed)?;
    let filter = FilterConfig {
        mode,
        ..FilterConfig::default()
    };
    let fields = LikelihoodFieldSet::build(&world.plan, filter.sensor.sigma_occ, filter.sigma_base)?;
    let ctx = MapContext::new(&world.plan, &fields);
    let bearings = bearings_for_camera(1.0, rays)?;
    let truth = world.trajectory[0].pose;
    let mut scan = simulate_scan(&world.plan, &truth, &bearings, &SensorNoise::noiseless(), DEFAULT_MAX_RANGE, seed)?;
    if mode == Mode::Ray {
        scan = strip_ranges(&scan);
    }
    let base = mcl::init_global(&world.plan, ParticleBounds::new(particles, particles)?, seed)?;
    let mut times = Vec::with_capacity(repeats.max(1));
    for _ in 0..repeats.max(1) {
        let mut state = base.clone();
        let start = Instant::now();
        match mode {
            Mode::Ray => mcl::sensor_update_ray(&mut state, &scan, &ctx, &filter.sensor),
            Mode::Range | Mode::Combined => mcl::sensor_update_range(&mut state, &scan, &ctx, &filter.sensor)?,
        }
        times.push(start.elapsed().as_secs_f64() * 1e3);
        std::hint::black_box(&state);
    }
    times.sort_by(f64::total_cmp);
    Ok(SensorBench {
        mode,
        particles,
        rays,
        repeats: times.len(),
        median_ms: times[(times.len() - 1) / 2],
        min_ms: times[0],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reports_every_repeat() {
        let b = bench_sensor_update(Mode::Combined, 50, 16, 3, 1).unwrap();
        assert_eq!((b.particles, b.rays, b.repeats), (50, 16, 3));
        assert!(b.min_ms <= b.median_ms && b.min_ms >= 0.0);
    }
}

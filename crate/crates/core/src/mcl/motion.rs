use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{stream, FilterState, MapContext, MotionNoise, OdometryDelta, Stream};
use crate::floorplan::Label;
use crate::geometry::Pose2D;

/// Map-dependent motion prior with the ghost factor.
///
/// Free cells score 1. Occupied cells score `exp(-ghost_factor · d_door)`,
/// where `d_door` is the distance to the nearest door cell, so particles may
/// clip door frames while crossing solid wall far from any door is heavily
/// penalised. `ghost_factor = 0` lets particles pass through walls freely and
/// large values approach the hard thresholded occupancy prior. Off-map poses
/// score 0.
pub fn motion_prior(pose: &Pose2D, ctx: &MapContext<'_>, ghost_factor: f64) -> f64 {
    let Some(idx) = ctx.plan.world_to_grid(pose.x, pose.y) else {
        return 0.0;
    };
    if !ctx.plan.is_occupied(idx.col, idx.row) {
        return 1.0;
    }
    let d_door = ctx.fields.label_map(Label::Door).get(idx.col, idx.row);
    ghost_penalty(ghost_factor, d_door)
}

#[inline]
fn ghost_penalty(ghost_factor: f64, d_door: f64) -> f64 {
    if ghost_factor == 0.0 || d_door == 0.0 {
        1.0
    } else {
        (-ghost_factor * d_door).exp()
    }
}

/// Draw a successor pose from the rotate-translate-rotate odometry model.
pub fn sample_odometry<R: Rng + ?Sized>(pose: &Pose2D, odom: &OdometryDelta, noise: &MotionNoise, rng: &mut R) -> Pose2D {
    let (r1, t, r2) = (odom.rot1, odom.trans, odom.rot2);
    let sd_rot1 = (noise.alpha1 * r1 * r1 + noise.alpha2 * t * t).sqrt();
    let sd_trans = (noise.alpha3 * t * t + noise.alpha4 * (r1 * r1 + r2 * r2)).sqrt();
    let sd_rot2 = (noise.alpha1 * r2 * r2 + noise.alpha2 * t * t).sqrt();
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    let z3: f64 = rng.sample(StandardNormal);
    let rot1 = r1 - sd_rot1 * z1;
    let trans = t - sd_trans * z2;
    let rot2 = r2 - sd_rot2 * z3;
    let heading = pose.theta + rot1;
    Pose2D::new(
        pose.x + trans * heading.cos(),
        pose.y + trans * heading.sin(),
        heading + rot2,
    )
}

/// Propagate every particle through the motion model and fold the map prior
/// into its log-weight. Particles with a zero prior keep a `-∞` log-weight
/// until the next resampling removes them.
pub fn motion_update(
    state: &mut FilterState,
    odom: &OdometryDelta,
    noise: &MotionNoise,
    ctx: &MapContext<'_>,
    ghost_factor: f64,
    seed: u64,
) {
    let step = state.steps;
    state
        .particles
        .par_iter_mut()
        .enumerate()
        .for_each(|(i, p)| {
            let mut rng = stream(seed, Stream::Motion, step, i as u64);
            p.pose = sample_odometry(&p.pose, odom, noise, &mut rng);
            p.log_weight += motion_prior(&p.pose, ctx, ghost_factor).ln();
        });
    // Dead particles stay in the set; divergence is reported by resampling.
    let _ = state.normalize();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::LikelihoodFieldSet;
    use crate::floorplan::{Cell, SemanticFloorplan};
    use crate::mcl::{Particle, ParticleBounds};

    /// 4 m × 2 m at 0.1 m: a wall at column 20 with a door at rows 8..=11.
    fn doorway() -> SemanticFloorplan {
        let (w, h) = (40, 20);
        let mut cells = vec![Cell::FREE; w * h];
        for row in 0..h {
            cells[row * w + 20] = if (8..=11).contains(&row) {
                Cell::labelled(Label::Door)
            } else {
                Cell::labelled(Label::Wall)
            };
        }
        SemanticFloorplan::new(w, h, 0.1, Pose2D::default(), 0.65, cells).unwrap()
    }

    #[test]
    fn prior_values() {
        let plan = doorway();
        let fields = LikelihoodFieldSet::build(&plan, 0.2, 0.1).unwrap();
        let ctx = MapContext::new(&plan, &fields);
        // Free space ignores the ghost factor entirely.
        assert_eq!(motion_prior(&Pose2D::new(0.5, 0.5, 0.0), &ctx, 3.0), 1.0);
        // On a door cell the penalty vanishes.
        assert_eq!(motion_prior(&Pose2D::new(2.05, 0.95, 0.0), &ctx, 7.0), 1.0);
        // Wall cell at row 6 is 0.2 m from the door at row 8.
        let clip = motion_prior(&Pose2D::new(2.05, 0.65, 0.0), &ctx, 3.0);
        assert!((clip - (-0.6f64).exp()).abs() < 1e-12);
        assert!((clip - 0.5488).abs() < 1e-4);
        // Far wall with a harsh factor is essentially dead; zero factor is free.
        assert!(motion_prior(&Pose2D::new(2.05, 0.05, 0.0), &ctx, 1e6) == 0.0);
        assert_eq!(motion_prior(&Pose2D::new(2.05, 0.05, 0.0), &ctx, 0.0), 1.0);
        assert_eq!(motion_prior(&Pose2D::new(-0.1, 0.5, 0.0), &ctx, 3.0), 0.0);
    }

    #[test]
    fn ghost_anchor_values() {
        assert!((ghost_penalty(3.0, 1.0) - 0.0498).abs() < 1e-4);
        assert!((ghost_penalty(7.0, 0.43) - 0.049).abs() < 1e-3);
    }

    #[test]
    fn zero_motion_is_identity() {
        let plan = doorway();
        let fields = LikelihoodFieldSet::build(&plan, 0.2, 0.1).unwrap();
        let ctx = MapContext::new(&plan, &fields);
        let particles: Vec<_> = (0..10)
            .map(|i| Particle::new(Pose2D::new(0.5 + 0.1 * i as f64, 1.0, 0.1 * i as f64), 0.1))
            .collect();
        let mut state = FilterState::new(particles.clone(), ParticleBounds::new(1, 10).unwrap(), 0);
        let before = state.clone();
        motion_update(&mut state, &OdometryDelta::ZERO, &MotionNoise::ZERO, &ctx, 0.0, 5);
        for (a, b) in state.particles.iter().zip(&before.particles) {
            assert_eq!(a.pose, b.pose);
            assert!((a.weight - b.weight).abs() < 1e-15);
        }
    }

    #[test]
    fn driving_into_wall_kills_weight() {
        let plan = doorway();
        let fields = LikelihoodFieldSet::build(&plan, 0.2, 0.1).unwrap();
        let ctx = MapContext::new(&plan, &fields);
        let particles = vec![
            Particle::new(Pose2D::new(1.85, 0.15, 0.0), 0.5),
            Particle::new(Pose2D::new(1.0, 1.0, 0.0), 0.5),
        ];
        let mut state = FilterState::new(particles, ParticleBounds::new(1, 2).unwrap(), 0);
        let odom = OdometryDelta::from_relative(0.2, 0.0, 0.0);
        motion_update(&mut state, &odom, &MotionNoise::ZERO, &ctx, 1e6, 0);
        assert!(plan.is_occupied(20, 1));
        assert_eq!(state.particles[0].weight, 0.0);
        assert!((state.particles[1].weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn door_clipping_factor() {
        let plan = doorway();
        let fields = LikelihoodFieldSet::build(&plan, 0.2, 0.1).unwrap();
        let ctx = MapContext::new(&plan, &fields);
        // One particle clips the frame 0.2 m off the door, one stays free.
        let particles = vec![
            Particle::new(Pose2D::new(1.95, 0.65, 0.0), 0.5),
            Particle::new(Pose2D::new(0.95, 0.65, 0.0), 0.5),
        ];
        let mut state = FilterState::new(particles, ParticleBounds::new(1, 2).unwrap(), 0);
        let odom = OdometryDelta::from_relative(0.1, 0.0, 0.0);
        motion_update(&mut state, &odom, &MotionNoise::ZERO, &ctx, 3.0, 0);
        let ratio = state.particles[0].weight / state.particles[1].weight;
        assert!((ratio - (-0.6f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn noise_spreads_particles_deterministically() {
        let pose = Pose2D::new(0.0, 0.0, 0.0);
        let odom = OdometryDelta::from_relative(0.5, 0.0, 0.2);
        let mut rng = stream(1, Stream::Motion, 0, 0);
        let a = sample_odometry(&pose, &odom, &MotionNoise::default(), &mut rng);
        let mut rng = stream(1, Stream::Motion, 0, 0);
        let b = sample_odometry(&pose, &odom, &MotionNoise::default(), &mut rng);
        assert_eq!(a, b);
        let exact = sample_odometry(&pose, &odom, &MotionNoise::ZERO, &mut rng);
        assert!((exact.x - 0.5).abs() < 1e-12 && (exact.theta - 0.2).abs() < 1e-12);
        assert_ne!(a, exact);
    }
}

//! Semantic Monte-Carlo localisation on human-readable floorplans.
//!
//! A [`floorplan::SemanticFloorplan`] carries occupancy plus wall, door and
//! window labels. [`fields`] turns it into per-label distance maps, and
//! [`mcl`] runs a particle filter that weights poses by labelled range
//! readings or, without ranges, by semantic raycasting.

pub mod bench;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod fields;
pub mod floorplan;
pub mod geometry;
pub mod kv;
pub mod mcl;
pub mod render;
pub mod sensor;
pub mod world;

pub use error::{Error, Result};
pub use fields::LikelihoodFieldSet;
pub use floorplan::{Label, SemanticFloorplan};
pub use geometry::Pose2D;
pub use sensor::{SedarReading, SedarScan};

//! Deterministic 3D point-goal quadrotor navigation.
//!
//! The pipeline cycles perception, planning and control: a waypoint actor
//! (privileged expert or learned policy) proposes a 4-DOF waypoint, which is
//! clipped into the camera cone, turned into a min-snap trajectory in flat
//! outputs, and tracked for a fixed horizon before the next observation.

pub mod error;
pub mod expert;
pub mod fields;
pub mod harness;
pub mod learner;
pub mod perception;
pub mod planner;
pub mod rng;
pub mod vehicle;
pub mod world;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

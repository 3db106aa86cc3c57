//! Terrain-aware kinodynamic modeling and control for off-road driving.
//!
//! The crate bundles five cooperating pieces:
//!
//! - [`se3`] — ZYX Euler kinematics: rotations, rate mappings, first-order
//!   pose integration, and wrench recovery from velocity sequences.
//! - [`terrain`] — procedural heightmaps, bilinear sampling, and the
//!   yaw-aligned vehicle-centric local map crop.
//! - [`sim`] — a 6-DoF vehicle-on-heightmap simulator with spring-damper
//!   suspension, slip-based tires, and a PI speed tracker; doubles as the
//!   training-data oracle and the closed-loop evaluation environment.
//! - [`model`] — the learned kinodynamic model: a convolutional elevation
//!   map encoder feeding a probabilistic ensemble of dynamics networks,
//!   trained by Gaussian negative log-likelihood with in-repo
//!   backpropagation, closed through the explicit kinematic layer.
//! - [`mppi`] — a smooth model predictive path integral controller with
//!   track, speed, slip, rollover, interaction-force, and uncertainty costs.
//!
//! [`harness`] orchestrates the above into experiments: data collection,
//! training, multi-step prediction evaluation, closed-loop episodes, and
//! comparison reports. The `kinodyn` binary exposes each step as a CLI
//! subcommand; the `examples/` directory shows the library API per
//! capability.

mod artifact;
pub mod harness;
pub mod model;
pub mod mppi;
pub mod se3;
pub mod sim;
pub mod terrain;

use serde::{Deserialize, Serialize};

pub use se3::{BodyVelocity, EulerZyx, InertialParams, Pose, VehicleState, Wrench};

/// Control input: front steering angle and desired longitudinal speed.
/// A low-level PI loop inside the plant tracks the desired speed, so the
/// action space stays meaningful for drivetrains without throttle control.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    /// Steering angle δ, rad. Positive steers left.
    pub steer: f64,
    /// Desired longitudinal speed, m/s, non-negative.
    pub v_des: f64,
}

impl ControlInput {
    pub fn new(steer: f64, v_des: f64) -> Self {
        Self { steer, v_des }
    }

    /// Clamps into the box `[-max_steer, max_steer] × [0, max_speed]`.
    pub fn clamped(&self, max_steer: f64, max_speed: f64) -> Self {
        Self {
            steer: self.steer.clamp(-max_steer, max_steer),
            v_des: self.v_des.clamp(0.0, max_speed),
        }
    }

    pub fn to_array(&self) -> [f64; 2] {
        [self.steer, self.v_des]
    }

    pub fn from_array(a: &[f64; 2]) -> Self {
        Self { steer: a[0], v_des: a[1] }
    }
}

/// Derives a child RNG seed from a master seed and a stream tag, so that
/// independent consumers (terrain, noise, members, rollouts) never share a
/// stream. SplitMix64 finalizer.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn control_clamping() {
        let u = ControlInput::new(1.0, -3.0).clamped(0.5, 10.0);
        assert_eq!(u, ControlInput::new(0.5, 0.0));
    }

    #[test]
    fn seed_derivation_differs_per_stream() {
        let a = derive_seed(42, 0);
        let b = derive_seed(42, 1);
        assert_ne!(a, b);
        assert_eq!(a, derive_seed(42, 0));
    }
}

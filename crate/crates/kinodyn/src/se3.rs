//! ZYX Euler-angle kinematics: body/world rotations, angular-rate mappings,
//! first-order pose integration, and wrench recovery from velocity sequences.
//!
//! All attitudes are yaw-pitch-roll (ψ, θ, φ) applied as `Rz(ψ) Ry(θ) Rx(φ)`.
//! The rate mapping from body angular velocity to Euler-angle rates is
//! singular at θ = ±π/2; operations that invert it refuse attitudes inside a
//! small guard band around the singularity instead of regularizing.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Width of the guard band below the θ = ±π/2 singularity (rad).
pub const GIMBAL_GUARD: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    /// Pitch is too close to ±π/2 for the Euler-rate mapping to be inverted.
    #[error("gimbal lock: pitch {pitch:.6} rad is within {GIMBAL_GUARD} rad of ±π/2")]
    GimbalLock { pitch: f64 },
}

/// Wraps an angle into (−π, π]. Values already in range pass through
/// bit-exactly.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -std::f64::consts::PI && a <= std::f64::consts::PI {
        return a;
    }
    let r = a.rem_euclid(std::f64::consts::TAU);
    if r > std::f64::consts::PI {
        r - std::f64::consts::TAU
    } else {
        r
    }
}

/// ZYX Euler angles in radians: yaw ψ about z, pitch θ about y, roll φ about x.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerZyx {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl EulerZyx {
    pub fn new(yaw: f64, pitch: f64, roll: f64) -> Self {
        Self { yaw, pitch, roll }
    }

    /// True when the pitch lies strictly inside the gimbal guard band.
    pub fn pitch_guarded(&self) -> bool {
        self.pitch.abs() < std::f64::consts::FRAC_PI_2 - GIMBAL_GUARD
    }

    /// `(cos ψ, sin ψ, cos θ, sin θ, cos φ, sin φ)` in that order.
    pub fn sin_cos(&self) -> [f64; 6] {
        let (sy, cy) = self.yaw.sin_cos();
        let (sp, cp) = self.pitch.sin_cos();
        let (sr, cr) = self.roll.sin_cos();
        [cy, sy, cp, sp, cr, sr]
    }
}

/// Linear and angular velocity expressed in the body frame at the CoM.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyVelocity {
    /// Linear velocity (v_x, v_y, v_z), m/s.
    pub linear: Vector3<f64>,
    /// Angular velocity (ω_x, ω_y, ω_z), rad/s.
    pub angular: Vector3<f64>,
}

impl BodyVelocity {
    pub fn new(linear: Vector3<f64>, angular: Vector3<f64>) -> Self {
        Self { linear, angular }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_finite(&self) -> bool {
        self.linear.iter().chain(self.angular.iter()).all(|c| c.is_finite())
    }

    /// Flattens to `[v_x, v_y, v_z, ω_x, ω_y, ω_z]`.
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.linear.x,
            self.linear.y,
            self.linear.z,
            self.angular.x,
            self.angular.y,
            self.angular.z,
        ]
    }

    pub fn from_array(a: &[f64; 6]) -> Self {
        Self {
            linear: Vector3::new(a[0], a[1], a[2]),
            angular: Vector3::new(a[3], a[4], a[5]),
        }
    }
}

/// Global position and ZYX attitude.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    /// Position in the fixed frame, m.
    pub position: Vector3<f64>,
    /// Attitude as ZYX Euler angles.
    pub euler: EulerZyx,
}

impl Pose {
    pub fn new(position: Vector3<f64>, euler: EulerZyx) -> Self {
        Self { position, euler }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|c| c.is_finite())
            && self.euler.yaw.is_finite()
            && self.euler.pitch.is_finite()
            && self.euler.roll.is_finite()
    }

    /// Flattens to `[x, y, z, ψ, θ, φ]`.
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.position.x,
            self.position.y,
            self.position.z,
            self.euler.yaw,
            self.euler.pitch,
            self.euler.roll,
        ]
    }

    pub fn from_array(a: &[f64; 6]) -> Self {
        Self {
            position: Vector3::new(a[0], a[1], a[2]),
            euler: EulerZyx::new(a[3], a[4], a[5]),
        }
    }
}

/// Full 12-D proprioceptive state: dynamic block (body velocities) plus
/// kinematic block (global pose).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub velocity: BodyVelocity,
    pub pose: Pose,
}

impl VehicleState {
    pub fn new(velocity: BodyVelocity, pose: Pose) -> Self {
        Self { velocity, pose }
    }

    /// Flattens to `[v, ω, p, e]` (12 values).
    pub fn to_array(&self) -> [f64; 12] {
        let d = self.velocity.to_array();
        let k = self.pose.to_array();
        let mut out = [0.0; 12];
        out[..6].copy_from_slice(&d);
        out[6..].copy_from_slice(&k);
        out
    }

    pub fn from_array(a: &[f64; 12]) -> Self {
        let mut d = [0.0; 6];
        let mut k = [0.0; 6];
        d.copy_from_slice(&a[..6]);
        k.copy_from_slice(&a[6..]);
        Self {
            velocity: BodyVelocity::from_array(&d),
            pose: Pose::from_array(&k),
        }
    }
}

/// Force and moment at the CoM, body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench {
    /// Force (F_x, F_y, F_z), N.
    pub force: Vector3<f64>,
    /// Moment (M_x, M_y, M_z), N·m.
    pub moment: Vector3<f64>,
}

impl Wrench {
    pub fn new(force: Vector3<f64>, moment: Vector3<f64>) -> Self {
        Self { force, moment }
    }

    pub fn zero() -> Self {
        Self::default()
    }
}

/// Mass, rotational inertia, and the CoM-to-front-left-wheel lever arms used
/// to normalize interaction moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InertialParams {
    /// Vehicle mass, kg.
    pub mass: f64,
    /// Body-frame rotational inertia, kg·m², symmetric positive-definite.
    pub inertia: Matrix3<f64>,
    /// Lateral distance from the CoM to the front-left wheel, m.
    pub d_x: f64,
    /// Longitudinal distance from the CoM to the front-left wheel, m.
    pub d_y: f64,
    /// Gravitational acceleration, m/s².
    pub gravity: f64,
}

impl InertialParams {
    /// Checks mass/lever/gravity positivity and that the inertia matrix is
    /// symmetric positive-definite.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.mass > 0.0) {
            return Err(format!("mass must be positive, got {}", self.mass));
        }
        if !(self.d_x > 0.0 && self.d_y > 0.0) {
            return Err(format!("wheel lever arms must be positive, got ({}, {})", self.d_x, self.d_y));
        }
        if !(self.gravity > 0.0) {
            return Err(format!("gravity must be positive, got {}", self.gravity));
        }
        let i = &self.inertia;
        for r in 0..3 {
            for c in (r + 1)..3 {
                if (i[(r, c)] - i[(c, r)]).abs() > 1e-9 * i[(r, r)].abs().max(1.0) {
                    return Err("inertia matrix must be symmetric".into());
                }
            }
        }
        // Sylvester's criterion on the leading principal minors.
        let m1 = i[(0, 0)];
        let m2 = i[(0, 0)] * i[(1, 1)] - i[(0, 1)] * i[(1, 0)];
        let m3 = i.determinant();
        if !(m1 > 0.0 && m2 > 0.0 && m3 > 0.0) {
            return Err("inertia matrix must be positive-definite".into());
        }
        Ok(())
    }
}

/// Skew-symmetric matrix of `v`, so that `skew(v) * a == v × a`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Body-to-world rotation `Rz(ψ) Ry(θ) Rx(φ)`.
pub fn rotation_body_to_world(e: &EulerZyx) -> Matrix3<f64> {
    let [cy, sy, cp, sp, cr, sr] = e.sin_cos();
    Matrix3::new(
        cy * cp,
        cy * sp * sr - sy * cr,
        cy * sp * cr + sy * sr,
        sy * cp,
        sy * sp * sr + cy * cr,
        sy * sp * cr - cy * sr,
        -sp,
        cp * sr,
        cp * cr,
    )
}

/// World-frame displacement of a body-frame velocity held for `dt`:
/// `Δp = R(e) · v · dt`.
pub fn displacement_world(e: &EulerZyx, v: &Vector3<f64>, dt: f64) -> Vector3<f64> {
    debug_assert!(dt > 0.0);
    rotation_body_to_world(e) * v * dt
}

/// Maps Euler-angle rates (ψ̇, θ̇, φ̇) to the body angular velocity, summing
/// each rate vector transformed from its intermediate frame into the body
/// frame.
pub fn euler_rates_to_body_omega(e: &EulerZyx, rates: &Vector3<f64>) -> Vector3<f64> {
    let (sp, cp) = e.pitch.sin_cos();
    let (sr, cr) = e.roll.sin_cos();
    let m = Matrix3::new(-sp, 0.0, 1.0, cp * sr, cr, 0.0, cp * cr, -sr, 0.0);
    m * rates
}

/// Inverse of [`euler_rates_to_body_omega`]: recovers (ψ̇, θ̇, φ̇) from a body
/// angular velocity. Fails inside the gimbal guard band where the mapping
/// loses rank.
pub fn body_omega_to_euler_rates(
    e: &EulerZyx,
    w: &Vector3<f64>,
) -> Result<Vector3<f64>, KinematicsError> {
    if !e.pitch_guarded() {
        return Err(KinematicsError::GimbalLock { pitch: e.pitch });
    }
    let (sp, cp) = e.pitch.sin_cos();
    let (sr, cr) = e.roll.sin_cos();
    let m = Matrix3::new(
        0.0,
        sr / cp,
        cr / cp,
        0.0,
        cr,
        -sr,
        1.0,
        sp * sr / cp,
        sp * cr / cp,
    );
    Ok(m * w)
}

/// One first-order kinematic step: advances the pose by the world-frame
/// displacement and Euler-rate integral of `v_next` over `dt`, wrapping yaw
/// and roll into (−π, π].
pub fn integrate_kinematics(
    pose: &Pose,
    v_next: &BodyVelocity,
    dt: f64,
) -> Result<Pose, KinematicsError> {
    debug_assert!(dt > 0.0);
    let e = &pose.euler;
    let dp = displacement_world(e, &v_next.linear, dt);
    let rates = body_omega_to_euler_rates(e, &v_next.angular)?;
    Ok(Pose {
        position: pose.position + dp,
        euler: EulerZyx {
            yaw: wrap_angle(e.yaw + rates.x * dt),
            pitch: e.pitch + rates.y * dt,
            roll: wrap_angle(e.roll + rates.z * dt),
        },
    })
}

/// Recovers the net body wrench from two consecutive body velocities via the
/// Newton–Euler relations, approximating accelerations by the forward
/// difference over `dt`:
///
/// `f = m ((v' − v)/dt + ω × v)`,
/// `m_b = I (ω' − ω)/dt + ω × (I ω)`.
pub fn wrench_from_motion(
    v_t: &BodyVelocity,
    v_next: &BodyVelocity,
    params: &InertialParams,
    dt: f64,
) -> Wrench {
    debug_assert!(dt > 0.0);
    let dv = (v_next.linear - v_t.linear) / dt;
    let dw = (v_next.angular - v_t.angular) / dt;
    let force = params.mass * (dv + v_t.angular.cross(&v_t.linear));
    let iw = params.inertia * v_t.angular;
    let moment = params.inertia * dw + v_t.angular.cross(&iw);
    Wrench { force, moment }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn zero_angles_give_identity_rotation() {
        let r = rotation_body_to_world(&EulerZyx::default());
        assert_relative_eq!(r, Matrix3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn pure_yaw_rotates_x_to_y() {
        let r = rotation_body_to_world(&EulerZyx::new(FRAC_PI_2, 0.0, 0.0));
        let v = r * Vector3::new(1.0, 0.0, 0.0);
        assert_relative_eq!(v, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-14);
    }

    #[test]
    fn displacement_zero_attitude() {
        let d = displacement_world(&EulerZyx::default(), &Vector3::new(1.0, 0.0, 0.0), 0.1);
        assert_relative_eq!(d, Vector3::new(0.1, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn displacement_pure_yaw() {
        let d = displacement_world(
            &EulerZyx::new(FRAC_PI_2, 0.0, 0.0),
            &Vector3::new(1.0, 0.0, 0.0),
            0.1,
        );
        assert_relative_eq!(d, Vector3::new(0.0, 0.1, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn rate_mapping_at_zero_angles_swaps_yaw_and_roll() {
        let w = euler_rates_to_body_omega(&EulerZyx::default(), &Vector3::new(1.0, 2.0, 3.0));
        assert_relative_eq!(w, Vector3::new(3.0, 2.0, 1.0), epsilon = 1e-15);

        let rates =
            body_omega_to_euler_rates(&EulerZyx::default(), &Vector3::new(1.0, 2.0, 3.0)).unwrap();
        assert_relative_eq!(rates, Vector3::new(3.0, 2.0, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn gimbal_guard_rejects_near_vertical_pitch() {
        let e = EulerZyx::new(0.0, FRAC_PI_2 - 1e-4, 0.0);
        let err = body_omega_to_euler_rates(&e, &Vector3::zeros()).unwrap_err();
        assert!(matches!(err, KinematicsError::GimbalLock { .. }));
        // Just inside the guard is fine.
        let e = EulerZyx::new(0.0, FRAC_PI_2 - 2e-3, 0.0);
        assert!(body_omega_to_euler_rates(&e, &Vector3::zeros()).is_ok());
    }

    #[test]
    fn integrate_zero_velocity_is_identity() {
        let pose = Pose::new(Vector3::new(1.0, 2.0, 3.0), EulerZyx::new(0.4, 0.2, -0.1));
        let next = integrate_kinematics(&pose, &BodyVelocity::zero(), 0.1).unwrap();
        assert_eq!(pose, next);
    }

    #[test]
    fn integrate_straight_line() {
        let pose = Pose::default();
        let v = BodyVelocity::new(Vector3::new(1.0, 0.0, 0.0), Vector3::zeros());
        let next = integrate_kinematics(&pose, &v, 0.1).unwrap();
        assert_relative_eq!(next.position, Vector3::new(0.1, 0.0, 0.0), epsilon = 1e-15);
        assert_eq!(next.euler, EulerZyx::default());
    }

    #[test]
    fn wrench_zero_for_steady_straight_motion() {
        let params = test_params();
        let v = BodyVelocity::new(Vector3::new(5.0, 0.0, 0.0), Vector3::zeros());
        let w = wrench_from_motion(&v, &v, &params, 0.1);
        assert_relative_eq!(w.force, Vector3::zeros(), epsilon = 1e-12);
        assert_relative_eq!(w.moment, Vector3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn wrench_steady_turn_is_centripetal() {
        let params = test_params();
        let (u, r) = (4.0, 0.5);
        let v = BodyVelocity::new(Vector3::new(u, 0.0, 0.0), Vector3::new(0.0, 0.0, r));
        let w = wrench_from_motion(&v, &v, &params, 0.1);
        assert_relative_eq!(
            w.force,
            Vector3::new(0.0, params.mass * u * r, 0.0),
            epsilon = 1e-9
        );
        let iw = params.inertia * v.angular;
        assert_relative_eq!(w.moment, v.angular.cross(&iw), epsilon = 1e-9);
    }

    #[test]
    fn wrench_force_linear_in_mass() {
        let mut p1 = test_params();
        let mut p2 = test_params();
        p1.mass = 1000.0;
        p2.mass = 2000.0;
        let v0 = BodyVelocity::new(Vector3::new(1.0, 2.0, 0.3), Vector3::new(0.1, -0.2, 0.4));
        let v1 = BodyVelocity::new(Vector3::new(1.5, 1.8, 0.1), Vector3::new(0.0, -0.1, 0.5));
        let w1 = wrench_from_motion(&v0, &v1, &p1, 0.1);
        let w2 = wrench_from_motion(&v0, &v1, &p2, 0.1);
        assert_relative_eq!(w2.force, 2.0 * w1.force, epsilon = 1e-9);
    }

    #[test]
    fn wrench_invariant_to_constant_linear_offset_when_not_rotating() {
        let params = test_params();
        let offset = Vector3::new(3.0, -1.0, 0.5);
        let v0 = BodyVelocity::new(Vector3::new(1.0, 0.2, 0.0), Vector3::zeros());
        let v1 = BodyVelocity::new(Vector3::new(1.4, 0.1, -0.2), Vector3::zeros());
        let v0s = BodyVelocity::new(v0.linear + offset, v0.angular);
        let v1s = BodyVelocity::new(v1.linear + offset, v1.angular);
        let w = wrench_from_motion(&v0, &v1, &params, 0.05);
        let ws = wrench_from_motion(&v0s, &v1s, &params, 0.05);
        assert_relative_eq!(w.force, ws.force, epsilon = 1e-9);
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_relative_eq!(wrap_angle(-PI), PI);
        assert_relative_eq!(wrap_angle(3.0 * PI), PI);
        assert_relative_eq!(wrap_angle(0.0), 0.0);
        assert!(wrap_angle(PI + 1e-9) < 0.0);
    }

    #[test]
    fn state_array_round_trip() {
        let s = VehicleState::new(
            BodyVelocity::new(Vector3::new(1.0, 2.0, 3.0), Vector3::new(4.0, 5.0, 6.0)),
            Pose::new(Vector3::new(7.0, 8.0, 9.0), EulerZyx::new(0.1, 0.2, 0.3)),
        );
        assert_eq!(VehicleState::from_array(&s.to_array()), s);
    }

    #[test]
    fn inertial_params_validation() {
        let mut p = test_params();
        assert!(p.validate().is_ok());
        p.mass = -1.0;
        assert!(p.validate().is_err());
        let mut p = test_params();
        p.inertia[(0, 0)] = -5.0;
        assert!(p.validate().is_err());
        let mut p = test_params();
        p.inertia[(0, 1)] = 3.0; // asymmetric
        assert!(p.validate().is_err());
    }

    fn test_params() -> InertialParams {
        InertialParams {
            mass: 1500.0,
            inertia: Matrix3::from_diagonal(&Vector3::new(700.0, 2500.0, 3000.0)),
            d_x: 0.8,
            d_y: 1.4,
            gravity: 9.81,
        }
    }

    fn guarded_euler() -> impl Strategy<Value = EulerZyx> {
        (
            -PI..PI,
            -(FRAC_PI_2 - GIMBAL_GUARD - 1e-6)..(FRAC_PI_2 - GIMBAL_GUARD - 1e-6),
            -PI..PI,
        )
            .prop_map(|(y, p, r)| EulerZyx::new(y, p, r))
    }

    proptest! {
        #[test]
        fn rotation_is_orthonormal(e in guarded_euler()) {
            let r = rotation_body_to_world(&e);
            let rtr = r.transpose() * r;
            for i in 0..3 {
                for j in 0..3 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((rtr[(i, j)] - expect).abs() < 1e-12);
                }
            }
            prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn rate_mappings_are_inverse_pairs(
            e in guarded_euler(),
            rx in -5.0f64..5.0,
            ry in -5.0f64..5.0,
            rz in -5.0f64..5.0,
        ) {
            let rates = Vector3::new(rx, ry, rz);
            let w = euler_rates_to_body_omega(&e, &rates);
            let back = body_omega_to_euler_rates(&e, &w).unwrap();
            prop_assert!((back - rates).norm() < 1e-12 * rates.norm().max(1.0));
        }

        #[test]
        fn displacement_preserves_norm(
            e in guarded_euler(),
            vx in -10.0f64..10.0,
            vy in -10.0f64..10.0,
            vz in -10.0f64..10.0,
        ) {
            let v = Vector3::new(vx, vy, vz);
            let d = displacement_world(&e, &v, 0.1);
            prop_assert!((d.norm() - v.norm() * 0.1).abs() < 1e-12 * v.norm().max(1.0));
        }
    }
}

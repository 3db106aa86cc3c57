//! Ground-truth 6-DoF vehicle-on-heightmap simulator.
//!
//! Four vertically-acting spring-damper suspensions carry the chassis over
//! the sampled terrain; wheels in contact generate linear-with-slip lateral
//! forces under a Coulomb cap, a PI speed tracker produces the longitudinal
//! drive force, and the body integrates semi-implicitly at a millisecond
//! step. Every inner step fills a net-wrench ledger in the body frame, which
//! is exactly consistent with the velocity update and serves as the oracle
//! for wrench recovery from coarse velocity differences.
//!
//! The chassis state hides the per-wheel suspension dynamics from the
//! 12-D proprioceptive state, so a learner that only sees that state faces a
//! genuinely partial observation.

pub mod collect;

use crate::se3::{
    integrate_kinematics, rotation_body_to_world, BodyVelocity, EulerZyx, InertialParams,
    KinematicsError, Pose, VehicleState, Wrench,
};
use crate::terrain::{ElevationGrid, TerrainError};
use crate::ControlInput;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use collect::{collect_dataset, CollectConfig, Dataset, DatasetHeader, ExcitationPolicy, Record};

/// Controller tick period, s.
pub const CONTROL_DT: f64 = 0.1;
/// Inner physics step, s.
pub const INNER_DT: f64 = 1e-3;
/// Episode-ending attitude: |roll| or |pitch| beyond this is a rollover.
pub const ROLLOVER_ANGLE: f64 = 60.0 * std::f64::consts::PI / 180.0;

#[derive(Debug, Error)]
pub enum SimError {
    /// A state component left the reals; the step size or parameters are
    /// pathological.
    #[error("numerical divergence: {0}")]
    NumericalDivergence(String),
    #[error(transparent)]
    Terrain(#[from] TerrainError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Full plant description: inertia plus suspension, tire, and drive limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub inertial: InertialParams,
    /// Suspension attachment points in the body frame, order FL, FR, RL, RR.
    pub wheel_positions: [[f64; 3]; 4],
    /// Spring stiffness per wheel, N/m.
    pub suspension_stiffness: f64,
    /// Damping per wheel, N·s/m.
    pub suspension_damping: f64,
    /// Usable travel before the bump stop engages, m.
    pub suspension_travel: f64,
    /// Unloaded vertical distance from attachment to contact, m.
    pub suspension_rest_length: f64,
    /// Longitudinal tire force limit per wheel, N.
    pub tire_force_limit: f64,
    /// Lateral cornering stiffness per wheel, N/rad.
    pub cornering_stiffness: f64,
    /// Coulomb friction coefficient for the lateral force cap.
    pub friction_mu: f64,
    /// Rolling resistance coefficient (force = coeff · normal load).
    pub rolling_resistance: f64,
    /// Steering limit, rad.
    pub max_steer: f64,
    /// Speed limit for desired-speed commands, m/s.
    pub max_speed: f64,
    /// PI speed-tracker gains (force per m/s and per m).
    pub pi_kp: f64,
    pub pi_ki: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        let (lf, lr, half_track, z_att) = (1.4, 1.4, 0.8, -0.15);
        Self {
            inertial: InertialParams {
                mass: 1500.0,
                inertia: Matrix3::from_diagonal(&Vector3::new(700.0, 2500.0, 3000.0)),
                d_x: half_track,
                d_y: lf,
                gravity: 9.81,
            },
            wheel_positions: [
                [lf, half_track, z_att],
                [lf, -half_track, z_att],
                [-lr, half_track, z_att],
                [-lr, -half_track, z_att],
            ],
            suspension_stiffness: 33_000.0,
            suspension_damping: 4_500.0,
            suspension_travel: 0.24,
            suspension_rest_length: 0.5,
            tire_force_limit: 3_000.0,
            cornering_stiffness: 55_000.0,
            friction_mu: 0.9,
            rolling_resistance: 0.015,
            max_steer: 0.5,
            max_speed: 10.0,
            pi_kp: 2_000.0,
            pi_ki: 200.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), String> {
        self.inertial.validate()?;
        for (name, v) in [
            ("suspension_stiffness", self.suspension_stiffness),
            ("suspension_damping", self.suspension_damping),
            ("suspension_travel", self.suspension_travel),
            ("suspension_rest_length", self.suspension_rest_length),
            ("tire_force_limit", self.tire_force_limit),
            ("cornering_stiffness", self.cornering_stiffness),
            ("friction_mu", self.friction_mu),
            ("max_steer", self.max_steer),
            ("max_speed", self.max_speed),
        ] {
            if !(v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if self.rolling_resistance < 0.0 {
            return Err("rolling_resistance must be non-negative".into());
        }
        let w = &self.wheel_positions;
        if (w[0][0] - w[1][0]).abs() > 1e-9 || (w[2][0] - w[3][0]).abs() > 1e-9 {
            return Err("front and rear wheel pairs must share x positions".into());
        }
        if w[0][0] <= w[2][0] {
            return Err("front wheels must be ahead of rear wheels".into());
        }
        Ok(())
    }

    /// Front-to-rear axle distance, m.
    pub fn wheelbase(&self) -> f64 {
        self.wheel_positions[0][0] - self.wheel_positions[2][0]
    }

    /// CoM-to-farthest-wheel horizontal distance, m.
    pub fn footprint_radius(&self) -> f64 {
        self.wheel_positions
            .iter()
            .map(|w| (w[0] * w[0] + w[1] * w[1]).sqrt())
            .fold(0.0, f64::max)
    }

    /// Static per-wheel suspension compression on level ground, m.
    pub fn static_sag(&self) -> f64 {
        self.inertial.mass * self.inertial.gravity / (4.0 * self.suspension_stiffness)
    }

    /// CoM height above level ground at static equilibrium, m.
    pub fn static_com_height(&self) -> f64 {
        self.suspension_rest_length - self.static_sag() - self.wheel_positions[0][2]
    }

    pub fn params_hash(&self) -> String {
        crate::artifact::sha256_hex(serde_json::to_string(self).unwrap().as_bytes())
    }
}

/// PI speed-tracker state: the integral accumulator, anti-windup clamped so
/// the integral term alone never exceeds the drive clamp.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PiState {
    pub integral: f64,
}

/// Chassis state plus the hidden suspension states and the force ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub state: VehicleState,
    /// Raw suspension compressions (may be negative when airborne or exceed
    /// travel during bump-stop contact), m.
    pub raw_compression: [f64; 4],
    pub in_contact: [bool; 4],
    /// Net body wrench applied during the last inner step (includes gravity).
    pub ledger: Wrench,
    /// Mean net body wrench over the last control tick.
    pub tick_ledger: Wrench,
    pub pi: PiState,
    /// Simulated time, s.
    pub time: f64,
}

impl SimState {
    /// Suspension compressions clamped into `[0, travel]`.
    pub fn compressions(&self, params: &VehicleParams) -> [f64; 4] {
        self.raw_compression.map(|c| c.clamp(0.0, params.suspension_travel))
    }

    pub fn is_rolled_over(&self) -> bool {
        self.state.pose.euler.roll.abs() > ROLLOVER_ANGLE
            || self.state.pose.euler.pitch.abs() > ROLLOVER_ANGLE
    }
}

/// The simulator: immutable parameters plus the evolving [`SimState`].
#[derive(Debug, Clone)]
pub struct Simulator {
    pub params: VehicleParams,
    pub sim: SimState,
    inertia_inv: Matrix3<f64>,
}

impl Simulator {
    /// Places the vehicle at `(x, y)` with the given yaw, level attitude, at
    /// the static-equilibrium height above the terrain under the CoM.
    pub fn spawn(
        params: VehicleParams,
        grid: &ElevationGrid,
        x: f64,
        y: f64,
        yaw: f64,
    ) -> Result<Self, SimError> {
        params.validate().map_err(SimError::NumericalDivergence)?;
        let ground = grid.sample_height(x, y)?;
        let pose = Pose::new(
            Vector3::new(x, y, ground + params.static_com_height()),
            EulerZyx::new(yaw, 0.0, 0.0),
        );
        let state = VehicleState::new(BodyVelocity::zero(), pose);
        let inertia_inv = params
            .inertial
            .inertia
            .try_inverse()
            .ok_or_else(|| SimError::NumericalDivergence("inertia not invertible".into()))?;
        let mut sim = Self {
            params,
            sim: SimState {
                state,
                raw_compression: [0.0; 4],
                in_contact: [false; 4],
                ledger: Wrench::zero(),
                tick_ledger: Wrench::zero(),
                pi: PiState::default(),
                time: 0.0,
            },
            inertia_inv,
        };
        sim.sim.raw_compression = sim.measure_compressions(grid)?;
        Ok(sim)
    }

    fn measure_compressions(&self, grid: &ElevationGrid) -> Result<[f64; 4], SimError> {
        let r = rotation_body_to_world(&self.sim.state.pose.euler);
        let p = self.sim.state.pose.position;
        let mut out = [0.0; 4];
        for (i, w) in self.params.wheel_positions.iter().enumerate() {
            let attach = p + r * Vector3::new(w[0], w[1], w[2]);
            let ground = grid.sample_height(attach.x, attach.y)?;
            out[i] = ground + self.params.suspension_rest_length - attach.z;
        }
        Ok(out)
    }

    /// One semi-implicit Euler step of `dt` seconds under a held control.
    pub fn step(&mut self, u: ControlInput, grid: &ElevationGrid, dt: f64) -> Result<(), SimError> {
        debug_assert!(dt > 0.0 && dt <= 1e-3 + 1e-12);
        let p = &self.params;
        let u = u.clamped(p.max_steer, p.max_speed);
        let mass = p.inertial.mass;
        let gravity = p.inertial.gravity;

        let pose = self.sim.state.pose;
        let vel = self.sim.state.velocity;
        let rot = rotation_body_to_world(&pose.euler);

        let mut force_w = Vector3::new(0.0, 0.0, -mass * gravity);
        let mut torque_w = Vector3::zeros();

        // PI drive force, split evenly over all wheels; shares assigned to
        // airborne wheels are lost. Anti-windup: the integral is clamped to
        // the drive limit and frozen while the output saturates in the same
        // direction as the error.
        let v_err = u.v_des - vel.linear.x;
        let drive_clamp = 4.0 * p.tire_force_limit;
        let integral_limit = drive_clamp / p.pi_ki.max(1e-9);
        let unsat = p.pi_kp * v_err + p.pi_ki * self.sim.pi.integral;
        if unsat.abs() < drive_clamp || unsat.signum() != v_err.signum() {
            self.sim.pi.integral =
                (self.sim.pi.integral + v_err * dt).clamp(-integral_limit, integral_limit);
        }
        let drive_total =
            (p.pi_kp * v_err + p.pi_ki * self.sim.pi.integral).clamp(-drive_clamp, drive_clamp);

        let mut raw_c = [0.0; 4];
        let mut contact = [false; 4];
        for (i, w) in p.wheel_positions.iter().enumerate() {
            let r_body = Vector3::new(w[0], w[1], w[2]);
            let attach = pose.position + rot * r_body;
            let ground = grid.sample_height(attach.x, attach.y)?;
            let c = ground + p.suspension_rest_length - attach.z;
            raw_c[i] = c;
            if c <= 0.0 {
                continue;
            }
            contact[i] = true;

            // Normal force: spring + bump stop + damper, never pulling.
            let c_rate = (c - self.sim.raw_compression[i]) / dt;
            let spring = p.suspension_stiffness * c.min(p.suspension_travel);
            let bump_stop = 40.0 * p.suspension_stiffness * (c - p.suspension_travel).max(0.0);
            let normal = (spring + bump_stop + p.suspension_damping * c_rate).max(0.0);

            // Tire frame: wheel heading in the world horizontal plane.
            let steer = if i < 2 { u.steer } else { 0.0 };
            let heading = pose.euler.yaw + steer;
            let (sh, ch) = heading.sin_cos();
            let dir_long = Vector3::new(ch, sh, 0.0);
            let dir_lat = Vector3::new(-sh, ch, 0.0);

            let v_attach = rot * (vel.linear + vel.angular.cross(&r_body));
            let v_long = v_attach.dot(&dir_long);
            let v_lat = v_attach.dot(&dir_lat);

            // Linear-with-slip lateral force under a Coulomb cap.
            let slip = (v_lat / v_long.abs().max(0.3)).atan();
            let lat_cap = p.friction_mu * mass * gravity / 4.0;
            let f_lat = (-p.cornering_stiffness * slip).clamp(-lat_cap, lat_cap);

            let f_drive = (drive_total / 4.0).clamp(-p.tire_force_limit, p.tire_force_limit);
            let f_roll = -p.rolling_resistance * normal * (v_long / 0.05).clamp(-1.0, 1.0);

            let f = Vector3::new(0.0, 0.0, normal) + dir_long * (f_drive + f_roll) + dir_lat * f_lat;
            let contact_point = Vector3::new(attach.x, attach.y, ground);
            force_w += f;
            torque_w += (contact_point - pose.position).cross(&f);
        }
        self.sim.raw_compression = raw_c;
        self.sim.in_contact = contact;

        // Newton–Euler in the body frame; the ledger is exactly what the
        // velocity update integrates.
        let f_b = rot.transpose() * force_w;
        let m_b = rot.transpose() * torque_w;
        self.sim.ledger = Wrench::new(f_b, m_b);

        let acc = f_b / mass - vel.angular.cross(&vel.linear);
        let ang_acc = self.inertia_inv * (m_b - vel.angular.cross(&(p.inertial.inertia * vel.angular)));
        let v_next = BodyVelocity::new(vel.linear + acc * dt, vel.angular + ang_acc * dt);
        let pose_next = integrate_kinematics(&pose, &v_next, dt)?;

        if !v_next.is_finite() || !pose_next.is_finite() {
            return Err(SimError::NumericalDivergence(format!(
                "non-finite state at t={:.3}",
                self.sim.time
            )));
        }
        self.sim.state = VehicleState::new(v_next, pose_next);
        self.sim.time += dt;
        Ok(())
    }

    /// One controller tick: holds `u` for [`CONTROL_DT`] of inner steps and
    /// records the tick-mean wrench ledger.
    pub fn control_step(&mut self, u: ControlInput, grid: &ElevationGrid) -> Result<(), SimError> {
        let n = (CONTROL_DT / INNER_DT).round() as usize;
        let mut force = Vector3::zeros();
        let mut moment = Vector3::zeros();
        for _ in 0..n {
            self.step(u, grid, INNER_DT)?;
            force += self.sim.ledger.force;
            moment += self.sim.ledger.moment;
        }
        self.sim.tick_ledger = Wrench::new(force / n as f64, moment / n as f64);
        Ok(())
    }

    /// Runs zero-control ticks to let the suspension settle after a spawn.
    pub fn settle(&mut self, grid: &ElevationGrid, seconds: f64) -> Result<(), SimError> {
        let ticks = (seconds / CONTROL_DT).round() as usize;
        for _ in 0..ticks {
            self.control_step(ControlInput::default(), grid)?;
        }
        Ok(())
    }

    pub fn state(&self) -> &VehicleState {
        &self.sim.state
    }
}

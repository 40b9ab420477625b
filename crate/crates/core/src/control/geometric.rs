//! Geometric SE(3) tracking controller.
//!
//! The outer loop turns position/velocity errors into a commanded specific
//! force, whose direction becomes the desired thrust axis `b3`. The desired
//! attitude is composed as a minimal tilt taking `e3` onto `b3` followed by
//! a rotation about `b3` by the yaw angle. The inner loop produces body
//! moments from the `SO(3)` attitude error and the angular-velocity error.
//!
//! Position and velocity feedback use `(p_d - p)` and `(v_d - v)` so that
//! positive gains are stabilizing.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::{VehicleParams, Wrench};
use crate::error::{Error, Result};
use crate::sensor::Measurement;

/// Smallest commanded specific-force norm accepted by [`compute_b3`] [N/kg].
pub const EPS_THRUST: f64 = 1e-6;
/// Margin from the inverted-thrust singularity of the tilt quaternion.
pub const EPS_SINGULAR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySetpoint {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
    /// Third derivative of position, used to extrapolate the attitude
    /// reference for the feed-forward angular velocity.
    pub jerk: Vector3<f64>,
    /// Wrapped to `(-pi, pi]`.
    pub yaw: f64,
    pub yaw_rate: f64,
    /// Rate of the feed-forward thrust direction `(a_d + g e3)/|a_d + g e3|`.
    pub b3_dot: Vector3<f64>,
}

impl TrajectorySetpoint {
    pub fn hover(position: Vector3<f64>) -> Self {
        Self {
            position,
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Gains {
    pub kp: Vector3<f64>,
    pub kv: Vector3<f64>,
    pub kr: Vector3<f64>,
    pub komega: Vector3<f64>,
}

impl Default for Gains {
    fn default() -> Self {
        Self {
            kp: Vector3::new(6.0, 6.0, 8.0),
            kv: Vector3::new(4.0, 4.0, 5.0),
            kr: Vector3::new(2.0, 2.0, 0.4),
            komega: Vector3::new(0.3, 0.3, 0.1),
        }
    }
}

impl Gains {
    pub fn validate(&self) -> Result<()> {
        let all = self.kp.iter().chain(&self.kv).chain(&self.kr).chain(&self.komega);
        if all.into_iter().all(|g| *g > 0.0) {
            Ok(())
        } else {
            Err(Error::Configuration("controller gains must be positive".into()))
        }
    }
}

/// Skew-symmetric matrix to vector.
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

/// Unit thrust axis from a commanded specific force (gravity included).
pub fn compute_b3(accel_cmd: &Vector3<f64>) -> Result<Vector3<f64>> {
    let norm = accel_cmd.norm();
    if !(norm > EPS_THRUST) {
        return Err(Error::DegenerateThrust { norm });
    }
    Ok(accel_cmd / norm)
}

/// Shortest rotation taking `e3` onto `b3`.
pub fn tilt_quaternion(b3: &Vector3<f64>) -> Result<UnitQuaternion<f64>> {
    if b3.z <= -1.0 + EPS_SINGULAR {
        return Err(Error::AttitudeSingularity { b3_z: b3.z });
    }
    let s = (2.0 * (1.0 + b3.z)).sqrt();
    let q = Quaternion::new((1.0 + b3.z) / s, -b3.y / s, b3.x / s, 0.0);
    Ok(UnitQuaternion::from_quaternion(q))
}

pub fn yaw_quaternion(yaw: f64) -> UnitQuaternion<f64> {
    let h = 0.5 * yaw;
    UnitQuaternion::new_unchecked(Quaternion::new(h.cos(), 0.0, 0.0, h.sin()))
}

/// `q_d = q_tilt(b3) * q_yaw(psi)`.
pub fn desired_attitude(b3: &Vector3<f64>, yaw: f64) -> Result<UnitQuaternion<f64>> {
    Ok(tilt_quaternion(b3)? * yaw_quaternion(yaw))
}

/// Yaw recovered by the same tilt/yaw split that [`desired_attitude`] uses.
pub fn yaw_of(q: &UnitQuaternion<f64>) -> Result<f64> {
    let b3 = q * Vector3::z();
    let q_yaw = tilt_quaternion(&b3)?.inverse() * q;
    Ok(wrap_angle(2.0 * q_yaw.k.atan2(q_yaw.w)))
}

/// Commanded specific force `k_p(p_d - p) + k_v(v_d - v) + a_d + g e3`.
pub fn commanded_acceleration(
    position: &Vector3<f64>,
    velocity: &Vector3<f64>,
    setpoint: &TrajectorySetpoint,
    gains: &Gains,
    gravity: f64,
) -> Vector3<f64> {
    gains.kp.component_mul(&(setpoint.position - position))
        + gains.kv.component_mul(&(setpoint.velocity - velocity))
        + setpoint.acceleration
        + Vector3::new(0.0, 0.0, gravity)
}

/// Collective thrust: commanded force projected on the current body axis,
/// clamped to `[0, f_max]`.
pub fn thrust_command(
    state: &Measurement,
    setpoint: &TrajectorySetpoint,
    gains: &Gains,
    params: &VehicleParams,
) -> f64 {
    let a = commanded_acceleration(&state.position, &state.velocity, setpoint, gains, params.gravity);
    let b3 = state.attitude * Vector3::z();
    (params.mass * a.dot(&b3)).clamp(0.0, params.max_thrust())
}

/// Body angular velocity from `[0, Omega] = 2 q^-1 (x) q_dot`.
pub fn desired_omega(q_d: &UnitQuaternion<f64>, q_d_dot: &Quaternion<f64>) -> Vector3<f64> {
    let p = q_d.quaternion().conjugate() * q_d_dot * 2.0;
    p.imag()
}

/// `e_R = 1/2 (R_d^T R - R^T R_d)^vee`.
pub fn attitude_error(r: &Matrix3<f64>, r_d: &Matrix3<f64>) -> Vector3<f64> {
    vee(&(r_d.transpose() * r - r.transpose() * r_d)) * 0.5
}

/// `e_Omega = Omega - R^T R_d Omega_d`.
pub fn angular_velocity_error(
    omega: &Vector3<f64>,
    r: &Matrix3<f64>,
    r_d: &Matrix3<f64>,
    omega_d: &Vector3<f64>,
) -> Vector3<f64> {
    omega - r.transpose() * r_d * omega_d
}

/// `M = -k_R e_R - k_Omega e_Omega + Omega x J Omega`.
pub fn moment_command(
    e_r: &Vector3<f64>,
    e_omega: &Vector3<f64>,
    omega: &Vector3<f64>,
    params: &VehicleParams,
    gains: &Gains,
) -> Vector3<f64> {
    -gains.kr.component_mul(e_r) - gains.komega.component_mul(e_omega) + omega.cross(&(params.inertia * omega))
}

/// Intermediate quantities of one controller evaluation, kept for logging.
#[derive(Clone, Copy, Debug)]
pub struct GeometricOutput {
    pub wrench: Wrench,
    pub accel_cmd: Vector3<f64>,
    pub b3_desired: Vector3<f64>,
    pub attitude_desired: UnitQuaternion<f64>,
    pub omega_desired: Vector3<f64>,
    pub attitude_error: Vector3<f64>,
}

/// Stateful wrapper that remembers the last valid thrust axis and attitude
/// reference so that degenerate commands fall back gracefully.
#[derive(Clone, Debug)]
pub struct GeometricController {
    pub gains: Gains,
    pub params: VehicleParams,
    /// Half-width of the central difference used for `q_d_dot` [s].
    pub diff_step: f64,
    last_b3: Vector3<f64>,
    last_q_d: UnitQuaternion<f64>,
}

impl GeometricController {
    pub fn new(gains: Gains, params: VehicleParams, control_dt: f64) -> Self {
        Self {
            gains,
            params,
            diff_step: control_dt,
            last_b3: Vector3::z(),
            last_q_d: UnitQuaternion::identity(),
        }
    }

    fn reference(&self, accel: &Vector3<f64>, yaw: f64) -> Option<UnitQuaternion<f64>> {
        compute_b3(accel).and_then(|b3| desired_attitude(&b3, yaw)).ok()
    }

    /// Central difference of the attitude reference over one control step,
    /// extrapolating the feed-forward acceleration and yaw with the
    /// setpoint's jerk and yaw rate. Feedback terms are held fixed.
    fn attitude_rate(
        &self,
        accel: &Vector3<f64>,
        setpoint: &TrajectorySetpoint,
        q_d: &UnitQuaternion<f64>,
    ) -> Quaternion<f64> {
        let h = self.diff_step;
        let plus = self.reference(&(accel + setpoint.jerk * h), setpoint.yaw + setpoint.yaw_rate * h);
        let minus = self.reference(&(accel - setpoint.jerk * h), setpoint.yaw - setpoint.yaw_rate * h);
        match (plus, minus) {
            (Some(p), Some(m)) => {
                let align = |q: UnitQuaternion<f64>| {
                    let q = q.into_inner();
                    if q.dot(q_d.quaternion()) < 0.0 {
                        -q
                    } else {
                        q
                    }
                };
                (align(p) - align(m)) / (2.0 * h)
            }
            _ => Quaternion::new(0.0, 0.0, 0.0, 0.0),
        }
    }

    pub fn compute(&mut self, meas: &Measurement, setpoint: &TrajectorySetpoint) -> GeometricOutput {
        let accel = commanded_acceleration(
            &meas.position,
            &meas.velocity,
            setpoint,
            &self.gains,
            self.params.gravity,
        );
        let b3_d = match compute_b3(&accel) {
            Ok(b3) => b3,
            Err(_) => self.last_b3,
        };
        let q_d = match desired_attitude(&b3_d, setpoint.yaw) {
            Ok(q) => q,
            Err(_) => self.last_q_d,
        };
        self.last_b3 = b3_d;
        self.last_q_d = q_d;

        let q_d_dot = self.attitude_rate(&accel, setpoint, &q_d);
        let omega_d = desired_omega(&q_d, &q_d_dot);

        let r = meas.rotation();
        let r_d = q_d.to_rotation_matrix().into_inner();
        let e_r = attitude_error(&r, &r_d);
        let e_omega = angular_velocity_error(&meas.angular_velocity, &r, &r_d, &omega_d);
        let moment = moment_command(&e_r, &e_omega, &meas.angular_velocity, &self.params, &self.gains);
        let thrust = thrust_command(meas, setpoint, &self.gains, &self.params);

        GeometricOutput {
            wrench: Wrench::new(thrust, moment),
            accel_cmd: accel,
            b3_desired: b3_d,
            attitude_desired: q_d,
            omega_desired: omega_d,
            attitude_error: e_r,
        }
    }
}

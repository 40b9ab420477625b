//! Rigid-body quadrotor plant.
//!
//! World frame is ENU with `e3` pointing up; body `b3` is the thrust axis.
//! Gravity enters the translational dynamics as `-g e3` and the collective
//! thrust acts along `+b3`, so hovering needs `f = m g`.
//!
//! Rotor numbering follows the allocation rows used throughout the crate:
//!
//! | rotor | roll row sign | pitch row sign | spin |
//! |-------|---------------|----------------|------|
//! | 1     | +             | -              | +1   |
//! | 2     | +             | +              | -1   |
//! | 3     | -             | +              | +1   |
//! | 4     | -             | -              | -1   |
//!
//! i.e. `M1 = d_x (T1 + T2 - T3 - T4)` and `M2 = d_y (-T1 + T2 + T3 - T4)`.
//! Physically rotor `i` sits at `(-pitch_i * d_y, roll_i * d_x)` in the body
//! plane, which makes rotors 1 and 3 (and 2 and 4) diagonal pairs.

use nalgebra::{Matrix3, Matrix4, Quaternion, UnitQuaternion, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_ROTORS: usize = 4;

/// Sign of each rotor's thrust in the roll-moment row.
pub const ROLL_SIGNS: [f64; NUM_ROTORS] = [1.0, 1.0, -1.0, -1.0];
/// Sign of each rotor's thrust in the pitch-moment row.
pub const PITCH_SIGNS: [f64; NUM_ROTORS] = [-1.0, 1.0, 1.0, -1.0];

/// Thrust coefficient scales with `r^4`, torque coefficient with `r^5`.
const TORQUE_EXPONENT: f64 = 5.0 / 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidBodyState {
    /// World-frame position [m].
    pub position: Vector3<f64>,
    /// World-frame velocity [m/s].
    pub velocity: Vector3<f64>,
    /// Body to world rotation.
    pub attitude: UnitQuaternion<f64>,
    /// Body-frame angular velocity [rad/s].
    pub angular_velocity: Vector3<f64>,
}

impl RigidBodyState {
    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            attitude: UnitQuaternion::identity(),
            angular_velocity: Vector3::zeros(),
        }
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.attitude.to_rotation_matrix().into_inner()
    }

    /// Current thrust axis expressed in the world frame.
    pub fn body_z(&self) -> Vector3<f64> {
        self.attitude * Vector3::z()
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|x| x.is_finite())
            && self.velocity.iter().all(|x| x.is_finite())
            && self.attitude.coords.iter().all(|x| x.is_finite())
            && self.angular_velocity.iter().all(|x| x.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    /// [kg]
    pub mass: f64,
    /// Body inertia [kg m^2].
    pub inertia: Matrix3<f64>,
    /// Gravity magnitude [m/s^2].
    pub gravity: f64,
    /// Moment arm used in the roll row [m].
    pub arm_x: f64,
    /// Moment arm used in the pitch row [m].
    pub arm_y: f64,
    /// Nominal thrust coefficient [N/(rad/s)^2].
    pub kf_model: f64,
    /// Nominal drag-torque coefficient [N m/(rad/s)^2].
    pub km_model: f64,
    /// Per-rotor speed limit [rad/s].
    pub omega_max: f64,
    /// Sign of each rotor's reaction torque about `b3`.
    pub spin_dirs: [f64; NUM_ROTORS],
    /// Aerodynamic yaw damping of the spinning airframe [N m s/rad]. Only
    /// the plant uses it; the controllers never model it.
    pub yaw_damping: f64,
}

impl Default for VehicleParams {
    /// 0.7 kg X-frame quadrotor with a thrust-to-weight ratio of about 3.
    fn default() -> Self {
        Self {
            mass: 0.7,
            inertia: Matrix3::from_diagonal(&Vector3::new(3.0e-3, 3.0e-3, 5.5e-3)),
            gravity: 9.81,
            arm_x: 0.08,
            arm_y: 0.08,
            kf_model: 6.0e-6,
            km_model: 1.0e-7,
            omega_max: 930.0,
            spin_dirs: [1.0, -1.0, 1.0, -1.0],
            yaw_damping: 6.5e-3,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Configuration(msg.to_string()));
        if !(self.mass > 0.0) {
            return bad("mass must be positive");
        }
        if !(self.gravity > 0.0) {
            return bad("gravity must be positive");
        }
        if !(self.arm_x > 0.0 && self.arm_y > 0.0) {
            return bad("rotor arms must be positive");
        }
        if !(self.kf_model > 0.0 && self.km_model > 0.0) {
            return bad("rotor coefficients must be positive");
        }
        if self.yaw_damping < 0.0 {
            return bad("yaw damping must be non-negative");
        }
        if self.spin_dirs.iter().any(|s| s.abs() != 1.0) {
            return bad("spin directions must be +1 or -1");
        }
        let j = &self.inertia;
        if (j - j.transpose()).abs().max() > 1e-12 {
            return bad("inertia must be symmetric");
        }
        if j.cholesky().is_none() {
            return bad("inertia must be positive definite");
        }
        if self.thrust_to_weight() < 2.5 {
            return Err(Error::Configuration(format!(
                "thrust-to-weight {:.2} below 2.5",
                self.thrust_to_weight()
            )));
        }
        Ok(())
    }

    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }

    pub fn max_thrust(&self) -> f64 {
        NUM_ROTORS as f64 * self.kf_model * self.omega_max * self.omega_max
    }

    pub fn thrust_to_weight(&self) -> f64 {
        self.max_thrust() / self.weight()
    }

    /// Rotor speed that makes the undamaged vehicle hover.
    pub fn hover_speed(&self) -> f64 {
        (self.weight() / (NUM_ROTORS as f64 * self.kf_model)).sqrt()
    }

    pub fn inertia_inverse(&self) -> Matrix3<f64> {
        self.inertia.try_inverse().expect("inertia validated positive definite")
    }

    /// Map from squared rotor speeds to `[f, M1, M2, M3]` for the given
    /// per-rotor thrust and torque coefficients.
    pub fn mixing_matrix(&self, kf: &[f64; NUM_ROTORS], km: &[f64; NUM_ROTORS]) -> Matrix4<f64> {
        let mut b = Matrix4::zeros();
        for i in 0..NUM_ROTORS {
            b[(0, i)] = kf[i];
            b[(1, i)] = self.arm_x * ROLL_SIGNS[i] * kf[i];
            b[(2, i)] = self.arm_y * PITCH_SIGNS[i] * kf[i];
            b[(3, i)] = self.spin_dirs[i] * km[i];
        }
        b
    }

    /// Mixing matrix built from the controller's nominal coefficients.
    pub fn nominal_mixing_matrix(&self) -> Matrix4<f64> {
        self.mixing_matrix(&[self.kf_model; NUM_ROTORS], &[self.km_model; NUM_ROTORS])
    }
}

/// Torque-coefficient ratio implied by a thrust-coefficient ratio when the
/// loss comes from a shorter propeller (`k_f ~ r^4`, `k_m ~ r^5`).
pub fn derive_km_ratio(kf_ratio: f64) -> Result<f64> {
    if !(kf_ratio > 0.0 && kf_ratio <= 1.0) {
        return Err(Error::Domain(format!("kf_ratio must lie in (0, 1], got {kf_ratio}")));
    }
    Ok(kf_ratio.powf(TORQUE_EXPONENT))
}

/// Ground-truth propeller condition of the plant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DamageProfile {
    kf_ratio: [f64; NUM_ROTORS],
    km_ratio: [f64; NUM_ROTORS],
}

impl Default for DamageProfile {
    fn default() -> Self {
        Self::undamaged()
    }
}

impl DamageProfile {
    pub fn undamaged() -> Self {
        Self {
            kf_ratio: [1.0; NUM_ROTORS],
            km_ratio: [1.0; NUM_ROTORS],
        }
    }

    pub fn from_kf_ratios(kf_ratio: [f64; NUM_ROTORS]) -> Result<Self> {
        let mut km_ratio = [0.0; NUM_ROTORS];
        for (km, &kf) in km_ratio.iter_mut().zip(&kf_ratio) {
            *km = derive_km_ratio(kf)?;
        }
        Ok(Self { kf_ratio, km_ratio })
    }

    /// Replace one rotor's thrust ratio (0-based index).
    pub fn with_rotor(mut self, rotor: usize, kf_ratio: f64) -> Result<Self> {
        if rotor >= NUM_ROTORS {
            return Err(Error::Domain(format!("rotor index {rotor} out of range")));
        }
        self.km_ratio[rotor] = derive_km_ratio(kf_ratio)?;
        self.kf_ratio[rotor] = kf_ratio;
        Ok(self)
    }

    pub fn kf_ratio(&self) -> &[f64; NUM_ROTORS] {
        &self.kf_ratio
    }

    pub fn km_ratio(&self) -> &[f64; NUM_ROTORS] {
        &self.km_ratio
    }

    /// True mismatch index `1 - k_real / k_model` per rotor.
    pub fn mismatch(&self) -> [f64; NUM_ROTORS] {
        self.kf_ratio.map(|r| 1.0 - r)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MotorSpeeds(pub [f64; NUM_ROTORS]);

impl MotorSpeeds {
    pub fn uniform(omega: f64) -> Self {
        Self([omega; NUM_ROTORS])
    }

    /// Clamp every rotor into `[0, omega_max]`.
    pub fn clamped(omega: [f64; NUM_ROTORS], omega_max: f64) -> Self {
        Self(omega.map(|w| w.clamp(0.0, omega_max)))
    }

    pub fn squared(&self) -> Vector4<f64> {
        Vector4::from_iterator(self.0.iter().map(|w| w * w))
    }
}

impl std::ops::Index<usize> for MotorSpeeds {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Collective thrust along `b3` plus body moment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Wrench {
    pub thrust: f64,
    pub moment: Vector3<f64>,
}

impl Wrench {
    pub fn new(thrust: f64, moment: Vector3<f64>) -> Self {
        Self { thrust, moment }
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.thrust, self.moment.x, self.moment.y, self.moment.z)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], Vector3::new(v[1], v[2], v[3]))
    }

    pub fn is_finite(&self) -> bool {
        self.thrust.is_finite() && self.moment.iter().all(|x| x.is_finite())
    }
}

impl std::ops::Add for Wrench {
    type Output = Wrench;
    fn add(self, rhs: Wrench) -> Wrench {
        Wrench::new(self.thrust + rhs.thrust, self.moment + rhs.moment)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExternalDisturbance {
    pub force_world: Vector3<f64>,
    pub moment_body: Vector3<f64>,
}

impl ExternalDisturbance {
    pub const NONE: Self = Self {
        force_world: Vector3::new(0.0, 0.0, 0.0),
        moment_body: Vector3::new(0.0, 0.0, 0.0),
    };
}

impl std::ops::Add for ExternalDisturbance {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            force_world: self.force_world + rhs.force_world,
            moment_body: self.moment_body + rhs.moment_body,
        }
    }
}

/// Wrench actually produced by the (possibly damaged) rotors.
pub fn true_wrench(speeds: &MotorSpeeds, params: &VehicleParams, damage: &DamageProfile) -> Wrench {
    let kf = damage.kf_ratio().map(|r| r * params.kf_model);
    let km = damage.km_ratio().map(|r| r * params.km_model);
    Wrench::from_vector(&(params.mixing_matrix(&kf, &km) * speeds.squared()))
}

#[derive(Clone, Copy)]
struct Derivative {
    velocity: Vector3<f64>,
    acceleration: Vector3<f64>,
    attitude_rate: Quaternion<f64>,
    angular_acceleration: Vector3<f64>,
}

fn derivative(
    state: &RigidBodyState,
    wrench: &Wrench,
    params: &VehicleParams,
    j_inv: &Matrix3<f64>,
    disturbance: &ExternalDisturbance,
) -> Derivative {
    let thrust_world = state.attitude * Vector3::new(0.0, 0.0, wrench.thrust);
    let acceleration = (thrust_world + disturbance.force_world) / params.mass - Vector3::new(0.0, 0.0, params.gravity);

    let omega = state.angular_velocity;
    let omega_quat = Quaternion::from_parts(0.0, omega);
    let attitude_rate = state.attitude.quaternion() * omega_quat * 0.5;

    let yaw_drag = Vector3::new(0.0, 0.0, -params.yaw_damping * omega.z);
    let gyroscopic = omega.cross(&(params.inertia * omega));
    let angular_acceleration = j_inv * (wrench.moment + disturbance.moment_body + yaw_drag - gyroscopic);

    Derivative {
        velocity: state.velocity,
        acceleration,
        attitude_rate,
        angular_acceleration,
    }
}

fn advance(state: &RigidBodyState, d: &Derivative, h: f64) -> RigidBodyState {
    // Intermediate RK stages leave the quaternion unnormalized on purpose;
    // only the final combination is projected back onto the unit sphere.
    RigidBodyState {
        position: state.position + d.velocity * h,
        velocity: state.velocity + d.acceleration * h,
        attitude: UnitQuaternion::new_unchecked(state.attitude.quaternion() + d.attitude_rate * h),
        angular_velocity: state.angular_velocity + d.angular_acceleration * h,
    }
}

/// One classical RK4 step with rotor speeds and disturbance held constant.
pub fn step(
    state: &RigidBodyState,
    speeds: &MotorSpeeds,
    params: &VehicleParams,
    damage: &DamageProfile,
    disturbance: &ExternalDisturbance,
    dt: f64,
) -> Result<RigidBodyState> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    let wrench = true_wrench(speeds, params, damage);
    step_with_wrench(state, &wrench, params, disturbance, dt)
}

/// RK4 step driven directly by a body wrench.
pub fn step_with_wrench(
    state: &RigidBodyState,
    wrench: &Wrench,
    params: &VehicleParams,
    disturbance: &ExternalDisturbance,
    dt: f64,
) -> Result<RigidBodyState> {
    let j_inv = params.inertia_inverse();
    let f = |s: &RigidBodyState| derivative(s, wrench, params, &j_inv, disturbance);

    let k1 = f(state);
    let k2 = f(&advance(state, &k1, 0.5 * dt));
    let k3 = f(&advance(state, &k2, 0.5 * dt));
    let k4 = f(&advance(state, &k3, dt));

    let w = dt / 6.0;
    let q = state.attitude.quaternion()
        + (k1.attitude_rate + k2.attitude_rate * 2.0 + k3.attitude_rate * 2.0 + k4.attitude_rate) * w;
    let next = RigidBodyState {
        position: state.position + (k1.velocity + k2.velocity * 2.0 + k3.velocity * 2.0 + k4.velocity) * w,
        velocity: state.velocity
            + (k1.acceleration + k2.acceleration * 2.0 + k3.acceleration * 2.0 + k4.acceleration) * w,
        attitude: UnitQuaternion::from_quaternion(q),
        angular_velocity: state.angular_velocity
            + (k1.angular_acceleration
                + k2.angular_acceleration * 2.0
                + k3.angular_acceleration * 2.0
                + k4.angular_acceleration)
                * w,
    };
    if !next.is_finite() {
        return Err(Error::IntegrationFault { step: 0 });
    }
    Ok(next)
}

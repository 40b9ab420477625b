//! Three-rotor flight after a propeller is given up, and the supervisor
//! that decides when to give it up.
//!
//! With one rotor off, the remaining three can hold collective thrust and
//! the roll/pitch moments but not yaw, so the vehicle spins. The controller
//! only tracks a direction (reduced attitude); yaw is free apart from a
//! rate ceiling that is traded against the other channels.
//!
//! Holding zero roll/pitch moment would leave the rotor opposite the
//! disabled one at zero thrust, where it can only push one way. Instead
//! that rotor keeps a share of the thrust and its moment is balanced by the
//! gyroscopic moment of a slightly tilted spin: the body rates settle at
//! `Omega_bar` with `Omega_bar x J Omega_bar` equal to that moment, and the
//! controlled direction is the spin axis rather than `b3`.

use nalgebra::{Matrix3, Matrix4x3, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::control::allocation::{clip_squared, Allocation};
use crate::control::geometric::{commanded_acceleration, compute_b3, Gains, TrajectorySetpoint};
use crate::damage::DamageEstimate;
use crate::dynamics::{VehicleParams, Wrench, NUM_ROTORS, PITCH_SIGNS, ROLL_SIGNS};
use crate::error::{Error, Result};
use crate::sensor::Measurement;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FtGains {
    /// Reduced-attitude gain on body x/y [N m].
    pub kr: f64,
    /// Body x/y rate damping [N m s].
    pub komega: f64,
    /// Yaw-rate magnitude above which the spin is damped [rad/s].
    pub spin_ceiling: f64,
    /// Damping moment per rad/s of excess spin [N m s].
    pub spin_gain: f64,
    /// Relative weight of the yaw equation in the allocation.
    pub yaw_weight: f64,
    /// Thrust fraction held by the rotor opposite the disabled one once
    /// the spin is established.
    pub opposite_share: f64,
    /// Yaw rate at which the full opposite share is reached [rad/s].
    pub spin_reference: f64,
}

impl Default for FtGains {
    fn default() -> Self {
        Self {
            kr: 0.7,
            komega: 0.2,
            spin_ceiling: 20.0,
            spin_gain: 0.05,
            yaw_weight: 0.5,
            opposite_share: 0.15,
            spin_reference: 10.0,
        }
    }
}

/// `b3_d x b3`, zero when aligned; norm is the sine of the angle between.
pub fn reduced_attitude_error(b3_d: &Vector3<f64>, b3: &Vector3<f64>) -> Vector3<f64> {
    b3_d.cross(b3)
}

/// The rotor diagonally across from `rotor`.
pub fn opposite_rotor(rotor: usize) -> usize {
    (0..NUM_ROTORS)
        .find(|&j| ROLL_SIGNS[j] == -ROLL_SIGNS[rotor] && PITCH_SIGNS[j] == -PITCH_SIGNS[rotor])
        .unwrap_or(rotor)
}

/// Equilibrium body rates for a spin of `omega_z` with the opposite rotor
/// carrying its share of `thrust`. The share ramps in with the spin so the
/// tilt stays bounded while the spin builds up.
pub fn equilibrium_rates(
    thrust: f64,
    omega_z: f64,
    disabled: usize,
    params: &VehicleParams,
    gains: &FtGains,
) -> Vector3<f64> {
    let j = &params.inertia;
    let (dx, dy) = (j[(2, 2)] - j[(1, 1)], j[(0, 0)] - j[(2, 2)]);
    if omega_z.abs() < 1e-6 || dx.abs() < 1e-12 || dy.abs() < 1e-12 {
        return Vector3::new(0.0, 0.0, omega_z);
    }
    let o = opposite_rotor(disabled);
    let ramp = (omega_z.abs() / gains.spin_reference).min(1.0);
    let f_o = gains.opposite_share * thrust.max(0.0) * ramp;
    let m1 = params.arm_x * ROLL_SIGNS[o] * f_o;
    let m2 = params.arm_y * PITCH_SIGNS[o] * f_o;
    // (Omega x J Omega)_x = Omega_y Omega_z (J3 - J2), _y = Omega_z Omega_x (J1 - J3).
    Vector3::new(m2 / (omega_z * dy), m1 / (omega_z * dx), omega_z)
}

/// Body-frame spin axis for the equilibrium rates, pointing up the body.
pub fn primary_axis(omega_bar: &Vector3<f64>) -> Vector3<f64> {
    if omega_bar.z.abs() < 1e-6 {
        return Vector3::z();
    }
    (omega_bar * omega_bar.z.signum()).normalize()
}

/// Body moment from the reduced error (body frame), body rates and their
/// equilibrium values.
///
/// `M3` is zero unless `|Omega_3|` exceeds the ceiling, in which case it
/// opposes the excess.
pub fn ft_moment_command(
    e_reduced: &Vector3<f64>,
    omega: &Vector3<f64>,
    omega_bar: &Vector3<f64>,
    params: &VehicleParams,
    gains: &FtGains,
) -> Vector3<f64> {
    let gyro = omega.cross(&(params.inertia * omega));
    let excess = omega.z.abs() - gains.spin_ceiling;
    let m3 = if excess > 0.0 {
        -gains.spin_gain * excess * omega.z.signum()
    } else {
        0.0
    };
    Vector3::new(
        -gains.kr * e_reduced.x - gains.komega * (omega.x - omega_bar.x) + gyro.x,
        -gains.kr * e_reduced.y - gains.komega * (omega.y - omega_bar.y) + gyro.y,
        m3,
    )
}

fn healthy(disabled: usize) -> [usize; 3] {
    let mut out = [0; 3];
    let mut n = 0;
    for i in 0..NUM_ROTORS {
        if i != disabled {
            out[n] = i;
            n += 1;
        }
    }
    out
}

/// Columns of the nominal mixing matrix for the healthy rotors.
fn healthy_columns(disabled: usize, params: &VehicleParams) -> Matrix4x3<f64> {
    let b = params.nominal_mixing_matrix();
    let idx = healthy(disabled);
    Matrix4x3::from_columns(&[b.column(idx[0]), b.column(idx[1]), b.column(idx[2])])
}

fn scatter(disabled: usize, x: &Vector3<f64>) -> Vector4<f64> {
    let mut sq = Vector4::zeros();
    for (k, &i) in healthy(disabled).iter().enumerate() {
        sq[i] = x[k];
    }
    sq
}

/// Squared speeds of the healthy rotors meeting `(f, M1, M2)` exactly.
fn solve_exact(f: f64, m1: f64, m2: f64, disabled: usize, params: &VehicleParams) -> Result<Vector3<f64>> {
    let cols = healthy_columns(disabled, params);
    let sub: Matrix3<f64> = cols.fixed_rows::<3>(0).into_owned();
    sub.try_inverse()
        .map(|inv| inv * Vector3::new(f, m1, m2))
        .ok_or_else(|| Error::Configuration("singular three-rotor allocation".into()))
}

/// Three-rotor allocation of `(f, M1, M2)` with the disabled rotor at zero.
///
/// When the exact solution asks a rotor for negative thrust, that rotor is
/// pinned at zero and the other two match thrust exactly and the moments
/// in the least-squares sense.
pub fn ft_allocate(f: f64, m1: f64, m2: f64, disabled: Option<usize>, params: &VehicleParams) -> Result<Allocation> {
    let disabled = disabled
        .filter(|d| *d < NUM_ROTORS)
        .ok_or_else(|| Error::Contract("fault-tolerant allocation needs a disabled rotor".into()))?;
    let x = solve_exact(f, m1, m2, disabled, params)?;
    let x = if x.iter().any(|v| *v < 0.0) {
        two_rotor_fallback(&x, f, m1, m2, disabled, params)
    } else {
        x
    };
    let mut alloc = clip_squared(&scatter(disabled, &x), params.omega_max);
    alloc.clipped[disabled] = false;
    Ok(alloc)
}

fn two_rotor_fallback(
    x: &Vector3<f64>,
    f: f64,
    m1: f64,
    m2: f64,
    disabled: usize,
    params: &VehicleParams,
) -> Vector3<f64> {
    let cols = healthy_columns(disabled, params);
    // Drop the most negative rotor.
    let drop = x.imin();
    let keep: Vec<usize> = (0..3).filter(|k| *k != drop).collect();
    let (a, b) = (cols.column(keep[0]), cols.column(keep[1]));
    // Thrust equality x_a + x_b = f / kf, moments least squares on the
    // remaining free direction.
    let kf = params.kf_model;
    let total = f / kf;
    let da = Vector3::new(a[1], a[2], 0.0);
    let db = Vector3::new(b[1], b[2], 0.0);
    let target = Vector3::new(m1, m2, 0.0);
    // x_a = s, x_b = total - s; minimize |s da + (total - s) db - target|.
    let dir = da - db;
    let s = if dir.norm_squared() > 0.0 {
        (target - db * total).dot(&dir) / dir.norm_squared()
    } else {
        0.5 * total
    };
    let s = s.clamp(0.0, total.max(0.0));
    let mut out = Vector3::zeros();
    out[keep[0]] = s;
    out[keep[1]] = total.max(0.0) - s;
    out
}

/// Allocation that also weighs a yaw-moment request, used only while the
/// spin exceeds its ceiling.
pub fn ft_allocate_with_yaw(
    wrench: &Wrench,
    disabled: usize,
    yaw_weight: f64,
    params: &VehicleParams,
) -> Result<Allocation> {
    if wrench.moment.z == 0.0 {
        return ft_allocate(wrench.thrust, wrench.moment.x, wrench.moment.y, Some(disabled), params);
    }
    let cols = healthy_columns(disabled, params);
    // Scale rows so thrust and moments are comparable.
    let scale = Vector4::new(
        1.0,
        1.0 / params.arm_x,
        1.0 / params.arm_y,
        yaw_weight * params.kf_model / params.km_model,
    );
    let w = Matrix4x3::from_fn(|r, c| cols[(r, c)] * scale[r]);
    let rhs = wrench.as_vector().component_mul(&scale);
    let x = (w.transpose() * w)
        .try_inverse()
        .map(|inv| inv * w.transpose() * rhs)
        .ok_or_else(|| Error::Configuration("singular three-rotor allocation".into()))?;
    if x.iter().any(|v| *v < 0.0) {
        return ft_allocate(wrench.thrust, wrench.moment.x, wrench.moment.y, Some(disabled), params);
    }
    let mut alloc = clip_squared(&scatter(disabled, &x), params.omega_max);
    alloc.clipped[disabled] = false;
    Ok(alloc)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Adaptive,
    FaultTolerant,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SupervisorConfig {
    pub threshold: f64,
    pub debounce: u32,
}

impl Default for SupervisorConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            debounce: 25,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SupervisorState {
    pub mode: Mode,
    pub disabled_rotor: Option<usize>,
    /// Consecutive cycles at or above threshold.
    pub streak: u32,
}

/// One supervisor cycle. Once fault tolerant, the state never changes.
pub fn supervise(estimate: &DamageEstimate, state: &SupervisorState, cfg: &SupervisorConfig) -> SupervisorState {
    if state.mode == Mode::FaultTolerant {
        return *state;
    }
    let (rotor, worst) = estimate.worst();
    if worst < cfg.threshold {
        return SupervisorState { streak: 0, ..*state };
    }
    let streak = state.streak + 1;
    if streak >= cfg.debounce {
        SupervisorState {
            mode: Mode::FaultTolerant,
            disabled_rotor: Some(rotor),
            streak,
        }
    } else {
        SupervisorState { streak, ..*state }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FtOutput {
    pub wrench: Wrench,
    pub allocation: Allocation,
    pub b3_desired: Vector3<f64>,
    pub reduced_error: Vector3<f64>,
}

#[derive(Clone, Debug)]
pub struct FaultTolerantController {
    pub position_gains: Gains,
    pub gains: FtGains,
    pub params: VehicleParams,
    pub disabled_rotor: usize,
    last_b3: Vector3<f64>,
}

impl FaultTolerantController {
    pub fn new(position_gains: Gains, gains: FtGains, params: VehicleParams, disabled_rotor: usize) -> Result<Self> {
        if disabled_rotor >= NUM_ROTORS {
            return Err(Error::Contract(format!("no rotor {disabled_rotor}")));
        }
        solve_exact(params.weight(), 0.0, 0.0, disabled_rotor, &params)?;
        Ok(Self {
            position_gains,
            gains,
            params,
            disabled_rotor,
            last_b3: Vector3::z(),
        })
    }

    pub fn compute(&mut self, meas: &Measurement, setpoint: &TrajectorySetpoint) -> Result<FtOutput> {
        let p = &self.params;
        let accel = commanded_acceleration(
            &meas.position,
            &meas.velocity,
            setpoint,
            &self.position_gains,
            p.gravity,
        );
        let b3_d = compute_b3(&accel).unwrap_or(self.last_b3);
        self.last_b3 = b3_d;

        let r = meas.rotation();
        let omega = &meas.angular_velocity;
        // Thrust along b3 averages to its component along the spin axis.
        let thrust_guess = p.mass * accel.norm();
        let omega_bar = equilibrium_rates(thrust_guess, omega.z, self.disabled_rotor, p, &self.gains);
        let n_body = primary_axis(&omega_bar);
        let n = r * n_body;
        let e_body = r.transpose() * reduced_attitude_error(&b3_d, &n);
        let moment = ft_moment_command(&e_body, omega, &omega_bar, p, &self.gains);
        let thrust = (p.mass * accel.dot(&n) / n_body.z).clamp(0.0, p.max_thrust());
        let wrench = Wrench::new(thrust, moment);
        let allocation = ft_allocate_with_yaw(&wrench, self.disabled_rotor, self.gains.yaw_weight, p)?;
        Ok(FtOutput {
            wrench,
            allocation,
            b3_desired: b3_d,
            reduced_error: e_body,
        })
    }
}

//! L1 adaptive augmentation.
//!
//! Each control step runs, in order: the piecewise-constant adaptation law
//! (disturbance estimate from the prediction error), the low-pass filter
//! and actions, the predictor derivatives, and the blended predictor update.
//!
//! Frames: `v` is world-frame, `Omega` body-frame, and the estimate `sigma`
//! is a body-frame force (channels 0..3) and body moment (channels 3..6).
//!
//! Because the predictor update pulls the prediction toward the measurement
//! by `lambda`, the literal estimate `A e` settles at
//! `A dt / (lambda + A dt)` of a constant disturbance. With
//! [`L1Params::blend_correction`] the filtered estimate and the actions use
//! the gain `A + K` instead, which removes that bias exactly. The predictor
//! always integrates the literal estimate.

use nalgebra::{Matrix3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::dynamics::{VehicleParams, Wrench};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct L1Params {
    /// Diagonal of `K` [1/s].
    pub k: Vector6<f64>,
    /// Per-channel low-pass coefficient in `(0, 1]`.
    pub lpf_alpha: Vector6<f64>,
    /// Control period [s].
    pub dt: f64,
    pub blend_correction: bool,
}

impl Default for L1Params {
    fn default() -> Self {
        Self {
            k: Vector6::new(200.0, 200.0, 200.0, 50.0, 50.0, 50.0),
            lpf_alpha: Vector6::new(0.1, 0.1, 0.1, 0.05, 0.05, 0.05),
            dt: 0.002,
            blend_correction: true,
        }
    }
}

impl L1Params {
    pub fn lambda(&self) -> Vector6<f64> {
        self.k * self.dt
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Configuration("l1 dt must be positive".into()));
        }
        if self.k.iter().any(|k| !(*k > 0.0 && k * self.dt < 1.0)) {
            return Err(Error::Configuration("l1 gains need 0 < K dt < 1".into()));
        }
        if self.lpf_alpha.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
            return Err(Error::Configuration("lpf alpha must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictorState {
    pub velocity: Vector3<f64>,
    pub angular_velocity: Vector3<f64>,
}

/// Body force (first three) and body moment (last three).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceEstimate(pub Vector6<f64>);

impl DisturbanceEstimate {
    pub fn force(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(0).into_owned()
    }

    pub fn moment(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(3).into_owned()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct L1Action {
    pub thrust: f64,
    pub moment: Vector3<f64>,
}

impl L1Action {
    pub fn as_wrench(&self) -> Wrench {
        Wrench::new(self.thrust, self.moment)
    }
}

/// Diagonal of `(exp(K dt) - I)^-1 K exp(K dt)`.
pub fn compute_gain_a(k: &Vector6<f64>, dt: f64) -> Vector6<f64> {
    k.map(|a| {
        let x = a * dt;
        // a e^x / (e^x - 1) == a / (1 - e^-x)
        a / -(-x).exp_m1()
    })
}

/// `sigma = blockdiag(m R^T, J) A ([v_m; Omega_m] - [v_p; Omega_p])`.
pub fn compute_sigma(
    v_m: &Vector3<f64>,
    omega_m: &Vector3<f64>,
    pred: &PredictorState,
    r: &Matrix3<f64>,
    params: &VehicleParams,
    a: &Vector6<f64>,
) -> DisturbanceEstimate {
    let ev = (v_m - pred.velocity).component_mul(&a.fixed_rows::<3>(0));
    let ew = (omega_m - pred.angular_velocity).component_mul(&a.fixed_rows::<3>(3));
    let force = r.transpose() * ev * params.mass;
    let moment = params.inertia * ew;
    DisturbanceEstimate(Vector6::new(force.x, force.y, force.z, moment.x, moment.y, moment.z))
}

/// First-order filter on every channel; actions cancel the filtered thrust
/// and moment channels. The lateral force channels produce no action.
pub fn adaptation_output(
    sigma: &DisturbanceEstimate,
    lpf_state: &Vector6<f64>,
    alpha: &Vector6<f64>,
) -> (L1Action, Vector6<f64>) {
    let next = lpf_state.component_mul(&alpha.map(|a| 1.0 - a)) + alpha.component_mul(&sigma.0);
    let action = L1Action {
        thrust: -next[2],
        moment: -next.fixed_rows::<3>(3).into_owned(),
    };
    (action, next)
}

/// Predicted linear and angular accelerations under the total commanded
/// wrench and the current estimate.
pub fn predictor_derivatives(
    omega_m: &Vector3<f64>,
    f_total: f64,
    m_total: &Vector3<f64>,
    sigma: &DisturbanceEstimate,
    r: &Matrix3<f64>,
    params: &VehicleParams,
) -> (Vector3<f64>, Vector3<f64>) {
    let v_dot = r * Vector3::new(0.0, 0.0, f_total / params.mass) + r * sigma.force() / params.mass
        - Vector3::new(0.0, 0.0, params.gravity);
    let gyro = omega_m.cross(&(params.inertia * omega_m));
    let omega_dot = params.inertia_inverse() * (m_total + sigma.moment() - gyro);
    (v_dot, omega_dot)
}

/// `(1 - lambda) pred + lambda meas + dt derivs`, per channel.
pub fn predictor_update(
    pred: &PredictorState,
    v_m: &Vector3<f64>,
    omega_m: &Vector3<f64>,
    derivs: &(Vector3<f64>, Vector3<f64>),
    lambda: &Vector6<f64>,
    dt: f64,
) -> PredictorState {
    let mut next = PredictorState::default();
    for i in 0..3 {
        let (lv, lw) = (lambda[i], lambda[i + 3]);
        next.velocity[i] = (1.0 - lv) * pred.velocity[i] + lv * v_m[i] + dt * derivs.0[i];
        next.angular_velocity[i] = (1.0 - lw) * pred.angular_velocity[i] + lw * omega_m[i] + dt * derivs.1[i];
    }
    next
}

/// Everything one step produces, for logging.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct L1Output {
    pub action: L1Action,
    /// Literal adaptation-law estimate.
    pub sigma: DisturbanceEstimate,
    /// Low-pass filtered (and, if enabled, bias-corrected) estimate.
    pub sigma_filtered: DisturbanceEstimate,
}

/// Predictor, filter state and precomputed gains for one vehicle.
#[derive(Clone, Debug)]
pub struct L1Adaptation {
    params: L1Params,
    gain_a: Vector6<f64>,
    /// Multiplier applied to the literal estimate before filtering.
    correction: Vector6<f64>,
    predictor: PredictorState,
    lpf: Vector6<f64>,
    frozen: bool,
}

impl L1Adaptation {
    pub fn new(params: L1Params) -> Result<Self> {
        params.validate()?;
        let gain_a = compute_gain_a(&params.k, params.dt);
        let correction = if params.blend_correction {
            (gain_a + params.k).component_div(&gain_a)
        } else {
            Vector6::repeat(1.0)
        };
        Ok(Self {
            params,
            gain_a,
            correction,
            predictor: PredictorState::default(),
            lpf: Vector6::zeros(),
            frozen: false,
        })
    }

    /// Start the predictor at the measured state so the first estimate is
    /// not a spurious step.
    pub fn reset(&mut self, v_m: &Vector3<f64>, omega_m: &Vector3<f64>) {
        self.predictor = PredictorState {
            velocity: *v_m,
            angular_velocity: *omega_m,
        };
        self.lpf = Vector6::zeros();
        self.frozen = false;
    }

    pub fn params(&self) -> &L1Params {
        &self.params
    }

    pub fn gain_a(&self) -> &Vector6<f64> {
        &self.gain_a
    }

    pub fn predictor(&self) -> &PredictorState {
        &self.predictor
    }

    /// Stop adapting; subsequent steps return a zero action.
    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn step(
        &mut self,
        v_m: &Vector3<f64>,
        omega_m: &Vector3<f64>,
        r: &Matrix3<f64>,
        base: &Wrench,
        vehicle: &VehicleParams,
    ) -> L1Output {
        if self.frozen {
            return L1Output {
                sigma_filtered: DisturbanceEstimate(self.lpf),
                ..L1Output::default()
            };
        }
        let sigma = compute_sigma(v_m, omega_m, &self.predictor, r, vehicle, &self.gain_a);
        let corrected = DisturbanceEstimate(sigma.0.component_mul(&self.correction));
        let (action, lpf) = adaptation_output(&corrected, &self.lpf, &self.params.lpf_alpha);
        self.lpf = lpf;

        let f_total = base.thrust + action.thrust;
        let m_total = base.moment + action.moment;
        let derivs = predictor_derivatives(omega_m, f_total, &m_total, &sigma, r, vehicle);
        self.predictor = predictor_update(
            &self.predictor,
            v_m,
            omega_m,
            &derivs,
            &self.params.lambda(),
            self.params.dt,
        );

        L1Output {
            action,
            sigma,
            sigma_filtered: DisturbanceEstimate(lpf),
        }
    }
}

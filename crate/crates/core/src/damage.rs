//! Per-propeller thrust-coefficient estimation.
//!
//! Rotor speeds allocated from the nominal wrench and from the L1-augmented
//! wrench give a first guess per rotor: the augmentation speeds a rotor up
//! by exactly as much as its propeller lost. The guesses are snapped to the
//! nominal coefficient when they are within 5 % of it, then refined by the
//! minimum-distance solution of the thrust, roll and pitch constraints.
//! Yaw is left out because its drag coefficient degrades differently.
//!
//! Estimates live in coefficient space; the mismatch index is
//! `1 - k / k_model`.

use std::collections::VecDeque;

use nalgebra::{Matrix3, Matrix3x4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::dynamics::{MotorSpeeds, VehicleParams, Wrench, NUM_ROTORS, PITCH_SIGNS, ROLL_SIGNS};
use crate::error::{Error, Result};

/// Rotor speeds below this make the speed ratio meaningless [rad/s].
pub const EPS_RPM: f64 = 1.0;
/// Guesses implying at most this much damage are treated as undamaged.
pub const PRIOR_THRESHOLD: f64 = 0.05;
/// Largest acceptable condition number of `A A^T`.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    /// Sliding-window length in control cycles.
    pub window: usize,
    /// Raw mismatch below this is treated as an anomaly.
    pub min_raw_mismatch: f64,
    /// Estimation runs only above this fraction of the weight.
    pub min_thrust_fraction: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            window: 50,
            min_raw_mismatch: -0.2,
            min_thrust_fraction: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DamageObservation {
    pub omega_nom: MotorSpeeds,
    pub omega_l1: MotorSpeeds,
    pub wrench_nom: Wrench,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DamageEstimate {
    /// Latest refined coefficients.
    pub k_real: [f64; NUM_ROTORS],
    /// Latest per-cycle mismatch.
    pub k_mis_raw: [f64; NUM_ROTORS],
    /// Window-averaged mismatch; what the supervisor acts on.
    pub k_mis: [f64; NUM_ROTORS],
    pub d_prior: [f64; NUM_ROTORS],
    /// Whether this cycle produced a new sample.
    pub updated: bool,
}

impl DamageEstimate {
    /// `(rotor, value)` of the largest filtered mismatch, lowest index on ties.
    pub fn worst(&self) -> (usize, f64) {
        let mut best = (0, self.k_mis[0]);
        for (i, &m) in self.k_mis.iter().enumerate().skip(1) {
            if m > best.1 {
                best = (i, m);
            }
        }
        best
    }
}

/// `k_model * omega_nom^2 / omega_l1^2`.
pub fn initial_guess(omega_nom: f64, omega_l1: f64, kf_model: f64) -> Result<f64> {
    if !(omega_l1 > EPS_RPM) {
        return Err(Error::EstimateUnavailable(format!("rotor speed {omega_l1} too low")));
    }
    Ok(kf_model * (omega_nom / omega_l1).powi(2))
}

/// Snap guesses within the threshold (including speed-ups) to `k_model`.
pub fn apply_prior(raw: &[f64; NUM_ROTORS], kf_model: f64) -> [f64; NUM_ROTORS] {
    raw.map(|k| {
        if 1.0 - k / kf_model <= PRIOR_THRESHOLD {
            kf_model
        } else {
            k
        }
    })
}

/// Thrust, roll and pitch rows evaluated at the augmented speeds, and the
/// nominal `(f, M1, M2)` they must reproduce.
pub fn build_constraints(obs: &DamageObservation, params: &VehicleParams) -> (Matrix3x4<f64>, Vector3<f64>) {
    let sq = obs.omega_l1.squared();
    let mut a = Matrix3x4::zeros();
    for i in 0..NUM_ROTORS {
        a[(0, i)] = sq[i];
        a[(1, i)] = params.arm_x * ROLL_SIGNS[i] * sq[i];
        a[(2, i)] = params.arm_y * PITCH_SIGNS[i] * sq[i];
    }
    let w = &obs.wrench_nom;
    (a, Vector3::new(w.thrust, w.moment.x, w.moment.y))
}

fn condition_number(m: &Matrix3<f64>) -> f64 {
    let sv = m.singular_values();
    sv.max() / sv.min()
}

/// `k = A^T (A A^T)^-1 (b - A d) + d`: the point of `{A k = b}` closest to `d`.
pub fn solve_damage(a: &Matrix3x4<f64>, b: &Vector3<f64>, d: &Vector4<f64>) -> Result<Vector4<f64>> {
    let aat = a * a.transpose();
    let cond = condition_number(&aat);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::EstimateUnavailable(format!(
            "ill-conditioned constraints ({cond:e})"
        )));
    }
    let chol = aat
        .cholesky()
        .ok_or_else(|| Error::EstimateUnavailable("constraints not full rank".into()))?;
    let y = chol.solve(&(b - a * d));
    Ok(a.transpose() * y + d)
}

/// Raw refined coefficients and prior for one observation.
pub fn estimate_raw(obs: &DamageObservation, params: &VehicleParams) -> Result<(Vector4<f64>, [f64; NUM_ROTORS])> {
    let mut guesses = [params.kf_model; NUM_ROTORS];
    for (i, g) in guesses.iter_mut().enumerate() {
        // A rotor that is too slow to judge keeps the undamaged guess.
        if let Ok(k) = initial_guess(obs.omega_nom[i], obs.omega_l1[i], params.kf_model) {
            *g = k;
        }
    }
    let d = apply_prior(&guesses, params.kf_model);
    let (a, b) = build_constraints(obs, params);
    let k = solve_damage(&a, &b, &Vector4::from(d))?;
    Ok((k, d))
}

/// Sliding-window estimator state owned by the control loop.
#[derive(Clone, Debug)]
pub struct DamageEstimator {
    config: EstimatorConfig,
    window: VecDeque<[f64; NUM_ROTORS]>,
    last: DamageEstimate,
    halted: bool,
}

impl DamageEstimator {
    pub fn new(config: EstimatorConfig, params: &VehicleParams) -> Self {
        let last = DamageEstimate {
            k_real: [params.kf_model; NUM_ROTORS],
            d_prior: [params.kf_model; NUM_ROTORS],
            ..DamageEstimate::default()
        };
        Self {
            config,
            window: VecDeque::with_capacity(config.window),
            last,
            halted: false,
        }
    }

    pub fn latest(&self) -> &DamageEstimate {
        &self.last
    }

    /// Stop estimating; the last estimate is held from now on.
    pub fn halt(&mut self) {
        self.halted = true;
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    fn push(&mut self, sample: [f64; NUM_ROTORS]) {
        if self.window.len() == self.config.window {
            self.window.pop_front();
        }
        self.window.push_back(sample);
    }

    fn mean(&self) -> [f64; NUM_ROTORS] {
        let n = self.window.len() as f64;
        let mut m = [0.0; NUM_ROTORS];
        for s in &self.window {
            for i in 0..NUM_ROTORS {
                m[i] += s[i];
            }
        }
        m.map(|x| x / n)
    }

    /// One control cycle. Returns the held estimate when the cycle is
    /// gated out or the solve is unavailable.
    pub fn update(&mut self, obs: &DamageObservation, params: &VehicleParams) -> DamageEstimate {
        self.last.updated = false;
        if self.halted || obs.wrench_nom.thrust <= self.config.min_thrust_fraction * params.weight() {
            return self.last;
        }
        let (k, d) = match estimate_raw(obs, params) {
            Ok(r) => r,
            Err(e) => {
                log::trace!("damage estimate skipped: {e}");
                return self.last;
            }
        };
        let raw: [f64; NUM_ROTORS] = std::array::from_fn(|i| 1.0 - k[i] / params.kf_model);
        if raw.iter().any(|m| !m.is_finite() || *m < self.config.min_raw_mismatch) {
            return self.last;
        }
        self.push(raw);
        self.last = DamageEstimate {
            k_real: k.into(),
            k_mis_raw: raw,
            k_mis: self.mean(),
            d_prior: d,
            updated: true,
        };
        self.last
    }
}

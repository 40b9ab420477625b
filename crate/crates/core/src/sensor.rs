//! Additive Gaussian measurement noise standing in for the motion-capture
//! and IMU state estimate.

use nalgebra::{UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::RigidBodyState;

/// Per-axis standard deviations. Defaults are small and not calibrated
/// against any particular estimator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// [m]
    pub position_std: Vector3<f64>,
    /// World-frame velocity [m/s].
    pub velocity_std: Vector3<f64>,
    /// Body-frame angular velocity [rad/s].
    pub angular_velocity_std: Vector3<f64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            position_std: Vector3::repeat(0.0),
            velocity_std: Vector3::repeat(0.002),
            angular_velocity_std: Vector3::repeat(0.002),
        }
    }
}

impl NoiseConfig {
    pub fn none() -> Self {
        Self {
            position_std: Vector3::zeros(),
            velocity_std: Vector3::zeros(),
            angular_velocity_std: Vector3::zeros(),
        }
    }
}

/// What the controllers see.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measurement {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub attitude: UnitQuaternion<f64>,
    pub angular_velocity: Vector3<f64>,
}

impl Measurement {
    pub fn exact(state: &RigidBodyState) -> Self {
        Self {
            position: state.position,
            velocity: state.velocity,
            attitude: state.attitude,
            angular_velocity: state.angular_velocity,
        }
    }

    pub fn rotation(&self) -> nalgebra::Matrix3<f64> {
        self.attitude.to_rotation_matrix().into_inner()
    }
}

/// Seeded noise source. Every call draws the same number of samples, so
/// the stream is reproducible regardless of which deviations are zero.
#[derive(Clone, Debug)]
pub struct Sensor {
    config: NoiseConfig,
    rng: ChaCha8Rng,
}

impl Sensor {
    pub fn new(config: NoiseConfig, seed: u64) -> Self {
        Self {
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn config(&self) -> &NoiseConfig {
        &self.config
    }

    fn noise(&mut self, std: &Vector3<f64>) -> Vector3<f64> {
        let mut n = Vector3::zeros();
        for i in 0..3 {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            n[i] = z * std[i];
        }
        n
    }

    pub fn measure(&mut self, state: &RigidBodyState) -> Measurement {
        let cfg = self.config;
        Measurement {
            position: state.position + self.noise(&cfg.position_std),
            velocity: state.velocity + self.noise(&cfg.velocity_std),
            attitude: state.attitude,
            angular_velocity: state.angular_velocity + self.noise(&cfg.angular_velocity_std),
        }
    }
}

/// One-shot measurement `(v_m, Omega_m)` from a fresh generator.
pub fn measure(state: &RigidBodyState, seed: u64, config: &NoiseConfig) -> (Vector3<f64>, Vector3<f64>) {
    let m = Sensor::new(*config, seed).measure(state);
    (m.velocity, m.angular_velocity)
}

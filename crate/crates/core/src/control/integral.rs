//! Integral compensator on body-frame velocity error, used in place of the
//! L1 augmentation for baseline comparisons.
//!
//! The body-z integral feeds thrust. The body-x and body-y integrals feed
//! pitch and roll moments with the signs that tilt the thrust toward the
//! accumulated error.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::dynamics::Wrench;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegralConfig {
    /// Thrust per meter of integrated body-z velocity error [N/m].
    pub thrust_gain: f64,
    /// Moment per meter of integrated lateral velocity error [N m/m].
    pub moment_gain: f64,
    /// Anti-windup bound on the thrust action [N].
    pub thrust_bound: f64,
    /// Anti-windup bound on each moment action [N m].
    pub moment_bound: f64,
}

impl Default for IntegralConfig {
    fn default() -> Self {
        Self {
            thrust_gain: 5.0,
            moment_gain: 0.05,
            thrust_bound: 2.0,
            moment_bound: 0.02,
        }
    }
}

/// `(action, new_accumulator)` after integrating `error` over `dt`.
///
/// The accumulator is clamped so that the action stays within the bounds,
/// which doubles as anti-windup.
pub fn integral_baseline_action(
    accumulator: &Vector3<f64>,
    error_body: &Vector3<f64>,
    dt: f64,
    cfg: &IntegralConfig,
) -> (Wrench, Vector3<f64>) {
    let mut acc = accumulator + error_body * dt;
    let lim_xy = cfg.moment_bound / cfg.moment_gain;
    let lim_z = cfg.thrust_bound / cfg.thrust_gain;
    acc.x = acc.x.clamp(-lim_xy, lim_xy);
    acc.y = acc.y.clamp(-lim_xy, lim_xy);
    acc.z = acc.z.clamp(-lim_z, lim_z);
    let action = Wrench::new(
        cfg.thrust_gain * acc.z,
        Vector3::new(-cfg.moment_gain * acc.y, cfg.moment_gain * acc.x, 0.0),
    );
    (action, acc)
}

#[derive(Clone, Debug, Default)]
pub struct IntegralBaseline {
    pub config: IntegralConfig,
    accumulator: Vector3<f64>,
}

impl IntegralBaseline {
    pub fn new(config: IntegralConfig) -> Self {
        Self {
            config,
            accumulator: Vector3::zeros(),
        }
    }

    pub fn accumulator(&self) -> &Vector3<f64> {
        &self.accumulator
    }

    pub fn step(&mut self, error_body: &Vector3<f64>, dt: f64) -> Wrench {
        let (action, acc) = integral_baseline_action(&self.accumulator, error_body, dt, &self.config);
        self.accumulator = acc;
        action
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_error_zero_action() {
        let mut b = IntegralBaseline::new(IntegralConfig::default());
        for _ in 0..100 {
            assert_eq!(b.step(&Vector3::zeros(), 0.002), Wrench::default());
        }
    }

    #[test]
    fn constant_error_integrates_linearly() {
        let cfg = IntegralConfig {
            thrust_bound: 100.0,
            moment_bound: 100.0,
            ..IntegralConfig::default()
        };
        let mut b = IntegralBaseline::new(cfg);
        let e = Vector3::new(0.1, -0.2, 0.05);
        let mut w = Wrench::default();
        for _ in 0..500 {
            w = b.step(&e, 0.002);
        }
        let t = 1.0;
        assert_relative_eq!(w.thrust, cfg.thrust_gain * e.z * t, epsilon = 1e-12);
        assert_relative_eq!(w.moment.x, -cfg.moment_gain * e.y * t, epsilon = 1e-12);
        assert_relative_eq!(w.moment.y, cfg.moment_gain * e.x * t, epsilon = 1e-12);
        assert_eq!(w.moment.z, 0.0);
    }

    #[test]
    fn action_respects_bounds() {
        let cfg = IntegralConfig::default();
        let mut b = IntegralBaseline::new(cfg);
        for _ in 0..100_000 {
            let w = b.step(&Vector3::new(3.0, -3.0, 3.0), 0.002);
            assert!(w.thrust.abs() <= cfg.thrust_bound + 1e-12);
            assert!(w.moment.amax() <= cfg.moment_bound + 1e-12);
        }
        // Anti-windup: reversing the error unwinds immediately.
        let w = b.step(&Vector3::new(-3.0, 3.0, -3.0), 0.002);
        assert!(w.thrust < cfg.thrust_bound);
    }
}

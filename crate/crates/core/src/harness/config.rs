use std::path::Path;

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::control::{Gains, IntegralConfig};
use crate::damage::EstimatorConfig;
use crate::dynamics::{ExternalDisturbance, VehicleParams, NUM_ROTORS};
use crate::error::{Error, Result};
use crate::fault_tolerant::{FtGains, SupervisorConfig};
use crate::l1::L1Params;
use crate::sensor::NoiseConfig;
use crate::trajectory::{TrajectoryKind, TrajectorySpec};

/// How a scheduled fault reaches the plant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionMode {
    /// Shorter propeller: thrust coefficient scaled by `kf_ratio`, torque
    /// coefficient by `kf_ratio^(5/4)`.
    #[default]
    Propeller,
    /// Corrupted motor input: the rotor spins at `sqrt(kf_ratio)` of the
    /// command, so thrust and torque both scale by `kf_ratio`.
    Motor,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DamageEvent {
    /// [s]
    pub time: f64,
    /// 1-based rotor number.
    pub rotor: usize,
    pub kf_ratio: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DisturbanceWindow {
    pub start: f64,
    /// Open-ended when absent.
    pub end: Option<f64>,
    pub force_world: Vector3<f64>,
    /// Force fixed to the airframe, e.g. downwash striking the arms.
    pub force_body: Vector3<f64>,
    pub moment_body: Vector3<f64>,
    /// Sinusoidal gust added to the force [N].
    pub gust_amplitude: Vector3<f64>,
    /// [Hz]
    pub gust_frequency: f64,
}

impl DisturbanceWindow {
    pub fn constant(force_world: Vector3<f64>, moment_body: Vector3<f64>) -> Self {
        Self {
            force_world,
            moment_body,
            ..Self::default()
        }
    }

    /// The disturbance at `t` for a vehicle at `attitude`.
    pub fn at(&self, t: f64, attitude: &UnitQuaternion<f64>) -> ExternalDisturbance {
        if t < self.start || self.end.is_some_and(|e| t >= e) {
            return ExternalDisturbance::NONE;
        }
        let phase = 2.0 * std::f64::consts::PI * self.gust_frequency * (t - self.start);
        ExternalDisturbance {
            force_world: self.force_world + attitude * self.force_body + self.gust_amplitude * phase.sin(),
            moment_body: self.moment_body,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub name: String,
    /// [s]
    pub duration: f64,
    pub seed: u64,
    /// Plant integration step [s].
    pub sim_dt: f64,
    /// Control period; a whole multiple of `sim_dt` [s].
    pub control_dt: f64,
    /// RMSE is taken over `t > warmup`. Defaults to one trajectory period,
    /// or 2 s for hover.
    pub warmup: Option<f64>,
    /// Abort when the position error exceeds this [m].
    pub divergence_threshold: f64,
    /// Keep the per-cycle log in memory. Sweeps may turn it off.
    pub record: bool,

    pub l1_enabled: bool,
    pub baseline_integral: bool,
    pub estimation_enabled: bool,
    pub supervisor_enabled: bool,
    pub injection: InjectionMode,
    /// First-order motor lag; 0 disables it [s].
    pub motor_time_constant: f64,

    pub vehicle: VehicleParams,
    pub trajectory: TrajectorySpec,
    pub gains: Gains,
    pub l1: L1Params,
    pub integral: IntegralConfig,
    pub estimator: EstimatorConfig,
    pub supervisor: SupervisorConfig,
    pub ft: FtGains,
    pub noise: NoiseConfig,
    pub damage: Vec<DamageEvent>,
    pub disturbance: Vec<DisturbanceWindow>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            duration: 12.0,
            seed: 0,
            sim_dt: 0.001,
            control_dt: 0.002,
            warmup: None,
            divergence_threshold: 10.0,
            record: true,
            l1_enabled: true,
            baseline_integral: false,
            estimation_enabled: true,
            supervisor_enabled: true,
            injection: InjectionMode::Propeller,
            motor_time_constant: 0.0,
            vehicle: VehicleParams::default(),
            trajectory: TrajectorySpec::default(),
            gains: Gains::default(),
            l1: L1Params::default(),
            integral: IntegralConfig::default(),
            estimator: EstimatorConfig::default(),
            supervisor: SupervisorConfig::default(),
            ft: FtGains::default(),
            noise: NoiseConfig::default(),
            damage: Vec::new(),
            disturbance: Vec::new(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Configuration(e.to_string()))
    }

    /// Sim steps per control step.
    pub fn substeps(&self) -> usize {
        (self.control_dt / self.sim_dt).round() as usize
    }

    pub fn effective_warmup(&self) -> f64 {
        self.warmup.unwrap_or_else(|| match self.trajectory.kind {
            TrajectoryKind::Hover => 2.0,
            _ => self.trajectory.effective_period(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Configuration(m));
        if !(self.duration > 0.0) {
            return bad("duration must be positive".into());
        }
        if !(self.sim_dt > 0.0 && self.control_dt >= self.sim_dt) {
            return bad("need 0 < sim_dt <= control_dt".into());
        }
        let ratio = self.control_dt / self.sim_dt;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return bad("control_dt must be a whole multiple of sim_dt".into());
        }
        if (self.l1.dt - self.control_dt).abs() > 1e-12 {
            return bad("l1.dt must equal control_dt".into());
        }
        if self.motor_time_constant < 0.0 {
            return bad("motor time constant must be non-negative".into());
        }
        if self.l1_enabled && self.baseline_integral {
            return bad("l1 and the integral baseline are mutually exclusive".into());
        }
        self.vehicle.validate()?;
        self.gains.validate()?;
        self.l1.validate()?;
        self.trajectory.validate()?;
        let mut last = f64::NEG_INFINITY;
        for ev in &self.damage {
            if !(1..=NUM_ROTORS).contains(&ev.rotor) {
                return bad(format!("damage rotor {} outside 1..={NUM_ROTORS}", ev.rotor));
            }
            if !(ev.kf_ratio > 0.0 && ev.kf_ratio <= 1.0) {
                return bad(format!("kf_ratio {} outside (0, 1]", ev.kf_ratio));
            }
            if ev.time < last {
                return bad("damage schedule must be time-ordered".into());
            }
            last = ev.time;
        }
        let mut last = f64::NEG_INFINITY;
        for w in &self.disturbance {
            if w.start < last || w.end.is_some_and(|e| e < w.start) {
                return bad("disturbance schedule must be time-ordered".into());
            }
            last = w.start;
        }
        Ok(())
    }

    /// Largest scheduled thrust loss, as a mismatch fraction.
    pub fn damage_level(&self) -> f64 {
        self.damage.iter().map(|d| 1.0 - d.kf_ratio).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut cfg = ScenarioConfig::default();
        cfg.damage.push(DamageEvent {
            time: 1.0,
            rotor: 2,
            kf_ratio: 0.7,
        });
        cfg.disturbance.push(DisturbanceWindow::constant(
            Vector3::new(0.0, 0.0, -0.5),
            Vector3::zeros(),
        ));
        let text = cfg.to_toml_string().unwrap();
        let back = ScenarioConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let cfg = ScenarioConfig::from_toml_str(
            r#"
            name = "short"
            duration = 3.0

            [trajectory]
            kind = "ellipse"
            radii = [1.0, 0.6, 0.1]
            period = 8.0

            [[damage]]
            time = 0.5
            rotor = 1
            kf_ratio = 0.8
            "#,
        )
        .unwrap();
        assert_eq!(cfg.trajectory.kind, TrajectoryKind::Ellipse);
        assert_eq!(cfg.trajectory.center, Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(cfg.vehicle, VehicleParams::default());
        assert_eq!(cfg.effective_warmup(), 8.0);
    }

    #[test]
    fn rejects_bad_schedules() {
        let mut cfg = ScenarioConfig::default();
        cfg.damage.push(DamageEvent {
            time: 0.0,
            rotor: 5,
            kf_ratio: 0.5,
        });
        assert!(cfg.validate().is_err());
        cfg.damage[0].rotor = 1;
        cfg.damage.push(DamageEvent {
            time: -1.0,
            rotor: 1,
            kf_ratio: 0.5,
        });
        assert!(cfg.validate().is_err());
        let cfg = ScenarioConfig {
            control_dt: 0.0015,
            ..ScenarioConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn disturbance_window_timing() {
        let w = DisturbanceWindow {
            start: 1.0,
            end: Some(2.0),
            force_world: Vector3::x(),
            ..DisturbanceWindow::default()
        };
        let q = UnitQuaternion::identity();
        assert_eq!(w.at(0.5, &q), ExternalDisturbance::NONE);
        assert_eq!(w.at(1.5, &q).force_world, Vector3::x());
        assert_eq!(w.at(2.0, &q), ExternalDisturbance::NONE);
    }

    #[test]
    fn body_force_follows_attitude() {
        let w = DisturbanceWindow {
            force_body: Vector3::new(0.0, 0.0, -1.0),
            ..DisturbanceWindow::default()
        };
        let q = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::FRAC_PI_2);
        let f = w.at(0.0, &q).force_world;
        assert!((f - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }
}

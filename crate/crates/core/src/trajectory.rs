//! Reference trajectories with analytic derivatives up to jerk.
//!
//! Periodic paths are `p = c + f(theta(t))`. The phase rate ramps from zero
//! to `2 pi / period` over the first period with a quintic smoothstep, after
//! which `theta = w t - pi` and the setpoint repeats every period.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::control::geometric::{wrap_angle, TrajectorySetpoint};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    #[default]
    Hover,
    Ellipse,
    Circle,
    FigureEight,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YawMode {
    #[default]
    Fixed,
    Tangent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    pub center: Vector3<f64>,
    /// Circles use `radii.x` for both horizontal axes.
    pub radii: Vector3<f64>,
    /// [s]
    pub period: f64,
    /// If set, overrides `period` so that the peak speed equals this [m/s].
    pub max_speed: Option<f64>,
    pub yaw_mode: YawMode,
    /// Yaw used in fixed mode [rad].
    pub yaw: f64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            kind: TrajectoryKind::Hover,
            center: Vector3::new(0.0, 0.0, 1.0),
            radii: Vector3::zeros(),
            period: 12.0,
            max_speed: None,
            yaw_mode: YawMode::Fixed,
            yaw: 0.0,
        }
    }
}

impl TrajectorySpec {
    pub fn hover(center: Vector3<f64>) -> Self {
        Self {
            center,
            ..Self::default()
        }
    }

    pub fn ellipse(center: Vector3<f64>, radii: Vector3<f64>, period: f64) -> Self {
        Self {
            kind: TrajectoryKind::Ellipse,
            center,
            radii,
            period,
            ..Self::default()
        }
    }

    pub fn circle(center: Vector3<f64>, radius: f64, period: f64) -> Self {
        Self {
            kind: TrajectoryKind::Circle,
            center,
            radii: Vector3::new(radius, radius, 0.0),
            period,
            ..Self::default()
        }
    }

    pub fn figure_eight(center: Vector3<f64>, radii: Vector3<f64>, max_speed: f64) -> Self {
        Self {
            kind: TrajectoryKind::FigureEight,
            center,
            radii,
            max_speed: Some(max_speed),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radii.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::Configuration("trajectory radii must be non-negative".into()));
        }
        if self.kind != TrajectoryKind::Hover && self.max_speed.is_none() && !(self.period > 0.0) {
            return Err(Error::Configuration("trajectory period must be positive".into()));
        }
        if let Some(v) = self.max_speed {
            if !(v > 0.0) {
                return Err(Error::Configuration("max speed must be positive".into()));
            }
            if self.kind != TrajectoryKind::Hover && self.path_speed_gain() == 0.0 {
                return Err(Error::Configuration("max speed needs a non-degenerate path".into()));
            }
        }
        Ok(())
    }

    fn radii_eff(&self) -> Vector3<f64> {
        match self.kind {
            TrajectoryKind::Circle => Vector3::new(self.radii.x, self.radii.x, self.radii.z),
            _ => self.radii,
        }
    }

    /// Path shape and its first three derivatives with respect to phase.
    fn shape(&self, th: f64) -> [Vector3<f64>; 4] {
        let r = self.radii_eff();
        let (s, c) = th.sin_cos();
        match self.kind {
            TrajectoryKind::Hover => [Vector3::zeros(); 4],
            TrajectoryKind::Ellipse | TrajectoryKind::Circle => [
                Vector3::new(r.x * c, r.y * s, r.z * s),
                Vector3::new(-r.x * s, r.y * c, r.z * c),
                Vector3::new(-r.x * c, -r.y * s, -r.z * s),
                Vector3::new(r.x * s, -r.y * c, -r.z * c),
            ],
            TrajectoryKind::FigureEight => {
                let (s2, c2) = (2.0 * th).sin_cos();
                [
                    Vector3::new(r.x * s, r.y * s2, r.z * s),
                    Vector3::new(r.x * c, 2.0 * r.y * c2, r.z * c),
                    Vector3::new(-r.x * s, -4.0 * r.y * s2, -r.z * s),
                    Vector3::new(-r.x * c, -8.0 * r.y * c2, -r.z * c),
                ]
            }
        }
    }

    /// `max |df/dtheta|` over one revolution.
    fn path_speed_gain(&self) -> f64 {
        (0..4096)
            .map(|i| self.shape(2.0 * PI * i as f64 / 4096.0)[1].norm())
            .fold(0.0, f64::max)
    }

    /// Period actually flown, after applying `max_speed`.
    pub fn effective_period(&self) -> f64 {
        match self.max_speed {
            Some(v) if self.kind != TrajectoryKind::Hover => 2.0 * PI * self.path_speed_gain() / v,
            _ => self.period,
        }
    }

    /// Peak speed once the ramp-in is over.
    pub fn peak_speed(&self) -> f64 {
        if self.kind == TrajectoryKind::Hover {
            return 0.0;
        }
        self.path_speed_gain() * 2.0 * PI / self.effective_period()
    }

    /// Precompute the flown period.
    pub fn build(&self) -> Trajectory {
        Trajectory {
            spec: *self,
            period: self.effective_period(),
        }
    }

    pub fn setpoint(&self, t: f64) -> TrajectorySetpoint {
        self.build().setpoint(t)
    }
}

/// A spec with its flown period resolved.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Trajectory {
    pub spec: TrajectorySpec,
    pub period: f64,
}

impl Trajectory {
    /// Phase and its first three time derivatives.
    fn phase(&self, t: f64) -> [f64; 4] {
        let period = self.period;
        let w = 2.0 * PI / period;
        if t >= period {
            return [w * t - PI, w, 0.0, 0.0];
        }
        let x = t / period;
        let x2 = x * x;
        let x3 = x2 * x;
        // s = 6x^5 - 15x^4 + 10x^3 and its integral, first and second derivative.
        let integral = x3 * x3 - 3.0 * x3 * x2 + 2.5 * x2 * x2;
        let s = x3 * (6.0 * x2 - 15.0 * x + 10.0);
        let ds = 30.0 * x2 * (1.0 - x) * (1.0 - x);
        let dds = 60.0 * x * (1.0 - x) * (1.0 - 2.0 * x);
        [
            w * period * integral,
            w * s,
            w * ds / period,
            w * dds / (period * period),
        ]
    }

    pub fn setpoint(&self, t: f64) -> TrajectorySetpoint {
        let spec = &self.spec;
        let t = t.max(0.0);
        if spec.kind == TrajectoryKind::Hover {
            let mut sp = TrajectorySetpoint::hover(spec.center);
            sp.yaw = wrap_angle(spec.yaw);
            return sp;
        }
        let [th, th1, th2, th3] = self.phase(t);
        let [f0, f1, f2, f3] = spec.shape(th);
        let velocity = f1 * th1;
        let acceleration = f2 * th1 * th1 + f1 * th2;
        let jerk = f3 * th1.powi(3) + f2 * (3.0 * th1 * th2) + f1 * th3;

        let (yaw, yaw_rate) = match spec.yaw_mode {
            YawMode::Fixed => (wrap_angle(spec.yaw), 0.0),
            YawMode::Tangent => {
                let n2 = f1.x * f1.x + f1.y * f1.y;
                if n2 > 1e-12 {
                    let rate = (f1.x * f2.y - f1.y * f2.x) / n2 * th1;
                    (wrap_angle(f1.y.atan2(f1.x)), rate)
                } else {
                    (wrap_angle(spec.yaw), 0.0)
                }
            }
        };

        TrajectorySetpoint {
            position: spec.center + f0,
            velocity,
            acceleration,
            jerk,
            yaw,
            yaw_rate,
            b3_dot: b3_rate(&acceleration, &jerk),
        }
    }
}

/// Rate of `(a + g e3) / |a + g e3|` for standard gravity.
fn b3_rate(acceleration: &Vector3<f64>, jerk: &Vector3<f64>) -> Vector3<f64> {
    let n = acceleration + Vector3::new(0.0, 0.0, 9.81);
    let norm = n.norm();
    let b3 = n / norm;
    (jerk - b3 * b3.dot(jerk)) / norm
}

//! Ready-made scenarios for the standard experiments.
//!
//! Noise levels and disturbance magnitudes here are simulation choices, not
//! measured values.

use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::trajectory::TrajectorySpec;

use super::config::{DamageEvent, DisturbanceWindow, ScenarioConfig};

pub const GRID_PERIODS: [f64; 3] = [12.0, 8.0, 5.0];
pub const GRID_DAMAGE: [f64; 4] = [0.0, 0.2, 0.4, 0.6];
pub const ELLIPSE_RADII: [f64; 3] = [1.0, 0.6, 0.1];

/// Names accepted by [`by_name`].
pub const NAMES: [&str; 8] = [
    "hover",
    "grid",
    "hover-damage",
    "transition",
    "wind-hover",
    "figure-eight",
    "dual-damage",
    "ft-hover",
];

fn center() -> Vector3<f64> {
    Vector3::new(0.0, 0.0, 1.0)
}

fn single(time: f64, rotor: usize, level: f64) -> Vec<DamageEvent> {
    if level <= 0.0 {
        return Vec::new();
    }
    vec![DamageEvent {
        time,
        rotor,
        kf_ratio: 1.0 - level,
    }]
}

fn on_off(l1: bool) -> &'static str {
    if l1 {
        "on"
    } else {
        "off"
    }
}

/// Small unmodelled airframe effects: downwash drag on the arms and a
/// centre of mass off the geometric centre.
pub fn airframe_bias() -> DisturbanceWindow {
    DisturbanceWindow {
        force_body: Vector3::new(0.0, 0.0, -0.2),
        moment_body: Vector3::new(-0.003, 0.003, 0.0),
        ..DisturbanceWindow::default()
    }
}

/// Steady crosswind of roughly 3 m/s: drag, a gust component, and the
/// moment from the offset centre of pressure.
pub fn wind(start: f64) -> DisturbanceWindow {
    DisturbanceWindow {
        start,
        end: None,
        force_body: Vector3::zeros(),
        force_world: Vector3::new(0.6, 0.0, -0.9),
        moment_body: Vector3::new(0.015, 0.03, 0.0),
        gust_amplitude: Vector3::new(0.18, 0.0, 0.0),
        gust_frequency: 0.5,
    }
}

pub fn hover() -> ScenarioConfig {
    ScenarioConfig {
        name: "hover".into(),
        trajectory: TrajectorySpec::hover(center()),
        ..ScenarioConfig::default()
    }
}

pub fn ellipse(period: f64) -> ScenarioConfig {
    ScenarioConfig {
        name: format!("ellipse-p{period}"),
        trajectory: TrajectorySpec::ellipse(center(), Vector3::from(ELLIPSE_RADII), period),
        duration: 3.0 * period,
        ..ScenarioConfig::default()
    }
}

/// One grid cell: an ellipse flown with a pre-damaged rotor 1.
pub fn grid_cell(period: f64, level: f64, l1: bool) -> ScenarioConfig {
    let base = ellipse(period);
    ScenarioConfig {
        name: format!("grid-p{period}-d{:.0}-l1{}", level * 100.0, on_off(l1)),
        l1_enabled: l1,
        supervisor_enabled: false,
        damage: single(0.0, 1, level),
        disturbance: vec![airframe_bias()],
        ..base
    }
}

/// Every period, damage level and L1 setting.
pub fn speed_damage_grid() -> Vec<ScenarioConfig> {
    let mut out = Vec::new();
    for p in GRID_PERIODS {
        for d in GRID_DAMAGE {
            for l1 in [true, false] {
                out.push(grid_cell(p, d, l1));
            }
        }
    }
    out
}

/// Hover with damage applied at 1 s, across `levels`, L1 on and off.
pub fn hover_damage(levels: &[f64]) -> Vec<ScenarioConfig> {
    let mut out = Vec::new();
    for &d in levels {
        for l1 in [true, false] {
            out.push(ScenarioConfig {
                name: format!("hover-damage-d{:.0}-l1{}", d * 100.0, on_off(l1)),
                l1_enabled: l1,
                supervisor_enabled: false,
                damage: single(1.0, 1, d),
                ..hover()
            });
        }
    }
    out
}

pub fn hover_damage_default() -> Vec<ScenarioConfig> {
    hover_damage(&[0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
}

/// Damage estimation with the supervisor off, so the estimate settles.
pub fn estimation(mut base: ScenarioConfig, damage: Vec<DamageEvent>) -> ScenarioConfig {
    let start = damage.first().map_or(0.0, |d| d.time);
    base.name = format!("{}-estimate", base.name);
    base.supervisor_enabled = false;
    base.damage = damage;
    base.duration = base.duration.max(start + 10.0);
    base
}

/// Hover trials with rotor 2 damaged at 2 s, one per seed.
pub fn transition_trials(level: f64, trials: u64) -> Vec<ScenarioConfig> {
    (0..trials)
        .map(|seed| ScenarioConfig {
            name: format!("transition-d{:.0}-s{seed}", level * 100.0),
            seed,
            duration: 6.0,
            damage: single(2.0, 2, level),
            ..hover()
        })
        .collect()
}

pub fn wind_hover() -> ScenarioConfig {
    ScenarioConfig {
        name: "wind-hover".into(),
        duration: 20.0,
        disturbance: vec![wind(1.0)],
        ..hover()
    }
}

/// 1:2 figure-eight with a 3 m/s peak speed, flown in wind.
pub fn figure_eight() -> ScenarioConfig {
    let trajectory = TrajectorySpec::figure_eight(center(), Vector3::new(2.0, 1.0, 0.0), 3.0);
    ScenarioConfig {
        name: "figure-eight".into(),
        duration: 4.0 * trajectory.effective_period(),
        trajectory,
        disturbance: vec![wind(0.0)],
        ..ScenarioConfig::default()
    }
}

/// Circle of radius 1 m at 0.5 m/s with rotors `a` and `b` losing 30 % and
/// 20 % at 2 s. `integral` swaps L1 for the integral baseline.
pub fn dual_damage(a: usize, b: usize, integral: bool) -> ScenarioConfig {
    ScenarioConfig {
        name: format!("dual-{a}{b}-{}", if integral { "integral" } else { "l1" }),
        trajectory: TrajectorySpec::circle(center(), 1.0, 2.0 * PI / 0.5),
        duration: 30.0,
        supervisor_enabled: false,
        l1_enabled: !integral,
        baseline_integral: integral,
        damage: vec![
            DamageEvent {
                time: 2.0,
                rotor: a,
                kf_ratio: 0.7,
            },
            DamageEvent {
                time: 2.0,
                rotor: b,
                kf_ratio: 0.8,
            },
        ],
        ..ScenarioConfig::default()
    }
}

/// Rotor 2 loses 80 % at 2 s; the run lasts long enough for 12 s of
/// fault-tolerant flight.
pub fn ft_hover() -> ScenarioConfig {
    ScenarioConfig {
        name: "ft-hover".into(),
        duration: 15.0,
        damage: single(2.0, 2, 0.8),
        ..hover()
    }
}

pub fn by_name(name: &str) -> Option<Vec<ScenarioConfig>> {
    Some(match name {
        "hover" => vec![hover()],
        "grid" => speed_damage_grid(),
        "hover-damage" => hover_damage_default(),
        "transition" => [0.3, 0.4, 0.5].iter().flat_map(|&d| transition_trials(d, 40)).collect(),
        "wind-hover" => vec![wind_hover()],
        "figure-eight" => vec![figure_eight()],
        "dual-damage" => vec![dual_damage(2, 3, false), dual_damage(2, 3, true)],
        "ft-hover" => vec![ft_hover()],
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for name in NAMES {
            for cfg in by_name(name).unwrap() {
                cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", cfg.name));
            }
        }
        assert!(by_name("nope").is_none());
    }

    #[test]
    fn grid_shape() {
        let t = speed_damage_grid();
        assert_eq!(t.len(), 24);
        assert_eq!(t.iter().filter(|c| c.l1_enabled).count(), 12);
        assert!(t.iter().all(|c| !c.supervisor_enabled));
    }

    #[test]
    fn ellipse_speeds() {
        for (p, v) in [(12.0, 0.524), (8.0, 0.785), (5.0, 1.257)] {
            assert!((ellipse(p).trajectory.peak_speed() - v).abs() < 1e-3);
        }
    }
}

//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::time::Instant;

use nalgebra::{Matrix3x4, SMatrix, SVector, UnitQuaternion, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rotorsim::control::geometric::{desired_attitude, desired_omega, tilt_quaternion, yaw_of};
use rotorsim::control::Allocator;
use rotorsim::damage::solve_damage;
use rotorsim::dynamics::{
    self, DamageProfile, ExternalDisturbance, MotorSpeeds, RigidBodyState, VehicleParams, Wrench,
};
use rotorsim::harness::presets;
use rotorsim::harness::{rmse_between, run, sweep, DamageEvent, DisturbanceWindow, Row, ScenarioConfig};
use rotorsim::sensor::NoiseConfig;
use rotorsim::trajectory::TrajectorySpec;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

// 1. Closed-form constrained least squares against a KKT solve.

fn kkt_oracle(a: &Matrix3x4<f64>, b: &Vector3<f64>, d: &Vector4<f64>) -> Vector4<f64> {
    // Work in units of d so both blocks have comparable scale.
    let s = d.amax();
    let mut m = SMatrix::<f64, 7, 7>::zeros();
    let mut rhs = SVector::<f64, 7>::zeros();
    for i in 0..4 {
        m[(i, i)] = 2.0;
        rhs[i] = 2.0 * d[i] / s;
    }
    let row_scale: Vec<f64> = (0..3).map(|r| a.row(r).amax()).collect();
    for r in 0..3 {
        for c in 0..4 {
            let v = a[(r, c)] / row_scale[r];
            m[(4 + r, c)] = v;
            m[(c, 4 + r)] = v;
        }
        rhs[4 + r] = b[r] / row_scale[r] / s;
    }
    let x = m.lu().solve(&rhs).expect("KKT system is nonsingular");
    Vector4::new(x[0], x[1], x[2], x[3]) * s
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let p = VehicleParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_rel, mut worst_res) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let mut a = Matrix3x4::zeros();
        for i in 0..4 {
            let w2 = rng.random_range(200.0..900.0f64).powi(2);
            a[(0, i)] = w2;
            a[(1, i)] = p.arm_x * [1.0, 1.0, -1.0, -1.0][i] * w2;
            a[(2, i)] = p.arm_y * [-1.0, 1.0, 1.0, -1.0][i] * w2;
        }
        let k_true = Vector4::from_fn(|_, _| p.kf_model * rng.random_range(0.3..1.0));
        let b = a * k_true;
        let d = Vector4::from_fn(|_, _| p.kf_model * rng.random_range(0.3..1.2));
        let k = solve_damage(&a, &b, &d).expect("feasible instance");
        let oracle = kkt_oracle(&a, &b, &d);
        worst_rel = worst_rel.max((k - oracle).norm() / oracle.norm());
        let res = (a * k - b).component_div(&b.abs().map(|x| x.max(f64::MIN_POSITIVE)));
        worst_res = worst_res.max(res.amax());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_rel <= 1e-9 && worst_res <= 1e-9 && secs < 5.0,
        format!("1000 instances, max rel err {worst_rel:.1e}, max rel residual {worst_res:.1e}, {secs:.2} s"),
    )
}

// 2. Disturbance recovery by the filtered estimate.

fn disturbed_hover(l1: bool, noise: NoiseConfig, force_z: f64, moment_x: f64) -> Vec<Row> {
    let cfg = ScenarioConfig {
        duration: 8.0,
        l1_enabled: l1,
        supervisor_enabled: false,
        noise,
        disturbance: vec![DisturbanceWindow {
            start: 2.0,
            ..DisturbanceWindow::constant(Vector3::new(0.0, 0.0, force_z), Vector3::new(moment_x, 0.0, 0.0))
        }],
        ..presets::hover()
    };
    run(&cfg).expect("valid scenario").record.rows
}

/// Time after onset from which the channel stays within `tol` of `truth`.
fn settle_time(rows: &[Row], channel: usize, truth: f64, onset: f64, tol: f64) -> Option<f64> {
    let mut settled = None;
    for r in rows.iter().filter(|r| r.t >= onset) {
        let inside = (r.sigma_filtered()[channel] - truth).abs() <= tol * truth.abs();
        match (inside, settled) {
            (true, None) => settled = Some(r.t - onset),
            (false, _) => settled = None,
            _ => {}
        }
    }
    settled
}

fn criterion_2() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    // (name, world force z, body moment x, sigma channel, expected sigma)
    for (name, fz, mx, ch, truth) in [
        ("force 0.5 N", -0.5, 0.0, 2, -0.5),
        ("moment 0.01 N m", 0.0, 0.01, 3, 0.01),
    ] {
        let rows = disturbed_hover(true, NoiseConfig::none(), fz, mx);
        let settle = settle_time(&rows, ch, truth, 2.0, 0.02);
        let on = norm3(rmse_between(&disturbed_hover(true, NoiseConfig::default(), fz, mx), 4.0, 8.0).unwrap());
        let off = norm3(rmse_between(&disturbed_hover(false, NoiseConfig::default(), fz, mx), 4.0, 8.0).unwrap());
        let ok = settle.is_some_and(|s| s <= 1.0) && off >= 2.0 * on;
        pass &= ok;
        parts.push(format!(
            "{name}: within 2% after {}, rmse on {on:.1e} / off {off:.1e}",
            settle.map_or("never".into(), |s| format!("{s:.3} s"))
        ));
    }
    outcome(pass, parts.join("; "))
}

// 3. Tracking ordering over speed and damage.

fn criterion_3() -> Outcome {
    let configs: Vec<ScenarioConfig> = presets::speed_damage_grid()
        .into_iter()
        .filter(|c| c.damage_level() <= 0.4 + 1e-9)
        .collect();
    let table = sweep(&configs).expect("non-empty sweep");
    let rmse = |period: f64, level: f64, l1: bool| -> [f64; 3] {
        let row = table
            .rows
            .iter()
            .find(|r| r.period == period && (r.damage_level - level).abs() < 1e-9 && r.l1_enabled == l1)
            .expect("grid cell");
        [
            row.rmse_x.unwrap_or(f64::INFINITY),
            row.rmse_y.unwrap_or(f64::INFINITY),
            row.rmse_z.unwrap_or(f64::INFINITY),
        ]
    };
    let levels = [0.0, 0.2, 0.4];
    let (mut on_below_off, mut off_increasing, mut on_flat) = (true, true, true);
    let mut worst_on_ratio = 0.0f64;
    for p in presets::GRID_PERIODS {
        for (li, &d) in levels.iter().enumerate() {
            let (on, off) = (rmse(p, d, true), rmse(p, d, false));
            let on0 = rmse(p, 0.0, true);
            for ax in 0..3 {
                on_below_off &= on[ax] < off[ax];
                worst_on_ratio = worst_on_ratio.max(on[ax] / on0[ax]);
                on_flat &= on[ax] <= 2.0 * on0[ax];
                if li > 0 {
                    off_increasing &= off[ax] > rmse(p, levels[li - 1], false)[ax];
                }
            }
        }
    }
    let p5 = (rmse(5.0, 0.4, true), rmse(5.0, 0.4, false));
    outcome(
        on_below_off && off_increasing && on_flat,
        format!(
            "18 runs; on<off everywhere: {on_below_off}; off increasing: {off_increasing}; \
             on within 2x of undamaged: {on_flat} (worst {worst_on_ratio:.2}x); 5 s period at 40%: on {:.4?} off {:.4?}",
            p5.0, p5.1
        ),
    )
}

// 4. Estimation accuracy against the injected truth.

fn estimate_error(base: ScenarioConfig, damage: Vec<DamageEvent>) -> f64 {
    let cfg = presets::estimation(base, damage);
    run(&cfg).expect("valid scenario").summary.estimate_error()
}

fn damage_at(time: f64, list: &[(usize, f64)]) -> Vec<DamageEvent> {
    list.iter()
        .map(|&(rotor, level)| DamageEvent {
            time,
            rotor,
            kf_ratio: 1.0 - level,
        })
        .collect()
}

fn criterion_4() -> Outcome {
    let mut single = 0.0f64;
    for level in [0.2, 0.4, 0.6] {
        single = single.max(estimate_error(presets::hover(), damage_at(2.0, &[(1, level)])));
        let ellipse = ScenarioConfig {
            duration: 20.0,
            ..presets::ellipse(5.0)
        };
        single = single.max(estimate_error(ellipse, damage_at(5.0, &[(3, level)])));
    }
    let adjacent = estimate_error(presets::hover(), damage_at(2.0, &[(2, 0.3), (3, 0.2)]));
    let diagonal = estimate_error(presets::hover(), damage_at(2.0, &[(1, 0.3), (3, 0.2)]));
    let dual = adjacent.max(diagonal);
    outcome(
        single <= 0.02 && dual <= 0.03,
        format!(
            "single-rotor worst {:.2} points (limit 2); dual adjacent {:.2}, diagonal {:.2} points (limit 3)",
            single * 100.0,
            adjacent * 100.0,
            diagonal * 100.0
        ),
    )
}

// 5. Supervisor transitions.

fn criterion_5() -> Outcome {
    let severe = run(&presets::transition_trials(0.8, 1)[0])
        .expect("valid scenario")
        .summary;
    let latency = severe.transition.as_ref().and_then(|t| t.latency);
    let right_rotor = severe.transition.as_ref().is_some_and(|t| t.rotor == 2);
    let fast = latency.is_some_and(|l| l <= 0.5) && right_rotor;

    let count = |level: f64| -> usize {
        let table = sweep(&presets::transition_trials(level, 20)).expect("non-empty sweep");
        table.rows.iter().filter(|r| r.transition_time.is_some()).count()
    };
    let at30 = count(0.3);
    let at50 = count(0.5);

    let clean = [
        presets::hover(),
        presets::wind_hover(),
        presets::figure_eight(),
        presets::ellipse(5.0),
    ];
    let table = sweep(&clean).expect("non-empty sweep");
    let false_alarms = table.rows.iter().filter(|r| r.transition_time.is_some()).count();
    let wind_peak = run(&presets::wind_hover())
        .expect("valid scenario")
        .record
        .rows
        .iter()
        .flat_map(|r| r.k_mis())
        .fold(0.0, f64::max);

    outcome(
        fast && at30 == 0 && at50 >= 19 && false_alarms == 0,
        format!(
            "80%: rotor {} after {}; 30%: {at30}/20; 50%: {at50}/20; undamaged false transitions {false_alarms}/4 \
             (wind peak estimate {:.0}%)",
            severe.transition.as_ref().map_or(0, |t| t.rotor),
            latency.map_or("never".into(), |l| format!("{l:.3} s")),
            wind_peak * 100.0
        ),
    )
}

// 6. Flight with one rotor off.

fn criterion_6() -> Outcome {
    let out = run(&presets::ft_hover()).expect("valid scenario");
    let Some(tr) = out.summary.transition.clone() else {
        return outcome(false, "no transition".into());
    };
    let end = tr.time + 12.0;
    let rmse = rmse_between(&out.record.rows, tr.time, end).unwrap_or([f64::INFINITY; 3]);
    // Allow the spin to build up before requiring it.
    let min_spin = out
        .record
        .rows
        .iter()
        .filter(|r| r.t > tr.time + 2.0 && r.t <= end)
        .map(|r| r.wz.abs())
        .fold(f64::INFINITY, f64::min);
    let flown = out.summary.flown - tr.time;
    outcome(
        rmse.iter().all(|&e| e < 0.3) && min_spin > 5.0 && flown >= 12.0,
        format!(
            "{flown:.1} s after transition, rmse {:.3?} m, |yaw rate| >= {min_spin:.1} rad/s after spin-up",
            rmse
        ),
    )
}

// 7. Numerical kernels.

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let p = VehicleParams::default();
    let mut fails = Vec::new();

    // Tilt and yaw composition.
    let mut quat_err = 0.0f64;
    for _ in 0..10_000 {
        let b3 = loop {
            let v = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-0.95..1.0),
            );
            if v.norm() > 0.1 {
                break v.normalize();
            }
        };
        let yaw = rng.random_range(-3.1..3.1);
        let qt = tilt_quaternion(&b3).unwrap();
        let qd = desired_attitude(&b3, yaw).unwrap();
        quat_err = quat_err
            .max((qt * Vector3::z() - b3).norm())
            .max((qd * Vector3::z() - b3).norm())
            .max((qd.quaternion().norm() - 1.0).abs());
        if b3.z > 0.5 {
            quat_err = quat_err.max(rotorsim::control::geometric::wrap_angle(yaw_of(&qd).unwrap() - yaw).abs() * 1e-3);
        }
    }
    if quat_err > 1e-9 {
        fails.push(format!("quaternion {quat_err:.1e}"));
    }

    // Angular velocity from a quaternion rate against a rotation finite difference.
    let mut omega_err = 0.0f64;
    for _ in 0..1000 {
        let q = UnitQuaternion::from_euler_angles(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-3.0..3.0),
        );
        let w = Vector3::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
        );
        let h = 1e-6;
        let q_next = q * UnitQuaternion::from_scaled_axis(w * h);
        let q_dot = (q_next.quaternion() - q.quaternion()) / h;
        omega_err = omega_err.max((desired_omega(&q, &q_dot) - w).norm());
    }
    if omega_err > 1e-4 {
        fails.push(format!("quaternion rate {omega_err:.1e}"));
    }

    // Allocation round trip.
    let alloc = Allocator::new(&p).unwrap();
    let mut alloc_err = 0.0f64;
    for _ in 0..10_000 {
        let speeds = MotorSpeeds(std::array::from_fn(|_| rng.random_range(100.0..900.0)));
        let w = dynamics::true_wrench(&speeds, &p, &DamageProfile::undamaged());
        let back = alloc.allocate(&w).speeds;
        for i in 0..4 {
            alloc_err = alloc_err.max((back[i] - speeds[i]).abs() / speeds[i]);
        }
    }
    if alloc_err > 1e-9 {
        fails.push(format!("allocation {alloc_err:.1e}"));
    }

    // Hover is a fixed point; free fall is ballistic.
    let mut s = RigidBodyState::at_rest(Vector3::new(0.0, 0.0, 1.0));
    let hover = MotorSpeeds::uniform(p.hover_speed());
    for _ in 0..10_000 {
        s = dynamics::step(
            &s,
            &hover,
            &p,
            &DamageProfile::undamaged(),
            &ExternalDisturbance::NONE,
            1e-3,
        )
        .unwrap();
    }
    let drift = (s.position - Vector3::new(0.0, 0.0, 1.0)).norm() + s.velocity.norm() + s.angular_velocity.norm();
    let mut s = RigidBodyState::at_rest(Vector3::zeros());
    s.velocity = Vector3::new(1.0, -2.0, 3.0);
    for _ in 0..2000 {
        s = dynamics::step_with_wrench(&s, &Wrench::default(), &p, &ExternalDisturbance::NONE, 1e-3).unwrap();
    }
    let exact = Vector3::new(2.0, -4.0, 6.0 - 0.5 * p.gravity * 4.0);
    let ballistic = (s.position - exact).norm();
    if drift > 1e-9 || ballistic > 1e-9 {
        fails.push(format!("dynamics drift {drift:.1e} ballistic {ballistic:.1e}"));
    }

    // Trajectory derivatives.
    let c = Vector3::new(0.0, 0.0, 1.0);
    let kinds = [
        TrajectorySpec::ellipse(c, Vector3::new(1.0, 0.6, 0.1), 5.0),
        TrajectorySpec::circle(c, 1.0, 8.0),
        TrajectorySpec::figure_eight(c, Vector3::new(2.0, 1.0, 0.0), 3.0),
    ];
    let mut traj_err = 0.0f64;
    for spec in kinds {
        let tr = spec.build();
        for _ in 0..1000 {
            let t = rng.random_range(0.0..3.0 * tr.period);
            let h = 1e-5;
            let (m, sp, pl) = (tr.setpoint(t - h), tr.setpoint(t), tr.setpoint(t + h));
            traj_err = traj_err
                .max(((pl.position - m.position) / (2.0 * h) - sp.velocity).norm())
                .max(((pl.velocity - m.velocity) / (2.0 * h) - sp.acceleration).norm());
        }
    }
    if traj_err > 1e-6 {
        fails.push(format!("trajectory {traj_err:.1e}"));
    }

    let secs = start.elapsed().as_secs_f64();
    if secs > 60.0 {
        fails.push(format!("took {secs:.1} s"));
    }
    outcome(
        fails.is_empty(),
        format!(
            "quaternion {quat_err:.1e}, rate {omega_err:.1e}, allocation {alloc_err:.1e}, hover drift {drift:.1e}, \
             ballistic {ballistic:.1e}, trajectory {traj_err:.1e}, {secs:.2} s{}",
            if fails.is_empty() {
                String::new()
            } else {
                format!("; failed: {}", fails.join(", "))
            }
        ),
    )
}

// 8. Integral compensator as the estimation front end.

fn criterion_8() -> Outcome {
    let l1 = run(&presets::dual_damage(2, 3, false)).expect("valid scenario").summary;
    let integral = run(&presets::dual_damage(2, 3, true)).expect("valid scenario").summary;
    let (e_l1, e_int) = (l1.estimate_error(), integral.estimate_error());
    outcome(
        e_int >= 2.0 * e_l1,
        format!(
            "worst per-rotor error: L1 {:.2} points, integral {:.2} points ({:.1}x)",
            e_l1 * 100.0,
            e_int * 100.0,
            e_int / e_l1
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("constrained least squares matches KKT oracle", criterion_1),
        ("disturbance recovery and L1 tracking gain", criterion_2),
        ("tracking order over speed and damage", criterion_3),
        ("damage estimation accuracy", criterion_4),
        ("fault-tolerant transition behaviour", criterion_5),
        ("flight with one rotor disabled", criterion_6),
        ("numerical kernels", criterion_7),
        ("integral baseline estimation contrast", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {}: {name}: {}", i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

//! Closed-loop simulation of one scenario.
//!
//! The plant steps at `sim_dt`; every `control_dt` the controllers read a
//! noisy measurement and the motor command is held until the next tick.

use nalgebra::Vector3;

use crate::control::allocation::clip_squared;
use crate::control::{Allocation, Allocator, GeometricController, IntegralBaseline};
use crate::damage::{DamageEstimate, DamageEstimator, DamageObservation};
use crate::dynamics::{self, DamageProfile, ExternalDisturbance, MotorSpeeds, RigidBodyState, Wrench, NUM_ROTORS};
use crate::error::{Error, Result};
use crate::fault_tolerant::{supervise, FaultTolerantController, Mode, SupervisorState};
use crate::l1::{L1Adaptation, L1Output};
use crate::sensor::{Measurement, Sensor};
use crate::trajectory::Trajectory;

use super::config::{InjectionMode, ScenarioConfig};
use super::record::{Event, EventKind, Row, RunRecord, SCHEMA_VERSION};
use super::report::{summarize_rows, RunStatus, SummaryReport, TransitionInfo};

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub record: RunRecord,
    pub summary: SummaryReport,
}

impl RunOutput {
    pub fn save(&self, dir: &std::path::Path) -> Result<()> {
        self.record.save(dir)?;
        self.summary.save(&dir.join("summary.json"))
    }
}

/// Everything that evolves during a run.
struct Simulation<'a> {
    cfg: &'a ScenarioConfig,
    trajectory: Trajectory,
    state: RigidBodyState,
    plant_damage: DamageProfile,
    /// Per-rotor speed scale for motor-corruption injection.
    motor_scale: [f64; NUM_ROTORS],
    /// Realized rotor speeds (differs from the command only with motor lag).
    motor_speeds: MotorSpeeds,
    sensor: Sensor,
    allocator: Allocator,
    geometric: GeometricController,
    l1: L1Adaptation,
    integral: IntegralBaseline,
    estimator: DamageEstimator,
    supervisor: SupervisorState,
    ft: Option<FaultTolerantController>,
    next_damage: usize,
    clipped: [bool; NUM_ROTORS],
    record: RunRecord,
    transition: Option<TransitionInfo>,
}

impl<'a> Simulation<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let trajectory = cfg.trajectory.build();
        let start = trajectory.setpoint(0.0);
        let mut state = RigidBodyState::at_rest(start.position);
        state.attitude = crate::control::geometric::yaw_quaternion(start.yaw);
        let mut l1 = L1Adaptation::new(cfg.l1)?;
        l1.reset(&state.velocity, &state.angular_velocity);
        let hover = MotorSpeeds::uniform(cfg.vehicle.hover_speed());
        Ok(Self {
            cfg,
            trajectory,
            state,
            plant_damage: DamageProfile::undamaged(),
            motor_scale: [1.0; NUM_ROTORS],
            motor_speeds: hover,
            sensor: Sensor::new(cfg.noise, cfg.seed),
            allocator: Allocator::new(&cfg.vehicle)?,
            geometric: GeometricController::new(cfg.gains, cfg.vehicle.clone(), cfg.control_dt),
            l1,
            integral: IntegralBaseline::new(cfg.integral),
            estimator: DamageEstimator::new(cfg.estimator, &cfg.vehicle),
            supervisor: SupervisorState::default(),
            ft: None,
            next_damage: 0,
            clipped: [false; NUM_ROTORS],
            record: RunRecord::default(),
            transition: None,
        })
    }

    fn event(&mut self, t: f64, kind: EventKind, rotor: usize, value: f64, detail: String) {
        self.record.events.push(Event {
            t,
            kind,
            rotor,
            value,
            detail,
        });
    }

    fn apply_due_damage(&mut self, t: f64) -> Result<()> {
        while let Some(ev) = self.cfg.damage.get(self.next_damage) {
            if ev.time > t + 1e-12 {
                break;
            }
            let i = ev.rotor - 1;
            match self.cfg.injection {
                InjectionMode::Propeller => {
                    self.plant_damage = self.plant_damage.with_rotor(i, ev.kf_ratio)?;
                }
                InjectionMode::Motor => self.motor_scale[i] = ev.kf_ratio.sqrt(),
            }
            self.event(
                t,
                EventKind::DamageApplied,
                ev.rotor,
                ev.kf_ratio,
                format!("{:?}", self.cfg.injection),
            );
            self.next_damage += 1;
        }
        Ok(())
    }

    fn disturbance(&self, t: f64) -> ExternalDisturbance {
        self.cfg
            .disturbance
            .iter()
            .fold(ExternalDisturbance::NONE, |acc, w| acc + w.at(t, &self.state.attitude))
    }

    fn true_mismatch(&self) -> [f64; NUM_ROTORS] {
        let kf = self.plant_damage.kf_ratio();
        std::array::from_fn(|i| 1.0 - kf[i] * self.motor_scale[i] * self.motor_scale[i])
    }

    fn note_clips(&mut self, t: f64, alloc: &Allocation) {
        for i in 0..NUM_ROTORS {
            if alloc.clipped[i] && !self.clipped[i] {
                self.event(t, EventKind::ClipOnset, i + 1, alloc.speeds[i], String::new());
            }
        }
        self.clipped = alloc.clipped;
    }

    fn enter_fault_tolerant(&mut self, t: f64, estimate: &DamageEstimate) -> Result<()> {
        let rotor = self
            .supervisor
            .disabled_rotor
            .ok_or_else(|| Error::Contract("transition without rotor".into()))?;
        self.l1.freeze();
        self.estimator.halt();
        self.ft = Some(FaultTolerantController::new(
            self.cfg.gains,
            self.cfg.ft,
            self.cfg.vehicle.clone(),
            rotor,
        )?);
        let first_damage = self.cfg.damage.first().map(|d| d.time);
        self.transition = Some(TransitionInfo {
            time: t,
            rotor: rotor + 1,
            estimate: estimate.k_mis,
            latency: first_damage.map(|d| t - d),
        });
        self.event(
            t,
            EventKind::Transition,
            rotor + 1,
            estimate.k_mis[rotor],
            format!("{:?}", estimate.k_mis),
        );
        log::info!("t = {t:.3}: fault-tolerant mode, rotor {} off", rotor + 1);
        Ok(())
    }

    /// One control tick: returns the rotor command to hold.
    fn control(&mut self, t: f64) -> Result<MotorSpeeds> {
        let cfg = self.cfg;
        let meas = self.sensor.measure(&self.state);
        let sp = self.trajectory.setpoint(t);
        let r = meas.rotation();

        let mut row = Row {
            t,
            pdx: sp.position.x,
            pdy: sp.position.y,
            pdz: sp.position.z,
            ..Row::default()
        };

        let (nominal, command, alloc_nom, alloc_cmd, l1_out) = if let Some(ft) = self.ft.as_mut() {
            let out = ft.compute(&meas, &sp)?;
            (
                out.wrench,
                out.wrench,
                out.allocation,
                out.allocation,
                L1Output::default(),
            )
        } else {
            let nominal = self.geometric.compute(&meas, &sp).wrench;
            let (augment, l1_out) = if cfg.l1_enabled {
                let out = self
                    .l1
                    .step(&meas.velocity, &meas.angular_velocity, &r, &nominal, &cfg.vehicle);
                (out.action.as_wrench(), out)
            } else if cfg.baseline_integral {
                let e_body = r.transpose() * (sp.velocity - meas.velocity);
                (self.integral.step(&e_body, cfg.control_dt), L1Output::default())
            } else {
                (Wrench::default(), L1Output::default())
            };
            let command = nominal + augment;
            let alloc_nom = self.allocator.allocate(&nominal);
            let alloc_cmd = self.allocator.allocate(&command);
            (nominal, command, alloc_nom, alloc_cmd, l1_out)
        };
        // The estimator compares what was asked for, before saturation hides it.
        let unsaturated = |w: &Wrench| clip_squared(&self.allocator.squared_speeds(w), f64::INFINITY).speeds;
        let observation = DamageObservation {
            omega_nom: unsaturated(&nominal),
            omega_l1: unsaturated(&command),
            wrench_nom: nominal,
        };

        let mut alloc_cmd = alloc_cmd;
        let mut command = command;
        let mut estimate = *self.estimator.latest();
        if self.ft.is_none() && cfg.estimation_enabled && (cfg.l1_enabled || cfg.baseline_integral) {
            estimate = self.estimator.update(&observation, &cfg.vehicle);
            if cfg.supervisor_enabled {
                self.supervisor = supervise(&estimate, &self.supervisor, &cfg.supervisor);
                if self.supervisor.mode == Mode::FaultTolerant {
                    self.enter_fault_tolerant(t, &estimate)?;
                    if let Some(ft) = self.ft.as_mut() {
                        let out = ft.compute(&meas, &sp)?;
                        alloc_cmd = out.allocation;
                        command = out.wrench;
                    }
                }
            }
        }
        self.note_clips(t, &alloc_cmd);

        fill_state(&mut row, &self.state);
        let s = &l1_out.sigma.0;
        let sf = &l1_out.sigma_filtered.0;
        row.f_nom = nominal.thrust;
        row.m1_nom = nominal.moment.x;
        row.m2_nom = nominal.moment.y;
        row.m3_nom = nominal.moment.z;
        row.f_cmd = command.thrust;
        row.m1_cmd = command.moment.x;
        row.m2_cmd = command.moment.y;
        row.m3_cmd = command.moment.z;
        [row.omega_nom1, row.omega_nom2, row.omega_nom3, row.omega_nom4] = alloc_nom.speeds.0;
        [row.omega_cmd1, row.omega_cmd2, row.omega_cmd3, row.omega_cmd4] = alloc_cmd.speeds.0;
        [row.sigma1, row.sigma2, row.sigma3, row.sigma4, row.sigma5, row.sigma6] = [s[0], s[1], s[2], s[3], s[4], s[5]];
        [
            row.sigma_f1,
            row.sigma_f2,
            row.sigma_f3,
            row.sigma_f4,
            row.sigma_f5,
            row.sigma_f6,
        ] = [sf[0], sf[1], sf[2], sf[3], sf[4], sf[5]];
        [row.kmis_raw1, row.kmis_raw2, row.kmis_raw3, row.kmis_raw4] = estimate.k_mis_raw;
        [row.kmis1, row.kmis2, row.kmis3, row.kmis4] = estimate.k_mis;
        row.mode = self.supervisor.mode;
        row.disabled_rotor = self.supervisor.disabled_rotor.map_or(0, |r| r + 1);
        row.clip_mask = alloc_cmd
            .clipped
            .iter()
            .enumerate()
            .fold(0u8, |m, (i, c)| if *c { m | (1 << i) } else { m });
        self.record.rows.push(row);

        Ok(alloc_cmd.speeds)
    }

    fn plant_step(&mut self, t: f64, command: &MotorSpeeds) -> Result<()> {
        let cfg = self.cfg;
        let tau = cfg.motor_time_constant;
        if tau > 0.0 {
            let k = -(-cfg.sim_dt / tau).exp_m1();
            for i in 0..NUM_ROTORS {
                self.motor_speeds.0[i] += k * (command[i] - self.motor_speeds[i]);
            }
        } else {
            self.motor_speeds = *command;
        }
        let applied = MotorSpeeds(std::array::from_fn(|i| self.motor_speeds[i] * self.motor_scale[i]));
        self.state = dynamics::step(
            &self.state,
            &applied,
            &cfg.vehicle,
            &self.plant_damage,
            &self.disturbance(t),
            cfg.sim_dt,
        )?;
        Ok(())
    }

    fn run(mut self) -> Result<RunOutput> {
        let cfg = self.cfg;
        let substeps = cfg.substeps();
        let total_steps = (cfg.duration / cfg.sim_dt).round() as u64;
        let mut status = RunStatus::Completed;
        let mut command = self.motor_speeds;
        let mut flown = 0.0;

        for k in 0..total_steps {
            let t = k as f64 * cfg.sim_dt;
            self.apply_due_damage(t)?;
            if k % substeps as u64 == 0 {
                command = self.control(t)?;
            }
            if let Err(e) = self.plant_step(t, &command) {
                let Error::IntegrationFault { .. } = e else {
                    return Err(e);
                };
                self.event(t, EventKind::IntegrationFault, 0, k as f64, e.to_string());
                status = RunStatus::IntegrationFault;
                break;
            }
            flown = (k + 1) as f64 * cfg.sim_dt;
            let error = (self.state.position - self.trajectory.setpoint(flown).position).norm();
            if error > cfg.divergence_threshold {
                let detail = Error::Divergence { time: flown, error }.to_string();
                log::warn!("{detail}");
                self.event(flown, EventKind::Divergence, 0, error, detail);
                status = RunStatus::Diverged;
                break;
            }
        }

        let warmup = cfg.effective_warmup();
        let (rmse, max_err, max_spin, mean) = summarize_rows(&self.record.rows, warmup);
        let summary = SummaryReport {
            schema_version: SCHEMA_VERSION,
            name: cfg.name.clone(),
            seed: cfg.seed,
            status,
            flown,
            warmup,
            rmse,
            rmse_mean: rmse.map(|r| (r[0] + r[1] + r[2]) / 3.0),
            max_position_error: max_err,
            true_mismatch: self.true_mismatch(),
            final_estimate: self.estimator.latest().k_mis,
            mean_estimate: mean,
            transition: self.transition,
            max_spin_ft: max_spin,
            clip_events: self.record.events_of(EventKind::ClipOnset).count(),
        };
        let mut record = self.record;
        if !cfg.record {
            record.rows = Vec::new();
        }
        Ok(RunOutput { record, summary })
    }
}

fn fill_state(row: &mut Row, s: &RigidBodyState) {
    let p: &Vector3<f64> = &s.position;
    [row.px, row.py, row.pz] = [p.x, p.y, p.z];
    [row.vx, row.vy, row.vz] = [s.velocity.x, s.velocity.y, s.velocity.z];
    let q = s.attitude.quaternion();
    [row.qw, row.qx, row.qy, row.qz] = [q.w, q.i, q.j, q.k];
    let w = &s.angular_velocity;
    [row.wx, row.wy, row.wz] = [w.x, w.y, w.z];
}

/// Run one scenario to completion, divergence, or integration fault.
///
/// Configuration problems are errors; divergence and integration faults are
/// reported through [`SummaryReport::status`] with the partial log kept.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput> {
    Simulation::new(cfg)?.run()
}

/// Measurement used by the controllers at a given state, exposed for tests.
pub fn exact_measurement(state: &RigidBodyState) -> Measurement {
    Measurement::exact(state)
}

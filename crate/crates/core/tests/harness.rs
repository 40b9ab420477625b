use rotorsim::harness::{
    presets, run, sweep, sweep_sequential, DamageEvent, EventKind, RunRecord, RunStatus, ScenarioConfig,
};
use rotorsim::sensor::NoiseConfig;

fn short_hover(duration: f64) -> ScenarioConfig {
    ScenarioConfig {
        duration,
        ..presets::hover()
    }
}

#[test]
fn same_seed_gives_identical_logs() {
    let cfg = ScenarioConfig {
        seed: 11,
        damage: vec![DamageEvent {
            time: 1.0,
            rotor: 3,
            kf_ratio: 0.6,
        }],
        ..short_hover(3.0)
    };
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a.record, b.record);
    assert_eq!(a.summary, b.summary);

    let other = run(&ScenarioConfig { seed: 12, ..cfg }).unwrap();
    assert_ne!(a.record.rows, other.record.rows);
}

#[test]
fn each_fault_is_logged_once_on_time() {
    let sim_dt = ScenarioConfig::default().sim_dt;
    let cfg = ScenarioConfig {
        supervisor_enabled: false,
        damage: vec![
            DamageEvent {
                time: 0.7003,
                rotor: 1,
                kf_ratio: 0.9,
            },
            DamageEvent {
                time: 1.5,
                rotor: 4,
                kf_ratio: 0.8,
            },
        ],
        ..short_hover(2.5)
    };
    let out = run(&cfg).unwrap();
    let applied: Vec<_> = out.record.events_of(EventKind::DamageApplied).collect();
    assert_eq!(applied.len(), 2);
    for (e, d) in applied.iter().zip(&cfg.damage) {
        assert_eq!(e.rotor, d.rotor);
        assert!((e.t - d.time).abs() <= sim_dt + 1e-12, "{} vs {}", e.t, d.time);
        assert!((e.value - d.kf_ratio).abs() < 1e-12);
    }
}

#[test]
fn saved_run_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&short_hover(2.2)).unwrap();
    out.save(dir.path()).unwrap();
    let rows = RunRecord::read_rows(std::fs::File::open(dir.path().join("run.csv")).unwrap()).unwrap();
    assert_eq!(rows, out.record.rows);
    let summary = rotorsim::harness::SummaryReport::load(&dir.path().join("summary.json")).unwrap();
    assert_eq!(summary, out.summary);
    let events = std::fs::read_to_string(dir.path().join("events.csv")).unwrap();
    assert!(events.starts_with("t,kind,rotor,value,detail"));
}

#[test]
fn foreign_log_is_rejected() {
    assert!(RunRecord::read_rows("t,px\n0,0\n".as_bytes()).is_err());
}

#[test]
fn clean_hover_stays_put() {
    let cfg = ScenarioConfig {
        noise: NoiseConfig::none(),
        ..short_hover(6.0)
    };
    let s = run(&cfg).unwrap().summary;
    assert_eq!(s.status, RunStatus::Completed);
    assert!(s.rmse.unwrap().iter().all(|&e| e < 1e-3), "{:?}", s.rmse);
    assert!(s.transition.is_none());
}

#[test]
fn record_off_keeps_the_summary() {
    let cfg = short_hover(3.0);
    let full = run(&cfg).unwrap();
    let quiet = run(&ScenarioConfig { record: false, ..cfg }).unwrap();
    assert!(quiet.record.rows.is_empty());
    assert_eq!(quiet.summary, full.summary);
}

#[test]
fn grid_sweep_has_one_row_per_cell() {
    let t = sweep(&presets::speed_damage_grid()).unwrap();
    assert_eq!(t.rows.len(), 24);
    assert_eq!(t.failures().count(), 0);
    assert!(t.rows.iter().all(|r| r.status == Some(RunStatus::Completed)));
    for l1 in [true, false] {
        assert_eq!(t.rmse_series(l1).len(), 12);
    }
}

#[test]
fn hover_error_grows_with_damage_without_l1() {
    let t = sweep(&presets::hover_damage(&[0.0, 0.2, 0.4, 0.6])).unwrap();
    let off = t.rmse_series(false);
    assert_eq!(off.len(), 4);
    assert!(off.windows(2).all(|w| w[1].1 > w[0].1), "{off:?}");
    // The augmentation removes most of the damage-induced error.
    let on = t.rmse_series(true);
    assert!(on.last().unwrap().1 < off.last().unwrap().1);
}

#[test]
fn transition_table_separates_light_and_heavy_damage() {
    let mut cfgs = presets::transition_trials(0.3, 5);
    cfgs.extend(presets::transition_trials(0.8, 5));
    let rates = sweep(&cfgs).unwrap().transition_rates();
    let counts: Vec<_> = rates.iter().map(|&(_, hits, n)| (hits, n)).collect();
    assert_eq!(counts, vec![(0, 5), (5, 5)]);
    assert!((rates[0].0 - 0.3).abs() < 1e-12 && (rates[1].0 - 0.8).abs() < 1e-12);
}

#[cfg(feature = "parallel")]
#[test]
fn parallel_and_sequential_sweeps_agree() {
    let cfgs: Vec<_> = (0..4)
        .map(|seed| ScenarioConfig {
            seed,
            ..short_hover(2.5)
        })
        .collect();
    let a = sweep_sequential(&cfgs).unwrap();
    let b = rotorsim::harness::sweep_parallel(&cfgs).unwrap();
    assert_eq!(a, b);
}

#[cfg(not(feature = "parallel"))]
#[test]
fn sequential_sweep_matches_single_runs() {
    let cfgs: Vec<_> = (0..2)
        .map(|seed| ScenarioConfig {
            seed,
            ..short_hover(2.5)
        })
        .collect();
    let t = sweep_sequential(&cfgs).unwrap();
    for (c, s) in cfgs.iter().zip(&t.summaries) {
        assert_eq!(s.as_ref().unwrap(), &run(c).unwrap().summary);
    }
}

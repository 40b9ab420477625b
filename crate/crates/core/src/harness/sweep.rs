//! Batch execution of independent scenarios.
//!
//! With the `parallel` feature the runs are spread over the rayon pool;
//! without it they run one after another. Both paths produce identical
//! tables because every run is seeded and shares nothing.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::ScenarioConfig;
use super::report::{RunStatus, SummaryReport};
use super::runner::run;

/// One line of the comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub name: String,
    pub seed: u64,
    pub damage_level: f64,
    pub l1_enabled: bool,
    pub baseline_integral: bool,
    pub period: f64,
    /// Empty when the run could not start.
    pub status: Option<RunStatus>,
    pub rmse_x: Option<f64>,
    pub rmse_y: Option<f64>,
    pub rmse_z: Option<f64>,
    pub rmse_mean: Option<f64>,
    pub estimate_error: Option<f64>,
    pub transition_time: Option<f64>,
    pub transition_rotor: Option<usize>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Aligned with `rows`; `None` where the run failed to start.
    pub summaries: Vec<Option<SummaryReport>>,
}

fn run_one(cfg: &ScenarioConfig) -> (SweepRow, Option<SummaryReport>) {
    let quiet = ScenarioConfig {
        record: false,
        ..cfg.clone()
    };
    let mut row = SweepRow {
        name: cfg.name.clone(),
        seed: cfg.seed,
        damage_level: cfg.damage_level(),
        l1_enabled: cfg.l1_enabled,
        baseline_integral: cfg.baseline_integral,
        period: cfg.trajectory.effective_period(),
        status: None,
        rmse_x: None,
        rmse_y: None,
        rmse_z: None,
        rmse_mean: None,
        estimate_error: None,
        transition_time: None,
        transition_rotor: None,
        error: None,
    };
    match run(&quiet) {
        Ok(out) => {
            let s = out.summary;
            row.status = Some(s.status);
            if let Some([x, y, z]) = s.rmse {
                (row.rmse_x, row.rmse_y, row.rmse_z) = (Some(x), Some(y), Some(z));
            }
            row.rmse_mean = s.rmse_mean;
            row.estimate_error = Some(s.estimate_error());
            row.transition_time = s.transition.as_ref().map(|t| t.time);
            row.transition_rotor = s.transition.as_ref().map(|t| t.rotor);
            (row, Some(s))
        }
        Err(e) => {
            log::warn!("{}: {e}", cfg.name);
            row.error = Some(e.to_string());
            (row, None)
        }
    }
}

fn collect(results: Vec<(SweepRow, Option<SummaryReport>)>) -> SweepTable {
    let (rows, summaries) = results.into_iter().unzip();
    SweepTable { rows, summaries }
}

fn check_nonempty(configs: &[ScenarioConfig]) -> Result<()> {
    if configs.is_empty() {
        return Err(Error::Configuration("sweep needs at least one scenario".into()));
    }
    Ok(())
}

/// Run every scenario on the calling thread.
pub fn sweep_sequential(configs: &[ScenarioConfig]) -> Result<SweepTable> {
    check_nonempty(configs)?;
    Ok(collect(configs.iter().map(run_one).collect()))
}

/// Run the scenarios on the rayon pool.
#[cfg(feature = "parallel")]
pub fn sweep_parallel(configs: &[ScenarioConfig]) -> Result<SweepTable> {
    use rayon::prelude::*;
    check_nonempty(configs)?;
    Ok(collect(configs.par_iter().map(run_one).collect()))
}

/// Parallel when the `parallel` feature is on, sequential otherwise.
pub fn sweep(configs: &[ScenarioConfig]) -> Result<SweepTable> {
    #[cfg(feature = "parallel")]
    return sweep_parallel(configs);
    #[cfg(not(feature = "parallel"))]
    return sweep_sequential(configs);
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `(damage level, mean-axis RMSE)` pairs for one controller setting,
    /// sorted by damage level.
    pub fn rmse_series(&self, l1_enabled: bool) -> Vec<(f64, f64)> {
        let mut s: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.l1_enabled == l1_enabled)
            .filter_map(|r| r.rmse_mean.map(|m| (r.damage_level, m)))
            .collect();
        s.sort_by(|a, b| a.0.total_cmp(&b.0));
        s
    }

    /// `(damage level, transitions, trials)` grouped by damage level.
    pub fn transition_rates(&self) -> Vec<(f64, usize, usize)> {
        let mut out: Vec<(f64, usize, usize)> = Vec::new();
        for r in self.rows.iter().filter(|r| r.status.is_some()) {
            let hit = usize::from(r.transition_time.is_some());
            match out.iter_mut().find(|e| (e.0 - r.damage_level).abs() < 1e-9) {
                Some(e) => {
                    e.1 += hit;
                    e.2 += 1;
                }
                None => out.push((r.damage_level, hit, 1)),
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    pub fn failures(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.error.is_some())
    }
}

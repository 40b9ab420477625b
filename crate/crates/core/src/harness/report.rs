use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::NUM_ROTORS;
use crate::error::{Error, Result};
use crate::fault_tolerant::Mode;

use super::record::Row;

/// Per-axis RMSE of `p - p_d` over rows with `t > warmup`.
pub fn rmse_report(rows: &[Row], warmup: f64) -> Result<[f64; 3]> {
    rmse_between(rows, warmup, f64::INFINITY)
}

/// Per-axis RMSE over rows with `start < t <= end`.
pub fn rmse_between(rows: &[Row], start: f64, end: f64) -> Result<[f64; 3]> {
    let mut sum = [0.0; 3];
    let mut n = 0usize;
    for r in rows.iter().filter(|r| r.t > start && r.t <= end) {
        for (s, e) in sum.iter_mut().zip(r.position_error()) {
            *s += e * e;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Domain(format!("no samples in ({start}, {end}]")));
    }
    Ok(sum.map(|s| (s / n as f64).sqrt()))
}

/// Mean of the filtered damage estimate over the last `window` seconds.
pub fn mean_estimate(rows: &[Row], window: f64) -> Result<[f64; NUM_ROTORS]> {
    let end = rows
        .last()
        .map(|r| r.t)
        .ok_or_else(|| Error::Domain("empty log".into()))?;
    let tail: Vec<&Row> = rows.iter().filter(|r| r.t > end - window).collect();
    let mut m = [0.0; NUM_ROTORS];
    for r in &tail {
        for (a, k) in m.iter_mut().zip(r.k_mis()) {
            *a += k;
        }
    }
    Ok(m.map(|x| x / tail.len() as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged,
    IntegrationFault,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionInfo {
    pub time: f64,
    /// 1-based.
    pub rotor: usize,
    pub estimate: [f64; NUM_ROTORS],
    /// Time since the first scheduled damage, if any.
    pub latency: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    pub status: RunStatus,
    /// Simulated time actually flown [s].
    pub flown: f64,
    pub warmup: f64,
    /// `None` when the run ended before the warmup did.
    pub rmse: Option<[f64; 3]>,
    pub rmse_mean: Option<f64>,
    pub max_position_error: f64,
    pub true_mismatch: [f64; NUM_ROTORS],
    /// Filtered estimate at the end of the run (or when estimation stopped).
    pub final_estimate: [f64; NUM_ROTORS],
    /// Filtered estimate averaged over the final second.
    pub mean_estimate: [f64; NUM_ROTORS],
    pub transition: Option<TransitionInfo>,
    /// Largest `|Omega_3|` seen in fault-tolerant mode [rad/s].
    pub max_spin_ft: f64,
    pub clip_events: usize,
}

impl SummaryReport {
    /// Largest absolute error of the averaged estimate against the truth.
    pub fn estimate_error(&self) -> f64 {
        self.mean_estimate
            .iter()
            .zip(self.true_mismatch)
            .map(|(e, t)| (e - t).abs())
            .fold(0.0, f64::max)
    }

    pub fn transitioned(&self) -> bool {
        self.transition.is_some()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Summary fields that only depend on the log.
pub(crate) fn summarize_rows(rows: &[Row], warmup: f64) -> (Option<[f64; 3]>, f64, f64, [f64; NUM_ROTORS]) {
    let rmse = rmse_report(rows, warmup).ok();
    let max_err = rows
        .iter()
        .map(|r| {
            let e = r.position_error();
            (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt()
        })
        .fold(0.0, f64::max);
    let max_spin = rows
        .iter()
        .filter(|r| r.mode == Mode::FaultTolerant)
        .map(|r| r.wz.abs())
        .fold(0.0, f64::max);
    let mean = mean_estimate(rows, 1.0).unwrap_or([0.0; NUM_ROTORS]);
    (rmse, max_err, max_spin, mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rows_with_error(f: impl Fn(f64) -> [f64; 3]) -> Vec<Row> {
        (0..=10_000)
            .map(|i| {
                let t = i as f64 * 0.002;
                let e = f(t);
                Row {
                    t,
                    px: 1.0 + e[0],
                    py: e[1],
                    pz: 2.0 + e[2],
                    pdx: 1.0,
                    pdz: 2.0,
                    ..Row::default()
                }
            })
            .collect()
    }

    #[test]
    fn perfect_tracking_is_zero() {
        assert_eq!(rmse_report(&rows_with_error(|_| [0.0; 3]), 1.0).unwrap(), [0.0; 3]);
    }

    #[test]
    fn constant_offset() {
        let r = rmse_report(&rows_with_error(|_| [0.1, 0.0, 0.0]), 1.0).unwrap();
        assert_relative_eq!(r[0], 0.1, epsilon = 1e-12);
        assert_eq!(r[1], 0.0);
    }

    #[test]
    fn sinusoid_rms_is_amplitude_over_root_two() {
        // Whole number of periods inside (warmup, end].
        let a = 0.3;
        let r = rmse_report(
            &rows_with_error(|t| [0.0, a * (2.0 * std::f64::consts::PI * t).sin(), 0.0]),
            0.0,
        )
        .unwrap();
        assert_relative_eq!(r[1], a / 2f64.sqrt(), max_relative = 1e-3);
    }

    #[test]
    fn empty_window_is_an_error() {
        assert!(rmse_report(&rows_with_error(|_| [0.0; 3]), 100.0).is_err());
    }
}

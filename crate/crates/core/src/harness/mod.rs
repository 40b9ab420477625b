//! Scenario configuration, closed-loop runs, logs, and reports.

pub mod config;
pub mod presets;
pub mod record;
pub mod report;
pub mod runner;
pub mod sweep;

pub use config::{DamageEvent, DisturbanceWindow, InjectionMode, ScenarioConfig};
pub use record::{Event, EventKind, Row, RunRecord, SCHEMA_VERSION};
pub use report::{mean_estimate, rmse_between, rmse_report, RunStatus, SummaryReport, TransitionInfo};
pub use runner::{run, RunOutput};
#[cfg(feature = "parallel")]
pub use sweep::sweep_parallel;
pub use sweep::{sweep, sweep_sequential, SweepRow, SweepTable};

//! Nominal tracking control: geometric SE(3) controller, wrench-to-rotor
//! allocation, and the integral compensator used as a comparison baseline.

pub mod allocation;
pub mod geometric;
pub mod integral;

pub use allocation::{allocate, Allocation, Allocator};
pub use geometric::{Gains, GeometricController, GeometricOutput, TrajectorySetpoint};
pub use integral::{IntegralBaseline, IntegralConfig};

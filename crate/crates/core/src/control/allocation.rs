use nalgebra::{Matrix4, Vector4};

use crate::dynamics::{MotorSpeeds, VehicleParams, Wrench, NUM_ROTORS};
use crate::error::{Error, Result};

/// Rotor speeds plus which rotors hit a limit.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Allocation {
    pub speeds: MotorSpeeds,
    /// `true` where the squared speed was negative or above `omega_max^2`.
    pub clipped: [bool; NUM_ROTORS],
}

impl Allocation {
    pub fn any_clipped(&self) -> bool {
        self.clipped.iter().any(|c| *c)
    }
}

/// Inverse of the nominal mixing matrix, computed once.
#[derive(Clone, Debug)]
pub struct Allocator {
    inverse: Matrix4<f64>,
    omega_max: f64,
}

impl Allocator {
    pub fn new(params: &VehicleParams) -> Result<Self> {
        let b = params.nominal_mixing_matrix();
        let sv = b.singular_values();
        if !(sv.min() > 1e-12 * sv.max()) {
            return Err(Error::Configuration("singular allocation matrix".into()));
        }
        let inverse = b
            .try_inverse()
            .ok_or_else(|| Error::Configuration("singular allocation matrix".into()))?;
        Ok(Self {
            inverse,
            omega_max: params.omega_max,
        })
    }

    /// Unclipped squared speeds.
    pub fn squared_speeds(&self, wrench: &Wrench) -> Vector4<f64> {
        self.inverse * wrench.as_vector()
    }

    pub fn allocate(&self, wrench: &Wrench) -> Allocation {
        let sq = self.squared_speeds(wrench);
        clip_squared(&sq, self.omega_max)
    }
}

/// Square roots of `sq` clamped into `[0, omega_max]`, with the clip mask.
pub fn clip_squared(sq: &Vector4<f64>, omega_max: f64) -> Allocation {
    let mut out = Allocation::default();
    let max_sq = omega_max * omega_max;
    for i in 0..NUM_ROTORS {
        let s = sq[i];
        out.clipped[i] = !(0.0..=max_sq).contains(&s);
        out.speeds.0[i] = s.clamp(0.0, max_sq).sqrt();
    }
    out
}

/// One-shot allocation with the nominal coefficients.
pub fn allocate(wrench: &Wrench, params: &VehicleParams) -> Result<Allocation> {
    let alloc = Allocator::new(params)?.allocate(wrench);
    if alloc.any_clipped() {
        log::debug!("allocation clipped rotors {:?}", alloc.clipped);
    }
    Ok(alloc)
}

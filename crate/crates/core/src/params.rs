//! Shared model parameters for experiments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpp::PassageSpec;

/// Default boundary margin: observables are measured only at points whose
/// distance to the box boundary exceeds this fraction of the half-width.
pub const DEFAULT_MARGIN: f64 = 0.1;

/// Giant-fraction floor below which a replica is treated as subcritical.
pub const SUBCRITICAL_FLOOR: f64 = 0.2;

/// A strictly positive, finite double (the validation most parameters need).
pub fn positive_finite(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

/// Volume of the unit ball in `d` dimensions, via the two-step recursion
/// v_1 = 2, v_2 = pi, v_d = v_{d-2} * 2 pi / d.
pub fn unit_ball_volume(d: usize) -> f64 {
    assert!(d >= 1, "dimension must be at least 1");
    let even = d.is_multiple_of(2);
    let mut dim = if even { 2 } else { 1 };
    let mut v = if even { std::f64::consts::PI } else { 2.0 };
    while dim < d {
        dim += 2;
        v *= 2.0 * std::f64::consts::PI / dim as f64;
    }
    v
}

/// Model parameters shared by graph-level experiments: intensity, disk
/// radius, dimension, observation half-width, passage law, and the boundary
/// margin fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub radius: f64,
    pub dim: usize,
    pub half_width: f64,
    pub passage: PassageSpec,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !positive_finite(self.lambda) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !positive_finite(self.radius) {
            return Err(Error::InvalidParameter(format!(
                "radius must be positive, got {}",
                self.radius
            )));
        }
        if self.dim < 2 {
            return Err(Error::InvalidParameter(format!(
                "dimension must be at least 2, got {}",
                self.dim
            )));
        }
        if !positive_finite(self.half_width) {
            return Err(Error::InvalidParameter(format!(
                "half_width must be positive, got {}",
                self.half_width
            )));
        }
        if !(0.0..0.5).contains(&self.margin) {
            return Err(Error::InvalidParameter(format!(
                "margin must lie in [0, 0.5), got {}",
                self.margin
            )));
        }
        self.passage.validate()
    }
}

//! Discrete six-band k.p operators on the channel grid.

pub mod bulk;
mod operator;

pub use operator::{vector_potential, link_flux, KpModel, KpOperator};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit vector for polar angle `theta` (from z) and azimuth `phi` (radians).
pub fn unit_vector(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

/// Magnetic field given by magnitude (T) and unit direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagneticField {
    pub magnitude: f64,
    pub direction: [f64; 3],
}

impl MagneticField {
    pub fn zero() -> Self {
        Self { magnitude: 0.0, direction: [0.0, 0.0, 1.0] }
    }

    pub fn new(magnitude: f64, direction: [f64; 3]) -> Result<Self> {
        let n = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n > 0.0) || !n.is_finite() || !magnitude.is_finite() {
            return Err(Error::InvalidInput("field direction must be a nonzero vector".into()));
        }
        Ok(Self { magnitude, direction: direction.map(|x| x / n) })
    }

    pub fn from_angles(magnitude: f64, theta: f64, phi: f64) -> Self {
        Self { magnitude, direction: unit_vector(theta, phi) }
    }

    pub fn from_vector(b: [f64; 3]) -> Self {
        let n = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            Self::zero()
        } else {
            Self { magnitude: n, direction: b.map(|x| x / n) }
        }
    }

    /// Polar and azimuthal angles (radians) of the direction.
    pub fn angles(&self) -> (f64, f64) {
        let [x, y, z] = self.direction;
        (z.clamp(-1.0, 1.0).acos(), y.atan2(x))
    }

    pub fn vector(&self) -> [f64; 3] {
        self.direction.map(|x| x * self.magnitude)
    }
}

/// Switches for the individual couplings of the k.p model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CouplingFlags {
    /// Vector potential acting on the envelopes.
    pub peierls: bool,
    pub bloch_zeeman: bool,
    pub strain: bool,
    /// Replaces gamma3 in the orbital magnetic-moment operator only.
    pub gamma3_override: Option<f64>,
}

impl Default for CouplingFlags {
    fn default() -> Self {
        Self { peierls: true, bloch_zeeman: true, strain: true, gamma3_override: None }
    }
}

impl CouplingFlags {
    pub fn bloch_only() -> Self {
        Self { peierls: false, ..Self::default() }
    }

    pub fn none() -> Self {
        Self { peierls: false, bloch_zeeman: false, strain: false, gamma3_override: None }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_roundtrip() {
        for &(t, p) in &[(0.3, 1.2), (2.0, -2.5), (1.0, 3.0)] {
            let f = MagneticField::from_angles(1.0, t, p);
            let n: f64 = f.direction.iter().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-14);
            let (t2, p2) = f.angles();
            assert!((t2 - t).abs() < 1e-12 && (p2 - p).abs() < 1e-12);
        }
    }
}

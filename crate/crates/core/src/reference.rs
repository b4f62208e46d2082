//! Closed-form and brute-force oracles.

use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmatrix::rabi_direct;
use crate::kp::{KpModel, KpOperator, MagneticField};
use crate::spectrum::{lowest_hole_states, Method, SolverOptions, SpinorField};

/// Largest operator handed to the dense oracle.
pub const DENSE_CAP: usize = 12_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleMethod {
    ClosedForm,
    DenseDiagonalization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub quantity: String,
    pub value: f64,
    pub method: OracleMethod,
}

/// Principal g-factors of a pure heavy-hole doublet.
pub fn pure_hh_g(kappa: f64) -> [f64; 3] {
    [0.0, 0.0, -6.0 * kappa]
}

/// Principal g-factors of a pure light-hole doublet.
pub fn pure_lh_g(kappa: f64) -> [f64; 3] {
    [-4.0 * kappa, -4.0 * kappa, -2.0 * kappa]
}

/// Envelope correction to the heavy-hole g_z of a thin box.
pub fn delta_gz(gamma1: f64, gamma2: f64, gamma3: f64) -> Result<f64> {
    let den = 3.0 * gamma1 + 10.0 * gamma2;
    if !(den > 0.0) {
        return Err(Error::DegenerateDenominator);
    }
    let pi4 = std::f64::consts::PI.powi(4);
    Ok(2f64.powi(17) * gamma3 * gamma3 / (81.0 * pi4 * den))
}

/// Full eigendecomposition (ascending eigenvalues, eigenvectors as columns).
pub fn dense_solve(op: &KpOperator) -> Result<(Vec<f64>, Mat<C64>)> {
    let n = op.dim();
    if n > DENSE_CAP {
        return Err(Error::DimensionTooLarge { dim: n, cap: DENSE_CAP });
    }
    let h = op.to_dense();
    let eig = h.self_adjoint_eigen(Side::Lower).map_err(|e| Error::InvalidInput(format!("{e:?}")))?;
    let vals = (0..n).map(|i| eig.S().column_vector()[i].re).collect();
    Ok((vals, eig.U().to_owned()))
}

/// The two highest hole states at finite field.
#[derive(Debug, Clone)]
pub struct FiniteFieldQubit {
    /// Lower qubit level |0> (the higher hole energy is the ground state).
    pub state0: SpinorField,
    pub state1: SpinorField,
    pub e0: f64,
    pub e1: f64,
}

impl FiniteFieldQubit {
    pub fn splitting(&self) -> f64 {
        (self.e0 - self.e1).abs()
    }
}

pub fn finite_field_qubit(
    model: &KpModel,
    field: &MagneticField,
    gauge_origin: [f64; 3],
    opts: &SolverOptions,
) -> Result<FiniteFieldQubit> {
    let h = model.hamiltonian(field, gauge_origin);
    let mut o = *opts;
    o.degeneracy_tol = 0.0;
    let eig = lowest_hole_states(&h, 2, &o)?;
    Ok(FiniteFieldQubit {
        state0: eig.states[0].clone(),
        state1: eig.states[1].clone(),
        e0: eig.energies[0],
        e1: eig.energies[1],
    })
}

/// Rabi frequency from dense finite-field diagonalization (all orders in B).
pub fn brute_force_rabi(
    model: &KpModel,
    field: &MagneticField,
    gauge_origin: [f64; 3],
    d1_kp: &[f64],
    v_ac: f64,
) -> Result<f64> {
    if model.dim() > DENSE_CAP {
        return Err(Error::DimensionTooLarge { dim: model.dim(), cap: DENSE_CAP });
    }
    let opts = SolverOptions { method: Method::Dense, ..SolverOptions::default() };
    let q = finite_field_qubit(model, field, gauge_origin, &opts)?;
    Ok(rabi_direct(&q.state0, &q.state1, d1_kp, v_ac))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_gz_values() {
        assert!((delta_gz(4.285, 0.339, 1.446).unwrap() - 2.14).abs() < 0.01);
        assert_eq!(delta_gz(4.285, 0.339, 0.0).unwrap(), 0.0);
        let pi4 = std::f64::consts::PI.powi(4);
        assert!((delta_gz(1.0, 0.0, 1.0).unwrap() - 131072.0 / (243.0 * pi4)).abs() < 1e-12);
        assert!(delta_gz(-1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn pure_doublets() {
        let hh = pure_hh_g(-0.42);
        let lh = pure_lh_g(-0.42);
        assert!((hh[2] - 2.52).abs() < 1e-12);
        assert!((lh[0] - 1.68).abs() < 1e-12 && (lh[2] - 0.84).abs() < 1e-12);
        assert_eq!(pure_hh_g(0.0), [0.0, 0.0, 0.0]);
    }
}

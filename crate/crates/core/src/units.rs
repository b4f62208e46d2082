//! Physical constants in the crate's unit system.
//!
//! Lengths are in nm, energies in meV, magnetic fields in T, potentials in V
//! and frequencies in Hz.

/// hbar^2 / (2 m0) in meV nm^2.
pub const HBAR2_2M0: f64 = 38.099_821_2;
/// Bohr magneton in meV/T.
pub const MU_B: f64 = 5.788_381_806_0e-2;
/// Planck constant in meV s.
pub const H_PLANCK: f64 = 4.135_667_696e-12;
/// Reduced Planck constant in meV s.
pub const HBAR: f64 = 6.582_119_569e-13;
/// e / hbar in 1/(T nm^2), the Peierls phase prefactor.
pub const E_OVER_HBAR: f64 = 1.519_267_447e-3;
/// Hole potential energy per volt of electrostatic potential (meV/V).
pub const MEV_PER_VOLT: f64 = 1000.0;
/// Free-electron g-factor.
pub const G0: f64 = 2.002_3;
/// Vacuum permittivity in e/(V nm).
pub const EPS0_E_PER_V_NM: f64 = 5.526_349_406e-2;

/// Converts an energy in meV to a frequency in Hz.
pub fn mev_to_hz(e: f64) -> f64 {
    e / H_PLANCK
}

/// Converts a frequency in Hz to an energy in meV.
pub fn hz_to_mev(f: f64) -> f64 {
    f * H_PLANCK
}

//! Bulk six-band valence Hamiltonian, Bloch Zeeman matrices and strain coupling.
//!
//! Basis order: |3/2,3/2>, |3/2,1/2>, |3/2,-1/2>, |3/2,-3/2>, |1/2,1/2>, |1/2,-1/2>.
//! Axes are the device axes (x along the wire).

use nalgebra::Matrix6;
use num_complex::Complex64 as C64;

use crate::device::{MaterialParams, StrainTensor};
use crate::units::{HBAR2_2M0, MU_B};

pub type Block = Matrix6<C64>;

/// Band angular momentum projection along z.
pub const BAND_JZ: [f64; 6] = [1.5, 0.5, -0.5, -1.5, 0.5, -0.5];

/// Heavy-hole components of the basis.
pub const HEAVY_HOLE_BANDS: [usize; 2] = [0, 3];

/// Time reversal acts as `(T psi)[TR_PERM[b]] = TR_PHASE[b] * conj(psi[b])`.
pub const TR_PERM: [usize; 6] = [3, 2, 1, 0, 5, 4];
pub const TR_PHASE: [f64; 6] = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0];

const SQ2: f64 = std::f64::consts::SQRT_2;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Largest entry modulus.
pub fn max_abs(b: &Block) -> f64 {
    b.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Builds `-[[P+Q, -S, R, ...]]` from the four invariants.
pub fn pqrs_block(p: f64, q: f64, r: C64, s: C64, delta: f64) -> Block {
    let s32 = (1.5f64).sqrt();
    let (rc, sc) = (r.conj(), s.conj());
    let z = C64::new(0.0, 0.0);
    #[rustfmt::skip]
    let m = Block::from_row_slice(&[
        c(p + q), -s, r, z, s / SQ2, -r * SQ2,
        -sc, c(p - q), z, r, c(SQ2 * q), -s * s32,
        rc, z, c(p - q), s, -sc * s32, c(-SQ2 * q),
        z, rc, sc, c(p + q), rc * SQ2, sc / SQ2,
        sc / SQ2, c(SQ2 * q), -s * s32, r * SQ2, c(p + delta), z,
        -rc * SQ2, -sc * s32, c(-SQ2 * q), s / SQ2, z, c(p + delta),
    ]);
    -m
}

/// Bulk Hamiltonian at wavevector `k` (1/nm), energies in meV.
pub fn bulk_hamiltonian(m: &MaterialParams, k: [f64; 3]) -> Block {
    bulk_hamiltonian_with(m.gamma1, m.gamma2, m.gamma3, m.delta_so, k)
}

pub(crate) fn bulk_hamiltonian_with(g1: f64, g2: f64, g3: f64, delta: f64, k: [f64; 3]) -> Block {
    let [kx, ky, kz] = k;
    let cc = HBAR2_2M0;
    let s3 = 3f64.sqrt();
    let p = cc * g1 * (kx * kx + ky * ky + kz * kz);
    let q = cc * g2 * (kx * kx + ky * ky - 2.0 * kz * kz);
    let r = C64::new(-cc * s3 * g3 * (kx * kx - ky * ky), cc * s3 * 2.0 * g2 * kx * ky);
    let s = C64::new(kx, -ky) * (cc * 2.0 * s3 * g3 * kz);
    pqrs_block(p, q, r, s, delta)
}

/// Quadratic-form coefficients of the bulk symbol: `H(k) = c0 + sum_{a<=b} c[a][b] k_a k_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticCoefficients {
    pub c0: Block,
    /// `c[a][a]` multiplies `k_a^2`, `c[a][b]` (a < b) multiplies `k_a k_b`.
    pub c: [[Block; 3]; 3],
}

/// Extracts the quadratic coefficients by polarization of the bulk symbol.
pub fn kinetic_coefficients(m: &MaterialParams, gamma3_override: Option<f64>) -> KineticCoefficients {
    let g3 = gamma3_override.unwrap_or(m.gamma3);
    let h = |k: [f64; 3]| bulk_hamiltonian_with(m.gamma1, m.gamma2, g3, m.delta_so, k);
    let c0 = h([0.0; 3]);
    let unit = |a: usize| {
        let mut k = [0.0; 3];
        k[a] = 1.0;
        k
    };
    let mut c = [[Block::zeros(); 3]; 3];
    for a in 0..3 {
        c[a][a] = h(unit(a)) - c0;
    }
    for a in 0..3 {
        for b in a + 1..3 {
            let mut k = unit(a);
            k[b] = 1.0;
            c[a][b] = h(k) - h(unit(a)) - h(unit(b)) + c0;
        }
    }
    KineticCoefficients { c0, c }
}

/// Dimensionless Bloch Zeeman matrices `K_x, K_y, K_z` (H = mu_B B.K).
pub fn zeeman_matrices(kappa: f64) -> [Block; 3] {
    let k1 = 1.0 + kappa;
    let k2 = 1.0 + 2.0 * kappa;
    let s3 = 3f64.sqrt();
    let s32 = (1.5f64).sqrt();
    let i = C64::new(0.0, 1.0);
    #[rustfmt::skip]
    let kx = Block::from_row_slice(&[
        0.0, s3 * kappa, 0.0, 0.0, -s32 * k1, 0.0,
        s3 * kappa, 0.0, 2.0 * kappa, 0.0, 0.0, -k1 / SQ2,
        0.0, 2.0 * kappa, 0.0, s3 * kappa, k1 / SQ2, 0.0,
        0.0, 0.0, s3 * kappa, 0.0, 0.0, s32 * k1,
        -s32 * k1, 0.0, k1 / SQ2, 0.0, 0.0, k2,
        0.0, -k1 / SQ2, 0.0, s32 * k1, k2, 0.0,
    ].map(c));
    #[rustfmt::skip]
    let ky = Block::from_row_slice(&[
        0.0, s3 * kappa, 0.0, 0.0, -s32 * k1, 0.0,
        -s3 * kappa, 0.0, 2.0 * kappa, 0.0, 0.0, -k1 / SQ2,
        0.0, -2.0 * kappa, 0.0, s3 * kappa, -k1 / SQ2, 0.0,
        0.0, 0.0, -s3 * kappa, 0.0, 0.0, -s32 * k1,
        s32 * k1, 0.0, k1 / SQ2, 0.0, 0.0, k2,
        0.0, k1 / SQ2, 0.0, s32 * k1, -k2, 0.0,
    ].map(c)) * i;
    #[rustfmt::skip]
    let kz = Block::from_row_slice(&[
        3.0 * kappa, 0.0, 0.0, 0.0, 0.0, 0.0,
        0.0, kappa, 0.0, 0.0, SQ2 * k1, 0.0,
        0.0, 0.0, -kappa, 0.0, 0.0, SQ2 * k1,
        0.0, 0.0, 0.0, -3.0 * kappa, 0.0, 0.0,
        0.0, SQ2 * k1, 0.0, 0.0, k2, 0.0,
        0.0, 0.0, SQ2 * k1, 0.0, 0.0, -k2,
    ].map(c));
    [-kx, ky, -kz]
}

/// On-site Bloch Zeeman block `mu_B B.K` for a field vector in tesla.
pub fn bloch_zeeman(b: [f64; 3], m: &MaterialParams) -> Block {
    let k = zeeman_matrices(m.kappa);
    (k[0] * c(b[0]) + k[1] * c(b[1]) + k[2] * c(b[2])) * c(MU_B)
}

/// Bir-Pikus strain block (meV); the hydrostatic `a_v` shift is dropped.
pub fn strain_hamiltonian(e: &StrainTensor, m: &MaterialParams) -> Block {
    let e = &e.0;
    let b = 1000.0 * m.b_v;
    let d = 1000.0 * m.d_v;
    let s3 = 3f64.sqrt();
    let q = -0.5 * b * (e[0][0] + e[1][1] - 2.0 * e[2][2]);
    let r = C64::new(0.5 * d * (e[0][0] - e[1][1]), -s3 * b * e[0][1]);
    let s = C64::new(-d * e[0][2], d * e[1][2]);
    pqrs_block(0.0, q, r, s, 0.0)
}

/// Spin operators `J = L + S` of the six-band basis, obtained from the Zeeman matrices.
pub fn angular_momentum() -> [Block; 3] {
    // K(kappa) = -(3 kappa + 1) L + 2 S is affine in kappa.
    let k0 = zeeman_matrices(0.0);
    let k1 = zeeman_matrices(1.0);
    let mut j = [Block::zeros(); 3];
    for a in 0..3 {
        let l = (k1[a] - k0[a]) * c(-1.0 / 3.0);
        let s = (k0[a] + l) * c(0.5);
        j[a] = l + s;
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;

    fn herm_err(m: &Block) -> f64 {
        max_abs(&(m - m.adjoint()))
    }

    #[test]
    fn hermitian_blocks() {
        let si = MaterialParams::silicon();
        assert!(herm_err(&bulk_hamiltonian(&si, [0.3, -0.2, 0.5])) < 1e-12);
        for k in zeeman_matrices(-0.42) {
            assert!(herm_err(&k) < 1e-15);
        }
        let e = StrainTensor([[1e-3, 2e-4, -1e-4], [2e-4, -5e-4, 3e-4], [-1e-4, 3e-4, 2e-3]]);
        assert!(herm_err(&strain_hamiltonian(&e, &si)) < 1e-12);
    }

    #[test]
    fn polarization_reproduces_symbol() {
        let si = MaterialParams::silicon();
        let kc = kinetic_coefficients(&si, None);
        let k = [0.31, -0.17, 0.23];
        let mut h = kc.c0;
        for a in 0..3 {
            for b in a..3 {
                h += kc.c[a][b] * c(k[a] * k[b]);
            }
        }
        assert!(max_abs(&(h - bulk_hamiltonian(&si, k))) < 1e-12);
    }

    #[test]
    fn j32_block_is_minus_two_kappa_j() {
        let kappa = -0.42;
        let k = zeeman_matrices(kappa);
        let j = angular_momentum();
        for a in 0..3 {
            for r in 0..4 {
                for s in 0..4 {
                    let want = j[a][(r, s)] * (-2.0 * kappa);
                    assert!((k[a][(r, s)] - want).norm() < 1e-13);
                }
            }
        }
        // J_z is diagonal with the band projections
        for b in 0..6 {
            assert!((j[2][(b, b)].re - BAND_JZ[b]).abs() < 1e-13);
        }
    }

    #[test]
    fn spin_algebra() {
        // [Jx, Jy] = i Jz on the full six-band basis
        let j = angular_momentum();
        let comm = j[0] * j[1] - j[1] * j[0];
        assert!(max_abs(&(comm - j[2] * C64::new(0.0, 1.0))) < 1e-13);
    }

    #[test]
    fn time_reversal_symmetry() {
        let si = MaterialParams::silicon();
        let mut u = Block::zeros();
        for b in 0..6 {
            u[(TR_PERM[b], b)] = c(TR_PHASE[b]);
        }
        let h = bulk_hamiltonian(&si, [0.3, -0.2, 0.5]);
        let th = u * h.map(|z| z.conj()) * u.adjoint();
        assert!(max_abs(&(th - h)) < 1e-12);
        for k in zeeman_matrices(-0.42) {
            let tk = u * k.map(|z| z.conj()) * u.adjoint();
            assert!(max_abs(&(tk + k)) < 1e-13);
        }
    }
}

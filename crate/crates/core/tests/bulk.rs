use nalgebra::Matrix6;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use spinqubit_core::device::MaterialParams;
use spinqubit_core::kp::bulk::{bulk_hamiltonian, max_abs, TR_PERM, TR_PHASE};
use spinqubit_core::units::HBAR2_2M0;

fn eigenvalues(h: &Matrix6<C64>) -> Vec<f64> {
    let mut v: Vec<f64> = h.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v
}

#[test]
fn zone_centre_levels() {
    let si = MaterialParams::silicon();
    let e = eigenvalues(&bulk_hamiltonian(&si, [0.0; 3]));
    for x in &e[..4] {
        assert!(x.abs() < 1e-12, "{e:?}");
    }
    for x in &e[4..] {
        assert!((x + 44.0).abs() < 1e-12, "{e:?}");
    }
}

#[test]
fn masses_along_001() {
    let si = MaterialParams::silicon();
    let k = 1e-3;
    let e = eigenvalues(&bulk_hamiltonian(&si, [0.0, 0.0, k]));
    // Two twofold levels; the heavy hole is the flatter one.
    let curv: Vec<f64> = [e[0], e[2]].iter().map(|x| -HBAR2_2M0 * k * k / x).collect();
    let hh = 1.0 / (si.gamma1 - 2.0 * si.gamma2);
    let lh = 1.0 / (si.gamma1 + 2.0 * si.gamma2);
    assert!((curv[0] / hh - 1.0).abs() < 0.01, "{curv:?}");
    assert!((curv[1] / lh - 1.0).abs() < 0.01, "{curv:?}");
}

fn time_reversed(h: &Matrix6<C64>) -> Matrix6<C64> {
    // T H(k) T^-1 with T = U K.
    let mut u = Matrix6::<C64>::zeros();
    for b in 0..6 {
        u[(TR_PERM[b], b)] = C64::new(TR_PHASE[b], 0.0);
    }
    u * h.map(|z| z.conj()) * u.adjoint()
}

proptest! {
    #[test]
    fn hermitian_and_time_reversal_even(kx in -1.0..1.0f64, ky in -1.0..1.0f64, kz in -1.0..1.0f64) {
        let si = MaterialParams::silicon();
        let h = bulk_hamiltonian(&si, [kx, ky, kz]);
        prop_assert!(max_abs(&(h - h.adjoint())) < 1e-12);
        // Time reversal maps H(k) to H(-k) = H(k) for a quadratic symbol.
        let back = time_reversed(&h);
        prop_assert!(max_abs(&(back - h)) < 1e-10 * (1.0 + max_abs(&h)));
        // Every level is twofold degenerate (inversion plus time reversal).
        let e = eigenvalues(&h);
        for p in 0..3 {
            prop_assert!((e[2 * p] - e[2 * p + 1]).abs() < 1e-9 * (1.0 + e[2 * p].abs()));
        }
    }
}

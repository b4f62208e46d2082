use faer::Mat;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use spinqubit_core::device::{MaterialParams, StrainTensor};
use spinqubit_core::kp::{CouplingFlags, KpModel, MagneticField};
use spinqubit_core::mesh::KpGrid;
use spinqubit_core::reference::{delta_gz, dense_solve, DENSE_CAP};
use spinqubit_core::Error;

proptest! {
    #[test]
    fn delta_gz_monotonic(g1 in 1.0..10.0f64, g2 in 0.0..3.0f64, g3 in 0.01..3.0f64, d in 0.01..1.0f64) {
        let base = delta_gz(g1, g2, g3).unwrap();
        prop_assert!(delta_gz(g1, g2, g3 + d).unwrap() > base);
        prop_assert!(delta_gz(g1, g2, -(g3 + d)).unwrap() > base);
        prop_assert!(delta_gz(g1 + d, g2, g3).unwrap() < base);
        prop_assert!(delta_gz(g1, g2 + d, g3).unwrap() < base);
    }
}

#[test]
fn silicon_envelope_correction() {
    let si = MaterialParams::silicon();
    let d = delta_gz(si.gamma1, si.gamma2, si.gamma3).unwrap();
    assert!((d - 2.14).abs() < 0.01, "{d}");
}

fn small_model(n: [usize; 3]) -> KpModel {
    let g = KpGrid { offset: [0; 3], n, h: [1.0; 3], origin: [0.0; 3], periodic_x: false };
    let v = (0..g.num_nodes()).map(|p| -3.0 * g.position(p)[2]).collect();
    KpModel::from_parts(g, MaterialParams::silicon(), &StrainTensor::zero(), v, CouplingFlags::default()).unwrap()
}

#[test]
fn dense_solve_residuals() {
    let model = small_model([4, 3, 3]);
    let h = model.hamiltonian(&MagneticField::new(0.7, [0.3, -0.2, 1.0]).unwrap(), [1.5, 1.0, 1.0]);
    let (vals, vecs) = dense_solve(&h).unwrap();
    let n = h.dim();
    let mut y = vec![C64::new(0.0, 0.0); n];
    for j in 0..n {
        let x: Vec<C64> = (0..n).map(|i| vecs[(i, j)]).collect();
        h.apply(&x, &mut y);
        let r: f64 = y.iter().zip(&x).map(|(a, b)| (a - b * vals[j]).norm_sqr()).sum::<f64>().sqrt();
        assert!(r < 1e-10 * (1.0 + vals[j].abs()), "{j}: {r}");
    }
    let gram: Mat<C64> = vecs.adjoint() * &vecs;
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((gram[(i, j)] - want).norm() < 1e-12);
        }
    }
}

#[test]
fn dense_solve_capped() {
    let model = small_model([20, 20, 6]);
    let h = model.hamiltonian(&MagneticField::zero(), [0.0; 3]);
    assert!(h.dim() > DENSE_CAP);
    assert!(matches!(dense_solve(&h), Err(Error::DimensionTooLarge { .. })));
}

use num_complex::Complex64 as C64;
use spinqubit_core::device::{MaterialParams, StrainTensor};
use spinqubit_core::kp::{CouplingFlags, KpModel, MagneticField};
use spinqubit_core::mesh::{KpGrid, MeshSpec};
use spinqubit_core::pipeline::{solve_model, Bias, Pipeline, PipelineOptions};
use spinqubit_core::presets;
use spinqubit_core::reference::dense_solve;
use spinqubit_core::spectrum::{inner, lowest_hole_states, norm, time_reversal, Method, SolverOptions};
use spinqubit_core::units::HBAR2_2M0;

fn grid(n: [usize; 3], h: [f64; 3], periodic_x: bool) -> KpGrid {
    KpGrid { offset: [0; 3], n, h, origin: [0.0; 3], periodic_x }
}

/// Silicon with the anisotropic Luttinger parameters switched off: six decoupled bands.
fn spherical() -> MaterialParams {
    MaterialParams { gamma2: 0.0, gamma3: 0.0, ..MaterialParams::silicon() }
}

/// Levels of `-c (-laplacian)` on the grid with hard walls one spacing outside (or a ring along x).
fn laplacian_levels(g: &KpGrid, c: f64) -> Vec<f64> {
    let axis = |a: usize| -> Vec<f64> {
        let n = g.n[a];
        let h2 = g.h[a] * g.h[a];
        if a == 0 && g.periodic_x {
            (0..n).map(|m| 4.0 / h2 * (std::f64::consts::PI * m as f64 / n as f64).sin().powi(2)).collect()
        } else {
            (1..=n).map(|m| 4.0 / h2 * (std::f64::consts::PI * m as f64 / (2.0 * (n + 1) as f64)).sin().powi(2)).collect()
        }
    };
    let (x, y, z) = (axis(0), axis(1), axis(2));
    let mut out = Vec::new();
    for a in &x {
        for b in &y {
            for d in &z {
                out.push(-c * (a + b + d));
            }
        }
    }
    out.sort_by(|a, b| b.partial_cmp(a).unwrap());
    out
}

#[test]
fn decoupled_bands_match_discrete_laplacian() {
    let m = spherical();
    for periodic in [false, true] {
        let g = grid([5, 4, 3], [1.0, 1.2, 0.8], periodic);
        let nodes = g.num_nodes();
        let model = KpModel::from_parts(g, m.clone(), &StrainTensor::zero(), vec![0.0; nodes], CouplingFlags::none()).unwrap();
        let (vals, _) = dense_solve(&model.hamiltonian(&MagneticField::zero(), [0.0; 3])).unwrap();
        let lap = laplacian_levels(&g, HBAR2_2M0 * m.gamma1);
        // Four J=3/2 copies and two split-off copies shifted down by delta.
        let mut want: Vec<f64> = lap.iter().flat_map(|&e| [e; 4]).chain(lap.iter().flat_map(|&e| [e - m.delta_so; 2])).collect();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(vals.len(), want.len());
        let err = vals.iter().zip(&want).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(err < 1e-9, "periodic={periodic}: {err}");
    }
}

#[test]
fn dense_and_iterative_agree() {
    let p = Pipeline::from_spec(&presets::desk_device(), &MeshSpec::uniform(1.0)).unwrap();
    let model = p.model(&Bias::from([("fg".to_string(), -0.1)]), CouplingFlags::default()).unwrap();
    let h = model.hamiltonian(&MagneticField::zero(), [0.0; 3]);
    let count = 8;
    let dense = lowest_hole_states(&h, count, &SolverOptions { method: Method::Dense, ..Default::default() }).unwrap();
    let iter = lowest_hole_states(&h, count, &SolverOptions { method: Method::Lobpcg, ..Default::default() }).unwrap();
    let (all, _) = dense_solve(&h).unwrap();
    for k in 0..count {
        assert!((dense.energies[k] - iter.energies[k]).abs() < 1e-8, "{k}: {} vs {}", dense.energies[k], iter.energies[k]);
        assert!((dense.energies[k] - all[all.len() - 1 - k]).abs() < 1e-10);
        assert!(dense.residuals[k] < 1e-9 && iter.residuals[k] < 1e-7, "{k}");
    }
}

#[test]
fn doublets_are_canonical_kramers_pairs() {
    let p = Pipeline::from_spec(&presets::desk_device(), &MeshSpec::uniform(1.0)).unwrap();
    let model = p.model(&Bias::from([("fg".to_string(), -0.1)]), CouplingFlags::default()).unwrap();
    let s = solve_model(model, &PipelineOptions { excited_pairs: 3, ..Default::default() }).unwrap();
    assert_eq!(s.doublets.len(), 4);
    for w in s.doublets.windows(2) {
        assert!(w[0].energy > w[1].energy);
    }
    for d in &s.doublets {
        let t = time_reversal(&d.up);
        let err = norm(&t.iter().zip(&d.down).map(|(a, b)| a + b).collect::<Vec<C64>>());
        assert!(err < 1e-9, "down != -T up: {err}");
        assert!((norm(&d.up) - 1.0).abs() < 1e-12);
        assert!(inner(&d.up, &d.down).norm() < 1e-12);
    }
    assert!(s.excitations().iter().all(|&e| e > 0.0));
}

#[test]
fn iterative_solver_reports_divergence() {
    let p = Pipeline::from_spec(&presets::desk_device(), &MeshSpec::uniform(1.0)).unwrap();
    let model = p.model(&Bias::new(), CouplingFlags::default()).unwrap();
    let h = model.hamiltonian(&MagneticField::zero(), [0.0; 3]);
    let opts = SolverOptions { method: Method::Lobpcg, max_iter: 2, ..Default::default() };
    assert!(matches!(lowest_hole_states(&h, 2, &opts), Err(spinqubit_core::Error::NotConverged { .. })));
}

use std::collections::BTreeMap;

use spinqubit_core::device::{build_device, DeviceSpec, GateSpec, MaterialParams, RegionSpec, StrainSpec};
use spinqubit_core::electrostatics::{solve_poisson, Parity};
use spinqubit_core::mesh::{build_mesh, MeshSpec};
use spinqubit_core::pipeline::{Bias, Drive, Pipeline};
use spinqubit_core::presets;
use spinqubit_core::symmetry::Mirror;
use spinqubit_core::Error;

fn region(name: &str, material: &str, z0: f64, z1: f64) -> RegionSpec {
    RegionSpec { name: name.into(), material: material.into(), min: [0.0, 0.0, z0], max: [6.0, 6.0, z1] }
}

/// Oxide / silicon / oxide stack between two full-face plates along z.
fn capacitor() -> DeviceSpec {
    DeviceSpec {
        format_version: 1,
        name: "capacitor".into(),
        channel: "si".into(),
        periodic_x: false,
        materials: vec![],
        regions: vec![region("lo", "SiO2", 0.0, 3.0), region("si", "Si", 3.0, 11.0), region("hi", "SiO2", 11.0, 14.0)],
        bounds: None,
        paints: vec![],
        gates: vec![
            GateSpec { name: "bottom".into(), min: [0.0, 0.0, 0.0], max: [6.0, 6.0, 0.0] },
            GateSpec { name: "top".into(), min: [0.0, 0.0, 14.0], max: [6.0, 6.0, 14.0] },
        ],
        strain: StrainSpec::default(),
    }
}

/// Series-capacitor potential with the bottom plate at 1 V and the top plate grounded.
fn layered_potential(z: f64) -> f64 {
    let (eo, es) = (MaterialParams::sio2().permittivity, MaterialParams::silicon().permittivity);
    let e_ox = 1.0 / (6.0 + 8.0 * eo / es);
    let e_si = e_ox * eo / es;
    if z <= 3.0 {
        1.0 - e_ox * z
    } else if z <= 11.0 {
        1.0 - 3.0 * e_ox - e_si * (z - 3.0)
    } else {
        e_ox * (14.0 - z)
    }
}

#[test]
fn layered_capacitor_is_piecewise_linear() {
    let dev = build_device(&capacitor()).unwrap();
    let mesh = build_mesh(&dev, &MeshSpec::uniform(1.0)).unwrap();
    let v = solve_poisson(&dev, &mesh, &BTreeMap::from([("bottom".to_string(), 1.0)])).unwrap();
    for i in 0..mesh.n[0] {
        for j in 0..mesh.n[1] {
            for k in 0..mesh.n[2] {
                let z = mesh.coord(2, k);
                let got = v.values[mesh.node(i, j, k)];
                assert!((got - layered_potential(z)).abs() < 1e-9, "z={z}: {got} vs {}", layered_potential(z));
            }
        }
    }
}

#[test]
fn superposition_of_unit_responses() {
    let p = Pipeline::from_spec(&capacitor(), &MeshSpec::uniform(1.0)).unwrap();
    let bias = Bias::from([("bottom".to_string(), -0.3), ("top".to_string(), 0.7)]);
    let sup = p.potential(&bias).unwrap();
    let direct = solve_poisson(&p.device, &p.mesh, &bias).unwrap();
    let err = sup.iter().zip(&direct.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err < 1e-10, "{err}");
}

#[test]
fn unknown_gate_rejected() {
    let p = Pipeline::from_spec(&capacitor(), &MeshSpec::uniform(1.0)).unwrap();
    let bias = Bias::from([("side".to_string(), 1.0)]);
    assert_eq!(p.potential(&bias), Err(Error::UnknownGate("side".into())));
    let dev = build_device(&capacitor()).unwrap();
    let mesh = build_mesh(&dev, &MeshSpec::uniform(1.0)).unwrap();
    assert!(matches!(solve_poisson(&dev, &mesh, &bias), Err(Error::UnknownGate(_))));
}

#[test]
fn plate_box_mirror_parities() {
    let p = Pipeline::from_spec(&presets::plate_box(), &MeshSpec::uniform(1.0)).unwrap();
    let sym = Bias::from([("left".to_string(), -0.05), ("right".to_string(), -0.05)]);
    let differential = Drive::from([("left".to_string(), 1.0), ("right".to_string(), -1.0)]);
    let found = p.detect_mirrors(&sym, &differential, 1e-6).unwrap();
    assert_eq!(found, vec![(Mirror::Yz, Parity::Even), (Mirror::Xz, Parity::Odd), (Mirror::Xy, Parity::Even)]);

    let asym = Bias::from([("left".to_string(), -0.1)]);
    let found = p.detect_mirrors(&asym, &differential, 1e-6).unwrap();
    assert!(found.iter().all(|&(m, _)| m != Mirror::Xz), "{found:?}");
}

#[test]
fn desk_device_keeps_only_the_yz_mirror() {
    let p = Pipeline::from_spec(&presets::desk_device(), &MeshSpec::uniform(1.0)).unwrap();
    let bias = Bias::from([("fg".to_string(), -0.1)]);
    let found = p.detect_mirrors(&bias, &Drive::from([("fg".to_string(), 1.0)]), 1e-6).unwrap();
    assert_eq!(found, vec![(Mirror::Yz, Parity::Even)]);
}

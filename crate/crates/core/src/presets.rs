//! Ready-made device descriptions (coordinates in nm).

use crate::device::{DeviceSpec, GateSpec, PaintSpec, RegionSpec, StrainSpec};
use crate::device::Aabb;

pub const FORMAT_VERSION: u32 = 1;

fn paint(material: &str, min: [f64; 3], max: [f64; 3]) -> PaintSpec {
    PaintSpec { material: material.into(), min, max, name: None }
}

fn channel(min: [f64; 3], max: [f64; 3]) -> PaintSpec {
    PaintSpec { material: "Si".into(), min, max, name: Some("channel".into()) }
}

fn gate(name: &str, min: [f64; 3], max: [f64; 3]) -> GateSpec {
    GateSpec { name: name.into(), min, max }
}

fn blank(name: &str) -> DeviceSpec {
    DeviceSpec {
        format_version: FORMAT_VERSION,
        name: name.into(),
        channel: "channel".into(),
        periodic_x: false,
        materials: Vec::new(),
        regions: Vec::new(),
        bounds: None,
        paints: Vec::new(),
        gates: Vec::new(),
        strain: StrainSpec::default(),
    }
}

/// Free-standing silicon box centred on the origin, no gates.
pub fn silicon_box(size: [f64; 3]) -> DeviceSpec {
    let mut d = blank("silicon-box");
    let h = size.map(|s| 0.5 * s);
    d.regions.push(RegionSpec {
        name: "channel".into(),
        material: "Si".into(),
        min: [-h[0], -h[1], -h[2]],
        max: h,
    });
    d
}

/// Thin symmetric film, 20 x 20 x 4 nm.
pub fn thin_film() -> DeviceSpec {
    let mut d = silicon_box([20.0, 20.0, 4.0]);
    d.name = "thin-film".into();
    d
}

/// Gated silicon box of size `l` on a buried oxide. The front gate sits 3 nm
/// above the channel, spans `|x| <= gate_x` and covers `y <= gate_y` only; the
/// back gate lies 4 nm below. Exact yz mirror.
pub fn gated_box(name: &str, l: [f64; 3], gate_x: f64, gate_y: f64) -> DeviceSpec {
    let mut d = blank(name);
    let lo = [-0.5 * l[0] - 4.0, -0.5 * l[1] - 5.0, -4.0];
    let hi = [0.5 * l[0] + 4.0, 0.5 * l[1] + 5.0, l[2] + 3.0];
    d.bounds = Some(Aabb::new(lo, hi));
    d.paints = vec![
        paint("SiO2", lo, hi),
        paint("HfO2", [-gate_x, lo[1], l[2]], [gate_x, gate_y, hi[2]]),
        channel([-0.5 * l[0], -0.5 * l[1], 0.0], [0.5 * l[0], 0.5 * l[1], l[2]]),
    ];
    d.gates = vec![
        gate("fg", [-gate_x, lo[1], hi[2]], [gate_x, gate_y, hi[2]]),
        gate("bg", [lo[0], lo[1], lo[2]], [hi[0], hi[1], lo[2]]),
    ];
    d
}

/// Desk-scale gated box, 12 x 8 x 5 nm (1848 unknowns at 1 nm).
pub fn desk_device() -> DeviceSpec {
    gated_box("desk", [12.0, 8.0, 5.0], 4.0, 2.0)
}

/// Softer gated dot, 24 x 16 x 6 nm.
pub fn soft_dot() -> DeviceSpec {
    gated_box("soft-dot", [24.0, 16.0, 6.0], 6.0, 3.0)
}

/// Silicon box between two plate gates normal to y. At equal plate voltages
/// all three mirrors are exact.
pub fn plate_box() -> DeviceSpec {
    let mut d = blank("plate-box");
    let lo = [-5.0, -7.0, -5.0];
    let hi = [5.0, 7.0, 5.0];
    d.bounds = Some(Aabb::new(lo, hi));
    d.paints = vec![paint("SiO2", lo, hi), channel([-5.0, -4.0, -3.0], [5.0, 4.0, 3.0])];
    d.gates = vec![
        gate("left", [-5.0, -7.0, -5.0], [5.0, -7.0, 5.0]),
        gate("right", [-5.0, 7.0, -5.0], [5.0, 7.0, 5.0]),
    ];
    d
}

/// Gated channel 30 nm wide and 10 nm tall with biaxial strain `eps_par`.
pub fn strained_channel(eps_par: f64) -> DeviceSpec {
    let mut d = gated_box("strained-channel", [16.0, 30.0, 10.0], 6.0, 5.0);
    d.strain.biaxial = Some(eps_par);
    d
}

/// Nanowire device: 30 x 10 nm channel periodic along x, SiO2/HfO2 gate stack,
/// a central front gate wrapping the top and one side facet, two lateral
/// gates, a back gate under the buried oxide, and a Si3N4 embedding.
pub fn nanowire_device() -> DeviceSpec {
    let mut d = blank("nanowire");
    d.periodic_x = true;
    let lo = [-95.0, -43.0, -25.0];
    let hi = [95.0, 43.0, 38.0];
    d.bounds = Some(Aabb::new(lo, hi));
    d.paints = vec![
        paint("Si3N4", lo, hi),
        paint("SiO2", [-95.0, -43.0, -25.0], [95.0, 43.0, 0.0]),
        paint("HfO2", [-95.0, -19.0, 0.0], [95.0, 19.0, 14.0]),
        paint("SiO2", [-95.0, -17.0, 0.0], [95.0, 17.0, 12.0]),
        channel([-95.0, -15.0, 0.0], [95.0, 15.0, 10.0]),
    ];
    let mut gates = Vec::new();
    for (name, x0, x1) in [("fg", -15.0, 15.0), ("lg1", -75.0, -45.0), ("lg2", 45.0, 75.0)] {
        let top = ([x0, -5.0, 14.0], [x1, 23.0, 18.0]);
        let side = ([x0, 19.0, 0.0], [x1, 23.0, 14.0]);
        for (a, b) in [top, side] {
            d.paints.push(paint("metal", a, b));
            gates.push(gate(name, a, b));
        }
    }
    gates.push(gate("bg", [-95.0, -43.0, -25.0], [95.0, 43.0, -25.0]));
    d.gates = gates;
    d
}

/// Preset by name.
pub fn by_name(name: &str) -> Option<DeviceSpec> {
    match name {
        "thin-film" => Some(thin_film()),
        "desk" => Some(desk_device()),
        "plate-box" => Some(plate_box()),
        "soft-dot" => Some(soft_dot()),
        "strained-channel" => Some(strained_channel(0.0)),
        "nanowire" => Some(nanowire_device()),
        _ => None,
    }
}

pub const NAMES: [&str; 6] = ["thin-film", "desk", "soft-dot", "plate-box", "strained-channel", "nanowire"];

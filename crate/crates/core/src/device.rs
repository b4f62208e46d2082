//! Device description: materials, box regions, gates and strain.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Axis-aligned box in nm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn size(&self) -> [f64; 3] {
        [self.max[0] - self.min[0], self.max[1] - self.min[1], self.max[2] - self.min[2]]
    }

    pub fn volume(&self) -> f64 {
        let s = self.size();
        s[0] * s[1] * s[2]
    }

    pub fn center(&self) -> [f64; 3] {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        ]
    }

    pub fn intersection_volume(&self, other: &Aabb) -> f64 {
        let mut v = 1.0;
        for a in 0..3 {
            let lo = self.min[a].max(other.min[a]);
            let hi = self.max[a].min(other.max[a]);
            if hi <= lo {
                return 0.0;
            }
            v *= hi - lo;
        }
        v
    }

    pub fn contains(&self, p: [f64; 3], tol: f64) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] - tol && p[a] <= self.max[a] + tol)
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        let mut b = *self;
        for a in 0..3 {
            b.min[a] = b.min[a].min(other.min[a]);
            b.max[a] = b.max[a].max(other.max[a]);
        }
        b
    }
}

/// Material parameters. Dielectrics and metals carry `gamma1 = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub name: String,
    #[serde(default)]
    pub gamma1: f64,
    #[serde(default)]
    pub gamma2: f64,
    #[serde(default)]
    pub gamma3: f64,
    #[serde(default)]
    pub kappa: f64,
    /// Spin-orbit splitting (meV).
    #[serde(default)]
    pub delta_so: f64,
    pub permittivity: f64,
    /// Elastic constants (GPa).
    #[serde(default)]
    pub c11: f64,
    #[serde(default)]
    pub c12: f64,
    /// Valence band deformation potentials (eV).
    #[serde(default)]
    pub b_v: f64,
    #[serde(default)]
    pub d_v: f64,
}

impl MaterialParams {
    pub fn silicon() -> Self {
        Self {
            name: "Si".into(),
            gamma1: 4.285,
            gamma2: 0.339,
            gamma3: 1.446,
            kappa: -0.42,
            delta_so: 44.0,
            permittivity: 11.7,
            c11: 166.0,
            c12: 64.0,
            b_v: -2.1,
            d_v: -4.8,
        }
    }

    pub fn dielectric(name: &str, permittivity: f64) -> Self {
        Self {
            name: name.into(),
            gamma1: 0.0,
            gamma2: 0.0,
            gamma3: 0.0,
            kappa: 0.0,
            delta_so: 0.0,
            permittivity,
            c11: 0.0,
            c12: 0.0,
            b_v: 0.0,
            d_v: 0.0,
        }
    }

    pub fn sio2() -> Self {
        Self::dielectric("SiO2", 3.9)
    }

    pub fn hfo2() -> Self {
        Self::dielectric("HfO2", 20.0)
    }

    pub fn si3n4() -> Self {
        Self::dielectric("Si3N4", 7.5)
    }

    /// Built-in material by name.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "Si" => Some(Self::silicon()),
            "SiO2" => Some(Self::sio2()),
            "HfO2" => Some(Self::hfo2()),
            "Si3N4" => Some(Self::si3n4()),
            "metal" => Some(Self::dielectric("metal", 1.0)),
            _ => None,
        }
    }

    pub fn is_semiconductor(&self) -> bool {
        self.gamma1 > 0.0
    }

    fn validate(&self) -> Result<()> {
        if !(self.permittivity >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "material `{}` has permittivity {} < 1",
                self.name, self.permittivity
            )));
        }
        if self.is_semiconductor() && !(self.delta_so >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "material `{}` has negative spin-orbit splitting",
                self.name
            )));
        }
        Ok(())
    }
}

/// Symmetric strain tensor.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StrainTensor(pub [[f64; 3]; 3]);

impl StrainTensor {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let e = &self.0;
        (0..3).all(|i| (0..3).all(|j| (e[i][j] - e[j][i]).abs() <= tol))
    }
}

/// Biaxial in-plane strain `eps_par` of a (001) film with a free top surface.
pub fn biaxial_strain(eps_par: f64, mat: &MaterialParams) -> Result<StrainTensor> {
    if !(eps_par.abs() < 0.05) {
        return Err(Error::InvalidInput(format!("biaxial strain {eps_par} out of range")));
    }
    if !(mat.c11 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "material `{}` has no elastic constants",
            mat.name
        )));
    }
    let ezz = -2.0 * mat.c12 / mat.c11 * eps_par;
    Ok(StrainTensor([[eps_par, 0.0, 0.0], [0.0, eps_par, 0.0], [0.0, 0.0, ezz]]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub name: String,
    pub material: String,
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// A box painted over earlier layers; converted to a tiling at build time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaintSpec {
    pub material: String,
    pub min: [f64; 3],
    pub max: [f64; 3],
    /// Name for the region, only honoured for the channel layer.
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub name: String,
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StrainSpec {
    /// In-plane biaxial strain of the channel material.
    #[serde(default)]
    pub biaxial: Option<f64>,
    /// Full strain tensor; takes precedence over `biaxial`.
    #[serde(default)]
    pub tensor: Option<[[f64; 3]; 3]>,
}

/// Serialized device description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub format_version: u32,
    #[serde(default)]
    pub name: String,
    /// Name of the region holding the holes.
    pub channel: String,
    /// Periodic boundary conditions along x for the k.p problem.
    #[serde(default)]
    pub periodic_x: bool,
    #[serde(default, rename = "material")]
    pub materials: Vec<MaterialParams>,
    #[serde(default, rename = "region")]
    pub regions: Vec<RegionSpec>,
    /// Simulation box for painted layers.
    #[serde(default)]
    pub bounds: Option<Aabb>,
    #[serde(default, rename = "paint")]
    pub paints: Vec<PaintSpec>,
    #[serde(default, rename = "gate")]
    pub gates: Vec<GateSpec>,
    #[serde(default)]
    pub strain: StrainSpec,
}

impl DeviceSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub name: String,
    pub material: usize,
    pub bbox: Aabb,
}

/// Electrode made of one or more boxes (gate entries sharing a name).
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub name: String,
    pub boxes: Vec<Aabb>,
}

/// Validated device.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceModel {
    pub name: String,
    pub materials: Vec<MaterialParams>,
    pub regions: Vec<Region>,
    pub gates: Vec<Gate>,
    pub channel: usize,
    pub strain: StrainTensor,
    pub periodic_x: bool,
    pub bounds: Aabb,
}

impl DeviceModel {
    pub fn channel_region(&self) -> &Region {
        &self.regions[self.channel]
    }

    pub fn channel_material(&self) -> &MaterialParams {
        &self.materials[self.regions[self.channel].material]
    }

    pub fn gate_index(&self, name: &str) -> Result<usize> {
        self.gates
            .iter()
            .position(|g| g.name == name)
            .ok_or_else(|| Error::UnknownGate(name.into()))
    }

    /// Distinct region and gate boundary coordinates along `axis`.
    pub fn planes(&self, axis: usize) -> Vec<f64> {
        let mut v: Vec<f64> = Vec::new();
        v.push(self.bounds.min[axis]);
        v.push(self.bounds.max[axis]);
        for r in &self.regions {
            v.push(r.bbox.min[axis]);
            v.push(r.bbox.max[axis]);
        }
        for g in &self.gates {
            for b in &g.boxes {
                v.push(b.min[axis]);
                v.push(b.max[axis]);
            }
        }
        dedup_sorted(v, GEOM_TOL)
    }
}

pub(crate) const GEOM_TOL: f64 = 1e-9;

fn dedup_sorted(mut v: Vec<f64>, tol: f64) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<f64> = Vec::with_capacity(v.len());
    for x in v {
        if out.last().map_or(true, |&l| x - l > tol) {
            out.push(x);
        }
    }
    out
}

fn check_finite(name: &str, b: &Aabb) -> Result<()> {
    if b.min.iter().chain(b.max.iter()).all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("`{name}` has non-finite coordinates")))
    }
}

/// Converts painted layers into non-overlapping boxes tiling `bounds`.
fn paint_to_regions(
    bounds: &Aabb,
    paints: &[PaintSpec],
    channel: &str,
) -> Result<Vec<RegionSpec>> {
    let mut planes: [Vec<f64>; 3] = Default::default();
    for a in 0..3 {
        let mut v = vec![bounds.min[a], bounds.max[a]];
        for p in paints {
            v.push(p.min[a].clamp(bounds.min[a], bounds.max[a]));
            v.push(p.max[a].clamp(bounds.min[a], bounds.max[a]));
        }
        planes[a] = dedup_sorted(v, GEOM_TOL);
    }
    let n = [planes[0].len() - 1, planes[1].len() - 1, planes[2].len() - 1];
    // Owner layer of every elementary cell.
    let mut owner = vec![usize::MAX; n[0] * n[1] * n[2]];
    for i in 0..n[0] {
        for j in 0..n[1] {
            for k in 0..n[2] {
                let c = [
                    0.5 * (planes[0][i] + planes[0][i + 1]),
                    0.5 * (planes[1][j] + planes[1][j + 1]),
                    0.5 * (planes[2][k] + planes[2][k + 1]),
                ];
                for (l, p) in paints.iter().enumerate() {
                    if Aabb::new(p.min, p.max).contains(c, 0.0) {
                        owner[(i * n[1] + j) * n[2] + k] = l;
                    }
                }
            }
        }
    }
    if owner.iter().any(|&o| o == usize::MAX) {
        return Err(Error::InvalidInput("painted layers leave part of the box empty".into()));
    }
    // The channel layer must survive as a single box.
    let ch_layer = paints
        .iter()
        .rposition(|p| p.name.as_deref() == Some(channel))
        .ok_or_else(|| Error::UnknownRegion(channel.into()))?;
    let mut regions = Vec::new();
    let mut ch_box: Option<Aabb> = None;
    let mut ch_volume = 0.0;
    let mut count = 0usize;
    for j in 0..n[1] {
        for k in 0..n[2] {
            let mut i = 0;
            while i < n[0] {
                let o = owner[(i * n[1] + j) * n[2] + k];
                let mut e = i + 1;
                while e < n[0] && owner[(e * n[1] + j) * n[2] + k] == o {
                    e += 1;
                }
                let b = Aabb::new(
                    [planes[0][i], planes[1][j], planes[2][k]],
                    [planes[0][e], planes[1][j + 1], planes[2][k + 1]],
                );
                if o == ch_layer {
                    ch_volume += b.volume();
                    ch_box = Some(ch_box.map_or(b, |c| c.union(&b)));
                } else {
                    regions.push(RegionSpec {
                        name: format!("{}#{count}", paints[o].material),
                        material: paints[o].material.clone(),
                        min: b.min,
                        max: b.max,
                    });
                    count += 1;
                }
                i = e;
            }
        }
    }
    let ch_box = ch_box.ok_or_else(|| Error::UnknownRegion(channel.into()))?;
    if (ch_box.volume() - ch_volume).abs() > 1e-9 * ch_box.volume() {
        return Err(Error::InvalidInput("channel layer is not a single box after painting".into()));
    }
    regions.insert(
        0,
        RegionSpec {
            name: channel.into(),
            material: paints[ch_layer].material.clone(),
            min: ch_box.min,
            max: ch_box.max,
        },
    );
    Ok(regions)
}

/// Validates a device description.
pub fn build_device(spec: &DeviceSpec) -> Result<DeviceModel> {
    if spec.format_version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(spec.format_version));
    }
    let mut materials: Vec<MaterialParams> = Vec::new();
    for m in &spec.materials {
        m.validate()?;
        materials.retain(|x| x.name != m.name);
        materials.push(m.clone());
    }
    let mut material_index = |name: &str| -> Result<usize> {
        if let Some(i) = materials.iter().position(|m| m.name == name) {
            return Ok(i);
        }
        let m = MaterialParams::preset(name).ok_or_else(|| Error::UnknownMaterial(name.into()))?;
        materials.push(m);
        Ok(materials.len() - 1)
    };

    let mut region_specs = spec.regions.clone();
    if !spec.paints.is_empty() {
        let bounds = spec
            .bounds
            .ok_or_else(|| Error::InvalidInput("painted layers need `bounds`".into()))?;
        check_finite("bounds", &bounds)?;
        if bounds.size().iter().any(|&s| s <= 0.0) {
            return Err(Error::NegativeDimension("bounds".into()));
        }
        for p in &spec.paints {
            let b = Aabb::new(p.min, p.max);
            check_finite(&p.material, &b)?;
            if b.size().iter().any(|&s| s <= 0.0) {
                return Err(Error::NegativeDimension(p.name.clone().unwrap_or(p.material.clone())));
            }
        }
        region_specs.extend(paint_to_regions(&bounds, &spec.paints, &spec.channel)?);
    }
    if region_specs.is_empty() {
        return Err(Error::InvalidInput("device has no regions".into()));
    }

    let mut regions = Vec::with_capacity(region_specs.len());
    for r in &region_specs {
        let bbox = Aabb::new(r.min, r.max);
        check_finite(&r.name, &bbox)?;
        if bbox.size().iter().any(|&s| s <= 0.0) {
            return Err(Error::NegativeDimension(r.name.clone()));
        }
        let material = material_index(&r.material)?;
        regions.push(Region { name: r.name.clone(), material, bbox });
    }
    for i in 0..regions.len() {
        for j in i + 1..regions.len() {
            let v = regions[i].bbox.intersection_volume(&regions[j].bbox);
            let scale = regions[i].bbox.volume().min(regions[j].bbox.volume());
            if v > 1e-9 * scale {
                return Err(Error::OverlappingRegions(
                    regions[i].name.clone(),
                    regions[j].name.clone(),
                ));
            }
        }
    }
    let bounds = regions.iter().skip(1).fold(regions[0].bbox, |b, r| b.union(&r.bbox));
    let covered: f64 = regions.iter().map(|r| r.bbox.volume()).sum();
    if (covered - bounds.volume()).abs() > 1e-9 * bounds.volume() {
        return Err(Error::RegionsDoNotTile { covered, total: bounds.volume() });
    }

    let channel = regions
        .iter()
        .position(|r| r.name == spec.channel)
        .ok_or_else(|| Error::UnknownRegion(spec.channel.clone()))?;
    if !materials[regions[channel].material].is_semiconductor() {
        return Err(Error::InvalidInput(format!(
            "channel `{}` is not a semiconductor",
            spec.channel
        )));
    }
    if spec.periodic_x {
        let cb = regions[channel].bbox;
        if (cb.min[0] - bounds.min[0]).abs() > GEOM_TOL
            || (cb.max[0] - bounds.max[0]).abs() > GEOM_TOL
        {
            return Err(Error::InvalidInput(
                "periodic x requires the channel to span the box along x".into(),
            ));
        }
    }

    let mut planes: [Vec<f64>; 3] = Default::default();
    for (a, pl) in planes.iter_mut().enumerate() {
        let mut v = vec![bounds.min[a], bounds.max[a]];
        for r in &regions {
            v.push(r.bbox.min[a]);
            v.push(r.bbox.max[a]);
        }
        *pl = dedup_sorted(v, GEOM_TOL);
    }
    let on_plane = |a: usize, x: f64| planes[a].iter().any(|&p| (p - x).abs() <= 1e-6);
    let mut gates: Vec<Gate> = Vec::new();
    let mut seen = BTreeSet::new();
    for g in &spec.gates {
        let bbox = Aabb::new(g.min, g.max);
        check_finite(&g.name, &bbox)?;
        if bbox.size().iter().any(|&s| s < 0.0) {
            return Err(Error::NegativeDimension(g.name.clone()));
        }
        let inside = bounds.contains(bbox.min, 1e-6) && bounds.contains(bbox.max, 1e-6);
        let aligned = (0..3).all(|a| on_plane(a, bbox.min[a]) && on_plane(a, bbox.max[a]));
        if !inside || !aligned {
            return Err(Error::DanglingGate(g.name.clone()));
        }
        if seen.insert(g.name.clone()) {
            gates.push(Gate { name: g.name.clone(), boxes: vec![bbox] });
        } else {
            gates.iter_mut().find(|x| x.name == g.name).unwrap().boxes.push(bbox);
        }
    }

    let ch_mat = materials[regions[channel].material].clone();
    let strain = if let Some(t) = spec.strain.tensor {
        let s = StrainTensor(t);
        if !s.is_symmetric(1e-12) {
            return Err(Error::InvalidInput("strain tensor is not symmetric".into()));
        }
        s
    } else if let Some(e) = spec.strain.biaxial {
        biaxial_strain(e, &ch_mat)?
    } else {
        StrainTensor::zero()
    };

    Ok(DeviceModel {
        name: spec.name.clone(),
        materials,
        regions,
        gates,
        channel,
        strain,
        periodic_x: spec.periodic_x,
        bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slab() -> DeviceSpec {
        DeviceSpec {
            format_version: 1,
            name: "slab".into(),
            channel: "ch".into(),
            periodic_x: false,
            materials: vec![],
            regions: vec![
                RegionSpec { name: "ch".into(), material: "Si".into(), min: [0., 0., 0.], max: [10., 10., 4.] },
                RegionSpec { name: "ox".into(), material: "SiO2".into(), min: [0., 0., 4.], max: [10., 10., 6.] },
            ],
            bounds: None,
            paints: vec![],
            gates: vec![GateSpec { name: "top".into(), min: [0., 0., 6.], max: [10., 10., 6.] }],
            strain: StrainSpec::default(),
        }
    }

    #[test]
    fn builds_slab() {
        let d = build_device(&slab()).unwrap();
        assert_eq!(d.regions.len(), 2);
        assert_eq!(d.channel, 0);
        assert_eq!(d.bounds.max, [10., 10., 6.]);
        assert_eq!(d.planes(2), vec![0., 4., 6.]);
    }

    #[test]
    fn rejects_overlap() {
        let mut s = slab();
        s.regions[1].min[2] = 3.0;
        assert!(matches!(build_device(&s), Err(Error::OverlappingRegions(..))));
    }

    #[test]
    fn rejects_dangling_gate() {
        let mut s = slab();
        s.gates[0].min[2] = 5.5;
        s.gates[0].max[2] = 5.5;
        assert_eq!(build_device(&s), Err(Error::DanglingGate("top".into())));
    }

    #[test]
    fn rejects_negative_dimension() {
        let mut s = slab();
        s.regions[1].max[0] = -1.0;
        assert!(matches!(build_device(&s), Err(Error::NegativeDimension(_))));
    }

    #[test]
    fn rejects_unknown_material() {
        let mut s = slab();
        s.regions[1].material = "Unobtainium".into();
        assert!(matches!(build_device(&s), Err(Error::UnknownMaterial(_))));
    }

    #[test]
    fn biaxial_poisson_ratio() {
        let si = MaterialParams::silicon();
        let e = biaxial_strain(0.002, &si).unwrap();
        assert!((e.0[2][2] + 0.0015422).abs() < 1e-6);
        assert!(biaxial_strain(0.06, &si).is_err());
    }

    #[test]
    fn toml_roundtrip() {
        let s = slab();
        let t = s.to_toml().unwrap();
        assert_eq!(DeviceSpec::from_toml(&t).unwrap(), s);
    }

    #[test]
    fn painting_tiles_box() {
        let s = DeviceSpec {
            format_version: 1,
            name: "wire".into(),
            channel: "ch".into(),
            periodic_x: false,
            materials: vec![],
            regions: vec![],
            bounds: Some(Aabb::new([0., -10., -5.], [20., 10., 10.])),
            paints: vec![
                PaintSpec { material: "Si3N4".into(), min: [0., -10., -5.], max: [20., 10., 10.], name: None },
                PaintSpec { material: "SiO2".into(), min: [0., -10., -5.], max: [20., 10., 0.], name: None },
                PaintSpec { material: "SiO2".into(), min: [0., -5., 0.], max: [20., 5., 6.], name: None },
                PaintSpec { material: "Si".into(), min: [0., -4., 0.], max: [20., 4., 5.], name: Some("ch".into()) },
            ],
            gates: vec![],
            strain: StrainSpec::default(),
        };
        let d = build_device(&s).unwrap();
        assert_eq!(d.channel_region().bbox, Aabb::new([0., -4., 0.], [20., 4., 5.]));
        let total: f64 = d.regions.iter().map(|r| r.bbox.volume()).sum();
        assert!((total - d.bounds.volume()).abs() < 1e-9);
    }
}

//! Uniform tensor-product mesh conforming to all region and gate planes.

use serde::{Deserialize, Serialize};

use crate::device::DeviceModel;
use crate::error::{Error, Result};

/// Requested mesh resolution (nm along x, y, z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub target_spacing: [f64; 3],
}

impl MeshSpec {
    pub fn uniform(h: f64) -> Self {
        Self { target_spacing: [h; 3] }
    }
}

/// Node-centred mesh over the device bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub origin: [f64; 3],
    pub h: [f64; 3],
    /// Node counts per axis.
    pub n: [usize; 3],
    /// Region index of every node.
    pub node_region: Vec<u32>,
    /// Region index of every cell.
    pub cell_region: Vec<u32>,
    /// Grid of k.p unknowns inside the channel.
    pub kp: KpGrid,
}

/// Sub-grid of channel nodes carrying the hole envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KpGrid {
    /// Mesh index of the first k.p node along each axis.
    pub offset: [usize; 3],
    pub n: [usize; 3],
    pub h: [f64; 3],
    /// Position of the first k.p node.
    pub origin: [f64; 3],
    pub periodic_x: bool,
}

impl KpGrid {
    pub fn num_nodes(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn dim(&self) -> usize {
        6 * self.num_nodes()
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n[1] + j) * self.n[2] + k
    }

    #[inline]
    pub fn ijk(&self, node: usize) -> [usize; 3] {
        let k = node % self.n[2];
        let j = (node / self.n[2]) % self.n[1];
        let i = node / (self.n[1] * self.n[2]);
        [i, j, k]
    }

    pub fn position(&self, node: usize) -> [f64; 3] {
        let [i, j, k] = self.ijk(node);
        [
            self.origin[0] + i as f64 * self.h[0],
            self.origin[1] + j as f64 * self.h[1],
            self.origin[2] + k as f64 * self.h[2],
        ]
    }

    /// Period along x when periodic.
    pub fn period_x(&self) -> f64 {
        self.n[0] as f64 * self.h[0]
    }

    /// Centre of the k.p domain.
    pub fn center(&self) -> [f64; 3] {
        let mut c = [0.0; 3];
        for (a, ca) in c.iter_mut().enumerate() {
            *ca = self.origin[a] + 0.5 * (self.n[a] as f64 - 1.0) * self.h[a];
        }
        c
    }

    /// Mesh node index of a k.p node.
    pub fn mesh_node(&self, mesh_n: [usize; 3], node: usize) -> usize {
        let [i, j, k] = self.ijk(node);
        ((i + self.offset[0]) * mesh_n[1] + j + self.offset[1]) * mesh_n[2] + k + self.offset[2]
    }
}

impl Mesh {
    pub fn num_nodes(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn num_cells(&self) -> usize {
        (self.n[0] - 1) * (self.n[1] - 1) * (self.n[2] - 1)
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n[1] + j) * self.n[2] + k
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize, k: usize) -> usize {
        (i * (self.n[1] - 1) + j) * (self.n[2] - 1) + k
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + i as f64 * self.h[axis]
    }

    /// Index of the node at coordinate `x` along `axis`, if on the grid.
    pub fn index_of(&self, axis: usize, x: f64) -> Option<usize> {
        let t = (x - self.origin[axis]) / self.h[axis];
        let r = t.round();
        if (t - r).abs() < 1e-6 && r >= 0.0 && (r as usize) < self.n[axis] {
            Some(r as usize)
        } else {
            None
        }
    }
}

const GRID_UNIT: f64 = 1e-6;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn axis_spacing(axis: usize, planes: &[f64], target: f64) -> Result<(f64, usize)> {
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::InvalidInput(format!("invalid target spacing {target}")));
    }
    let min_gap = planes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if target > min_gap + 1e-9 {
        return Err(Error::SpacingTooCoarse { axis, target, limit: min_gap });
    }
    let mut g = 0u64;
    for &p in &planes[1..] {
        let t = (p - planes[0]) / GRID_UNIT;
        let r = t.round();
        if (t - r).abs() > 1e-3 {
            return Err(Error::IncommensurateSpacing { axis, target });
        }
        g = gcd(g, r as u64);
    }
    let g = g as f64 * GRID_UNIT;
    let k0 = (g / target).floor().max(1.0);
    let k = [k0, k0 + 1.0]
        .into_iter()
        .min_by(|a, b| (g / a - target).abs().partial_cmp(&(g / b - target).abs()).unwrap())
        .unwrap();
    let h = g / k;
    if (h - target).abs() > 0.25 * target {
        return Err(Error::IncommensurateSpacing { axis, target });
    }
    let len = planes[planes.len() - 1] - planes[0];
    let n = (len / h).round() as usize + 1;
    Ok((h, n))
}

/// Builds the mesh for a device.
pub fn build_mesh(device: &DeviceModel, spec: &MeshSpec) -> Result<Mesh> {
    let mut h = [0.0; 3];
    let mut n = [0usize; 3];
    for a in 0..3 {
        let planes = device.planes(a);
        let (ha, na) = axis_spacing(a, &planes, spec.target_spacing[a])?;
        h[a] = ha;
        n[a] = na;
    }
    let origin = device.bounds.min;
    let locate = |p: [f64; 3]| -> u32 {
        device
            .regions
            .iter()
            .position(|r| r.bbox.contains(p, 0.0))
            .expect("regions tile the box") as u32
    };
    let mut cell_region = Vec::with_capacity((n[0] - 1) * (n[1] - 1) * (n[2] - 1));
    for i in 0..n[0] - 1 {
        for j in 0..n[1] - 1 {
            for k in 0..n[2] - 1 {
                let c = [
                    origin[0] + (i as f64 + 0.5) * h[0],
                    origin[1] + (j as f64 + 0.5) * h[1],
                    origin[2] + (k as f64 + 0.5) * h[2],
                ];
                cell_region.push(locate(c));
            }
        }
    }
    let cbox = device.channel_region().bbox;
    let mut node_region = Vec::with_capacity(n[0] * n[1] * n[2]);
    for i in 0..n[0] {
        for j in 0..n[1] {
            for k in 0..n[2] {
                let p = [
                    origin[0] + i as f64 * h[0],
                    origin[1] + j as f64 * h[1],
                    origin[2] + k as f64 * h[2],
                ];
                if cbox.contains(p, 1e-9) {
                    node_region.push(device.channel as u32);
                } else {
                    let (ci, cj, ck) = (i.min(n[0] - 2), j.min(n[1] - 2), k.min(n[2] - 2));
                    node_region.push(cell_region[(ci * (n[1] - 1) + cj) * (n[2] - 1) + ck]);
                }
            }
        }
    }
    let mut mesh = Mesh {
        origin,
        h,
        n,
        node_region,
        cell_region,
        kp: KpGrid { offset: [0; 3], n: [0; 3], h, origin, periodic_x: device.periodic_x },
    };
    let mut offset = [0usize; 3];
    let mut kn = [0usize; 3];
    let mut korigin = [0.0; 3];
    for a in 0..3 {
        let lo = mesh.index_of(a, cbox.min[a]).expect("channel planes lie on the grid");
        let hi = mesh.index_of(a, cbox.max[a]).expect("channel planes lie on the grid");
        let (first, count) = if a == 0 && device.periodic_x { (lo, hi - lo) } else { (lo + 1, hi - lo - 1) };
        if count < 2 {
            return Err(Error::InvalidInput(format!(
                "channel has fewer than two interior nodes along axis {a}"
            )));
        }
        offset[a] = first;
        kn[a] = count;
        korigin[a] = mesh.coord(a, first);
    }
    mesh.kp = KpGrid { offset, n: kn, h, origin: korigin, periodic_x: device.periodic_x };
    Ok(mesh)
}

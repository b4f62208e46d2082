use std::io::Write;
use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::bulk::{max_abs, bloch_zeeman, kinetic_coefficients, strain_hamiltonian, zeeman_matrices, Block, KineticCoefficients};
use super::{CouplingFlags, MagneticField};
use crate::device::{DeviceModel, MaterialParams, StrainTensor};
use crate::error::{Error, Result};
use crate::mesh::{KpGrid, Mesh};
use crate::units::{E_OVER_HBAR, MEV_PER_VOLT, MU_B};

const NONE: u32 = u32::MAX;

/// Neighbour table shared by all operators on a grid.
#[derive(Debug)]
struct Stencil {
    grid: KpGrid,
    offsets: Vec<[i32; 3]>,
    /// `neighbors[node * offsets.len() + l]`
    neighbors: Vec<u32>,
}

impl Stencil {
    fn new(grid: KpGrid) -> Self {
        let mut offsets = Vec::new();
        for a in 0..3 {
            for s in [-1, 1] {
                let mut d = [0; 3];
                d[a] = s;
                offsets.push(d);
            }
        }
        for a in 0..3 {
            for b in a + 1..3 {
                for sa in [-1, 1] {
                    for sb in [-1, 1] {
                        let mut d = [0; 3];
                        d[a] = sa;
                        d[b] = sb;
                        offsets.push(d);
                    }
                }
            }
        }
        let nl = offsets.len();
        let n = grid.n;
        let mut neighbors = vec![NONE; grid.num_nodes() * nl];
        for p in 0..grid.num_nodes() {
            let ijk = grid.ijk(p);
            'link: for (l, d) in offsets.iter().enumerate() {
                let mut q = [0usize; 3];
                for a in 0..3 {
                    let t = ijk[a] as i64 + d[a] as i64;
                    if a == 0 && grid.periodic_x {
                        q[a] = t.rem_euclid(n[0] as i64) as usize;
                    } else if t < 0 || t >= n[a] as i64 {
                        continue 'link;
                    } else {
                        q[a] = t as usize;
                    }
                }
                neighbors[p * nl + l] = grid.node(q[0], q[1], q[2]) as u32;
            }
        }
        Self { grid, offsets, neighbors }
    }
}

/// Vector potential (T nm) at `r`; x-independent gauge on periodic grids.
pub fn vector_potential(b: [f64; 3], origin: [f64; 3], periodic_x: bool, r: [f64; 3]) -> [f64; 3] {
    let d = [r[0] - origin[0], r[1] - origin[1], r[2] - origin[2]];
    if periodic_x {
        [b[1] * d[2] - b[2] * d[1], -0.5 * b[0] * d[2], 0.5 * b[0] * d[1]]
    } else {
        [
            0.5 * (b[1] * d[2] - b[2] * d[1]),
            0.5 * (b[2] * d[0] - b[0] * d[2]),
            0.5 * (b[0] * d[1] - b[1] * d[0]),
        ]
    }
}

/// Line integral of the vector potential along the straight link `from -> to` (T nm^2).
pub fn link_flux(b: [f64; 3], origin: [f64; 3], periodic_x: bool, from: [f64; 3], to: [f64; 3]) -> f64 {
    let mid = [0.5 * (from[0] + to[0]), 0.5 * (from[1] + to[1]), 0.5 * (from[2] + to[2])];
    let a = vector_potential(b, origin, periodic_x, mid);
    a[0] * (to[0] - from[0]) + a[1] * (to[1] - from[1]) + a[2] * (to[2] - from[2])
}

/// Assembly context for the Hamiltonian and its field derivatives.
#[derive(Debug, Clone)]
pub struct KpModel {
    stencil: Arc<Stencil>,
    material: MaterialParams,
    flags: CouplingFlags,
    kin: KineticCoefficients,
    kin_m1: KineticCoefficients,
    strain: Block,
    potential: Arc<Vec<f64>>,
}

/// Matrix-free Hermitian operator on the k.p grid.
#[derive(Debug, Clone)]
pub struct KpOperator {
    stencil: Arc<Stencil>,
    blocks: Vec<Vec<(u8, u8, C64)>>,
    weights: Option<Arc<Vec<C64>>>,
    onsite: Block,
    diag: Option<Arc<Vec<f64>>>,
    pub field: MagneticField,
    pub flags: CouplingFlags,
}

fn entries(b: &Block, tol: f64) -> Vec<(u8, u8, C64)> {
    let mut v = Vec::new();
    for r in 0..6 {
        for c in 0..6 {
            if b[(r, c)].norm() > tol {
                v.push((r as u8, c as u8, b[(r, c)]));
            }
        }
    }
    v
}

impl KpModel {
    /// Model for a device, with the electrostatic potential (V) on all mesh nodes.
    pub fn new(device: &DeviceModel, mesh: &Mesh, potential: &[f64], flags: CouplingFlags) -> Result<Self> {
        if potential.len() != mesh.num_nodes() {
            return Err(Error::MeshMismatch(format!(
                "potential has {} values for {} mesh nodes",
                potential.len(),
                mesh.num_nodes()
            )));
        }
        let grid = mesh.kp;
        let v: Vec<f64> = (0..grid.num_nodes())
            .map(|p| -MEV_PER_VOLT * potential[grid.mesh_node(mesh.n, p)])
            .collect();
        Self::from_parts(grid, device.channel_material().clone(), &device.strain, v, flags)
    }

    /// Model from a grid, a material and the hole potential energy (meV) per k.p node.
    pub fn from_parts(
        grid: KpGrid,
        material: MaterialParams,
        strain: &StrainTensor,
        potential_mev: Vec<f64>,
        flags: CouplingFlags,
    ) -> Result<Self> {
        if potential_mev.len() != grid.num_nodes() {
            return Err(Error::MeshMismatch(format!(
                "potential has {} values for {} k.p nodes",
                potential_mev.len(),
                grid.num_nodes()
            )));
        }
        if grid.n.iter().any(|&n| n < 2) || (grid.periodic_x && grid.n[0] < 3) {
            return Err(Error::MeshMismatch("k.p grid too small".into()));
        }
        let kin = kinetic_coefficients(&material, None);
        let kin_m1 = kinetic_coefficients(&material, flags.gamma3_override);
        let strain = if flags.strain { strain_hamiltonian(strain, &material) } else { Block::zeros() };
        Ok(Self {
            stencil: Arc::new(Stencil::new(grid)),
            material,
            flags,
            kin,
            kin_m1,
            strain,
            potential: Arc::new(potential_mev),
        })
    }

    /// Same model with another potential (V on mesh nodes).
    pub fn with_potential(&self, mesh: &Mesh, potential: &[f64]) -> Result<Self> {
        if potential.len() != mesh.num_nodes() || mesh.kp != self.stencil.grid {
            return Err(Error::MeshMismatch("potential does not match the model grid".into()));
        }
        let grid = self.stencil.grid;
        let v = (0..grid.num_nodes())
            .map(|p| -MEV_PER_VOLT * potential[grid.mesh_node(mesh.n, p)])
            .collect();
        Ok(Self { potential: Arc::new(v), ..self.clone() })
    }

    pub fn grid(&self) -> &KpGrid {
        &self.stencil.grid
    }

    pub fn material(&self) -> &MaterialParams {
        &self.material
    }

    pub fn flags(&self) -> &CouplingFlags {
        &self.flags
    }

    pub fn potential_mev(&self) -> &[f64] {
        &self.potential
    }

    pub fn dim(&self) -> usize {
        self.stencil.grid.dim()
    }

    fn link_blocks(&self, kin: &KineticCoefficients) -> Vec<Block> {
        let h = self.stencil.grid.h;
        self.stencil
            .offsets
            .iter()
            .map(|d| {
                let axes: Vec<usize> = (0..3).filter(|&a| d[a] != 0).collect();
                if axes.len() == 1 {
                    let a = axes[0];
                    -kin.c[a][a] / C64::new(h[a] * h[a], 0.0)
                } else {
                    let (a, b) = (axes[0], axes[1]);
                    let s = (d[a] * d[b]) as f64;
                    kin.c[a][b] * C64::new(-s / (4.0 * h[a] * h[b]), 0.0)
                }
            })
            .collect()
    }

    fn kinetic_onsite(&self) -> Block {
        let h = self.stencil.grid.h;
        let mut b = self.kin.c0;
        for a in 0..3 {
            b += self.kin.c[a][a] * C64::new(2.0 / (h[a] * h[a]), 0.0);
        }
        b
    }

    fn fluxes(&self, b: [f64; 3], origin: [f64; 3]) -> Vec<f64> {
        let st = &self.stencil;
        let g = &st.grid;
        let nl = st.offsets.len();
        let mut out = vec![0.0; g.num_nodes() * nl];
        out.par_chunks_mut(nl).enumerate().for_each(|(p, row)| {
            let rp = g.position(p);
            for (l, d) in st.offsets.iter().enumerate() {
                let rq = [
                    rp[0] + d[0] as f64 * g.h[0],
                    rp[1] + d[1] as f64 * g.h[1],
                    rp[2] + d[2] as f64 * g.h[2],
                ];
                row[l] = link_flux(b, origin, g.periodic_x, rp, rq);
            }
        });
        out
    }

    /// Hamiltonian at field `field` with the vector-potential gauge centred at `gauge_origin`.
    pub fn hamiltonian(&self, field: &MagneticField, gauge_origin: [f64; 3]) -> KpOperator {
        let bvec = field.vector();
        let mut onsite = self.kinetic_onsite() + self.strain;
        if self.flags.bloch_zeeman {
            onsite += bloch_zeeman(bvec, &self.material);
        }
        let weights = if self.flags.peierls && field.magnitude != 0.0 {
            let f = self.fluxes(bvec, gauge_origin);
            Some(Arc::new(f.into_iter().map(|phi| C64::from_polar(1.0, E_OVER_HBAR * phi)).collect()))
        } else {
            None
        };
        let scale = max_abs(&onsite).max(1.0);
        KpOperator {
            stencil: self.stencil.clone(),
            blocks: self.link_blocks(&self.kin).iter().map(|b| entries(b, 1e-14 * scale)).collect(),
            weights,
            onsite,
            diag: Some(self.potential.clone()),
            field: *field,
            flags: self.flags,
        }
    }

    /// Magnetic moment operator `M1 = -(H(+dB e_a) - H(-dB e_a)) / (2 dB)` at zero field.
    pub fn m1(&self, axis: usize, delta_b: f64, gauge_origin: [f64; 3]) -> KpOperator {
        let mut e = [0.0; 3];
        e[axis] = 1.0;
        let onsite = if self.flags.bloch_zeeman {
            zeeman_matrices(self.material.kappa)[axis] * C64::new(-MU_B, 0.0)
        } else {
            Block::zeros()
        };
        let (blocks, weights) = if self.flags.peierls {
            let f = self.fluxes(e, gauge_origin);
            let w: Vec<C64> = f
                .into_iter()
                .map(|phi| C64::new(0.0, -(E_OVER_HBAR * phi * delta_b).sin() / delta_b))
                .collect();
            let lb = self.link_blocks(&self.kin_m1);
            let scale = lb.iter().map(max_abs).fold(1.0, f64::max);
            (lb.iter().map(|b| entries(b, 1e-14 * scale)).collect(), Some(Arc::new(w)))
        } else {
            (vec![Vec::new(); self.stencil.offsets.len()], None)
        };
        KpOperator {
            stencil: self.stencil.clone(),
            blocks,
            weights,
            onsite,
            diag: None,
            field: MagneticField::zero(),
            flags: self.flags,
        }
    }
}

impl KpOperator {
    pub fn dim(&self) -> usize {
        self.stencil.grid.dim()
    }

    pub fn grid(&self) -> &KpGrid {
        &self.stencil.grid
    }

    /// `y = A x` for a single vector.
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        let st = &*self.stencil;
        let nl = st.offsets.len();
        let onsite = &self.onsite;
        let diag = self.diag.as_deref();
        let weights = self.weights.as_deref();
        y.par_chunks_mut(6).enumerate().with_min_len(64).for_each(|(p, yp)| {
            let xp = &x[6 * p..6 * p + 6];
            let d = diag.map_or(0.0, |v| v[p]);
            for r in 0..6 {
                let mut acc = xp[r] * d;
                for c in 0..6 {
                    acc += onsite[(r, c)] * xp[c];
                }
                yp[r] = acc;
            }
            for l in 0..nl {
                let blk = &self.blocks[l];
                if blk.is_empty() {
                    continue;
                }
                let q = st.neighbors[p * nl + l];
                if q == NONE {
                    continue;
                }
                let xq = &x[6 * q as usize..6 * q as usize + 6];
                let mut t = [C64::new(0.0, 0.0); 6];
                for &(r, c, v) in blk {
                    t[r as usize] += v * xq[c as usize];
                }
                let w = weights.map_or(C64::new(1.0, 0.0), |w| w[p * nl + l]);
                for r in 0..6 {
                    yp[r] += w * t[r];
                }
            }
        });
    }

    /// Applies the operator to the `m` columns of a column-major block.
    pub fn apply_block(&self, x: &[C64], y: &mut [C64], m: usize) {
        let n = self.dim();
        for j in 0..m {
            self.apply(&x[j * n..(j + 1) * n], &mut y[j * n..(j + 1) * n]);
        }
    }

    /// Visits every stored entry `(row, col, value)`.
    pub fn for_each_entry(&self, mut f: impl FnMut(usize, usize, C64)) {
        let st = &*self.stencil;
        let nl = st.offsets.len();
        for p in 0..st.grid.num_nodes() {
            let d = self.diag.as_deref().map_or(0.0, |v| v[p]);
            for r in 0..6 {
                for c in 0..6 {
                    let mut v = self.onsite[(r, c)];
                    if r == c {
                        v += d;
                    }
                    if v != C64::new(0.0, 0.0) {
                        f(6 * p + r, 6 * p + c, v);
                    }
                }
            }
            for l in 0..nl {
                let q = st.neighbors[p * nl + l];
                if q == NONE {
                    continue;
                }
                let w = self.weights.as_deref().map_or(C64::new(1.0, 0.0), |w| w[p * nl + l]);
                for &(r, c, v) in &self.blocks[l] {
                    f(6 * p + r as usize, 6 * q as usize + c as usize, w * v);
                }
            }
        }
    }

    /// Dense copy of the operator.
    pub fn to_dense(&self) -> Mat<C64> {
        let n = self.dim();
        let mut m = Mat::<C64>::zeros(n, n);
        self.for_each_entry(|r, c, v| m[(r, c)] += v);
        m
    }

    /// Writes the operator as `row col re im` lines.
    pub fn write_coo<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "# {} {}", self.dim(), self.dim())?;
        let mut res = Ok(());
        self.for_each_entry(|r, c, v| {
            if res.is_ok() {
                res = writeln!(w, "{r} {c} {:.17e} {:.17e}", v.re, v.im);
            }
        });
        res
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_estimate(&self) -> f64 {
        let mut row = [0.0f64; 6];
        for r in 0..6 {
            for c in 0..6 {
                row[r] += self.onsite[(r, c)].norm();
            }
        }
        for blk in &self.blocks {
            for &(r, _, v) in blk {
                row[r as usize] += v.norm();
            }
        }
        let dmax = self.diag.as_deref().map_or(0.0, |v| v.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        let wmax = self
            .weights
            .as_deref()
            .map_or(1.0, |w| w.iter().fold(0.0f64, |m, x| m.max(x.norm())).max(1.0));
        row.iter().fold(0.0f64, |m, &x| m.max(x)) * wmax + dmax
    }

    /// Largest hermiticity defect over stored entries.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut map = std::collections::HashMap::new();
        self.for_each_entry(|r, c, v| *map.entry((r, c)).or_insert(C64::new(0.0, 0.0)) += v);
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for (&(r, c), &v) in &map {
            let t = map.get(&(c, r)).copied().unwrap_or_default();
            worst = worst.max((v - t.conj()).norm());
            scale = scale.max(v.norm());
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }
}

//! Vertex-centred finite-volume Laplace solver with Dirichlet gates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::device::DeviceModel;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::symmetry::MirrorPlane;

/// Electrostatic potential (V) on every mesh node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialField {
    pub values: Vec<f64>,
    pub gate_voltages: BTreeMap<String, f64>,
}

/// Potential created by one volt on a gate, all other gates grounded.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitResponse {
    pub gate: String,
    pub d1: Vec<f64>,
    /// `-grad d1` per node (1/nm).
    pub e1: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
    None,
}

/// Discrete operator: diagonal and couplings to the +x, +y, +z neighbours.
#[derive(Debug, Clone)]
pub struct PoissonSystem {
    n: [usize; 3],
    diag: Vec<f64>,
    w: [Vec<f64>; 3],
    /// Gate index of each electrode node.
    electrode: Vec<Option<usize>>,
    gates: Vec<String>,
    ic: Vec<f64>,
}

/// Relative residual target of the iterative solve.
pub const POISSON_TOL: f64 = 1e-13;
const MAX_ITER: usize = 20_000;

impl PoissonSystem {
    pub fn new(device: &DeviceModel, mesh: &Mesh) -> Result<Self> {
        let n = mesh.n;
        let nn = mesh.num_nodes();
        let eps: Vec<f64> = mesh
            .cell_region
            .iter()
            .map(|&r| device.materials[device.regions[r as usize].material].permittivity)
            .collect();
        let cell = |i: usize, j: usize, k: usize| eps[mesh.cell(i, j, k)];
        let mut w = [vec![0.0; nn], vec![0.0; nn], vec![0.0; nn]];
        for i in 0..n[0] {
            for j in 0..n[1] {
                for k in 0..n[2] {
                    let p = mesh.node(i, j, k);
                    let ijk = [i, j, k];
                    for a in 0..3 {
                        if ijk[a] + 1 >= n[a] {
                            continue;
                        }
                        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
                        let mut s = 0.0;
                        for db in 0..2 {
                            for dc in 0..2 {
                                if ijk[b] + db == 0 || ijk[b] + db > n[b] - 1 {
                                    continue;
                                }
                                if ijk[c] + dc == 0 || ijk[c] + dc > n[c] - 1 {
                                    continue;
                                }
                                let mut q = ijk;
                                q[b] = ijk[b] + db - 1;
                                q[c] = ijk[c] + dc - 1;
                                s += cell(q[0], q[1], q[2]);
                            }
                        }
                        w[a][p] = s * 0.25 * mesh.h[b] * mesh.h[c] / mesh.h[a];
                    }
                }
            }
        }
        let mut electrode = vec![None; nn];
        for (g, gate) in device.gates.iter().enumerate() {
            for bbox in &gate.boxes {
                let mut lo = [0usize; 3];
                let mut hi = [0usize; 3];
                for a in 0..3 {
                    lo[a] = mesh.index_of(a, bbox.min[a]).ok_or_else(|| Error::DanglingGate(gate.name.clone()))?;
                    hi[a] = mesh.index_of(a, bbox.max[a]).ok_or_else(|| Error::DanglingGate(gate.name.clone()))?;
                }
                for i in lo[0]..=hi[0] {
                    for j in lo[1]..=hi[1] {
                        for k in lo[2]..=hi[2] {
                            electrode[mesh.node(i, j, k)] = Some(g);
                        }
                    }
                }
            }
        }
        if device.gates.is_empty() {
            return Err(Error::InvalidInput("electrostatics needs at least one gate".into()));
        }
        let mut diag = vec![0.0; nn];
        let stride = [n[1] * n[2], n[2], 1];
        for p in 0..nn {
            for a in 0..3 {
                if w[a][p] != 0.0 {
                    diag[p] += w[a][p];
                    diag[p + stride[a]] += w[a][p];
                }
            }
        }
        for p in 0..nn {
            if electrode[p].is_some() {
                diag[p] = 1.0;
            }
        }
        let mut sys = Self {
            n,
            diag,
            w,
            electrode,
            gates: device.gates.iter().map(|g| g.name.clone()).collect(),
            ic: Vec::new(),
        };
        // Couplings touching an electrode move to the right-hand side.
        sys.ic = sys.incomplete_cholesky();
        Ok(sys)
    }

    fn stride(&self) -> [usize; 3] {
        [self.n[1] * self.n[2], self.n[2], 1]
    }

    fn coupling(&self, a: usize, p: usize) -> f64 {
        if self.w[a][p] == 0.0 {
            return 0.0;
        }
        let q = p + self.stride()[a];
        if self.electrode[p].is_some() || self.electrode[q].is_some() {
            0.0
        } else {
            self.w[a][p]
        }
    }

    /// Applies the symmetric operator with electrode rows replaced by identity.
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let st = self.stride();
        for p in 0..x.len() {
            y[p] = self.diag[p] * x[p];
        }
        for a in 0..3 {
            for p in 0..x.len() {
                let c = self.coupling(a, p);
                if c != 0.0 {
                    let q = p + st[a];
                    y[p] -= c * x[q];
                    y[q] -= c * x[p];
                }
            }
        }
    }

    fn incomplete_cholesky(&self) -> Vec<f64> {
        let st = self.stride();
        let nn = self.diag.len();
        let mut d = vec![0.0; nn];
        for p in 0..nn {
            let mut v = self.diag[p];
            for a in 0..3 {
                if p >= st[a] && self.lower_exists(a, p) {
                    let q = p - st[a];
                    let c = self.coupling(a, q);
                    v -= c * c / d[q];
                }
            }
            d[p] = v;
        }
        d
    }

    fn lower_exists(&self, a: usize, p: usize) -> bool {
        let idx = [p / (self.n[1] * self.n[2]), (p / self.n[2]) % self.n[1], p % self.n[2]];
        idx[a] > 0
    }

    fn upper_exists(&self, a: usize, p: usize) -> bool {
        let idx = [p / (self.n[1] * self.n[2]), (p / self.n[2]) % self.n[1], p % self.n[2]];
        idx[a] + 1 < self.n[a]
    }

    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        let st = self.stride();
        let d = &self.ic;
        let nn = r.len();
        for p in 0..nn {
            let mut v = r[p];
            for a in 0..3 {
                if self.lower_exists(a, p) {
                    let q = p - st[a];
                    v += self.coupling(a, q) * z[q];
                }
            }
            z[p] = v / d[p];
        }
        for p in 0..nn {
            z[p] *= d[p];
        }
        for p in (0..nn).rev() {
            let mut v = z[p];
            for a in 0..3 {
                if self.upper_exists(a, p) {
                    v += self.coupling(a, p) * z[p + st[a]];
                }
            }
            z[p] = v / d[p];
        }
    }

    /// Solves with the given electrode voltages (indexed like the device gates).
    pub fn solve(&self, voltages: &[f64]) -> Result<Vec<f64>> {
        let nn = self.diag.len();
        let st = self.stride();
        let mut b = vec![0.0; nn];
        for p in 0..nn {
            if let Some(g) = self.electrode[p] {
                b[p] = voltages[g];
            }
        }
        for a in 0..3 {
            for p in 0..nn {
                if !self.upper_exists(a, p) {
                    continue;
                }
                let q = p + st[a];
                let w = self.w[a][p];
                match (self.electrode[p], self.electrode[q]) {
                    (Some(g), None) => b[q] += w * voltages[g],
                    (None, Some(g)) => b[p] += w * voltages[g],
                    _ => {}
                }
            }
        }
        let bnorm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut x = vec![0.0; nn];
        if bnorm == 0.0 {
            return Ok(x);
        }
        let mut r = b.clone();
        let mut z = vec![0.0; nn];
        self.precondition(&r, &mut z);
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut ap = vec![0.0; nn];
        for it in 0..MAX_ITER {
            self.apply(&p, &mut ap);
            let alpha = rz / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
            for i in 0..nn {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rn = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if rn <= POISSON_TOL * bnorm {
                return Ok(x);
            }
            if !rn.is_finite() {
                return Err(Error::SolverDiverged { iterations: it, residual: rn / bnorm });
            }
            self.precondition(&r, &mut z);
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..nn {
                p[i] = z[i] + beta * p[i];
            }
        }
        self.apply(&x, &mut ap);
        let rn = ap.iter().zip(&b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        Err(Error::SolverDiverged { iterations: MAX_ITER, residual: rn / bnorm })
    }

    /// Relative residual of the discrete equations for a solution `x`.
    pub fn residual(&self, voltages: &[f64], x: &[f64]) -> f64 {
        let nn = self.diag.len();
        let st = self.stride();
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for p in 0..nn {
            if self.electrode[p].is_some() {
                let g = self.electrode[p].unwrap();
                worst = worst.max((x[p] - voltages[g]).abs());
                continue;
            }
            let mut flux = 0.0;
            let mut fscale = 0.0;
            for a in 0..3 {
                if self.upper_exists(a, p) {
                    let f = self.w[a][p] * (x[p] - x[p + st[a]]);
                    flux += f;
                    fscale += f.abs();
                }
                if self.lower_exists(a, p) {
                    let q = p - st[a];
                    let f = self.w[a][q] * (x[p] - x[q]);
                    flux += f;
                    fscale += f.abs();
                }
            }
            worst = worst.max(flux.abs());
            scale = scale.max(fscale);
        }
        worst / scale.max(f64::MIN_POSITIVE)
    }

    pub fn gate_names(&self) -> &[String] {
        &self.gates
    }

    fn voltages(&self, map: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
        for name in map.keys() {
            if !self.gates.contains(name) {
                return Err(Error::UnknownGate(name.clone()));
            }
        }
        Ok(self.gates.iter().map(|g| map.get(g).copied().unwrap_or(0.0)).collect())
    }
}

/// Solves the Laplace problem for the given gate voltages (unlisted gates at 0 V).
pub fn solve_poisson(
    device: &DeviceModel,
    mesh: &Mesh,
    gate_voltages: &BTreeMap<String, f64>,
) -> Result<PotentialField> {
    let sys = PoissonSystem::new(device, mesh)?;
    let v = sys.voltages(gate_voltages)?;
    Ok(PotentialField { values: sys.solve(&v)?, gate_voltages: gate_voltages.clone() })
}

/// Unit response of one gate.
pub fn unit_response(device: &DeviceModel, mesh: &Mesh, gate: &str) -> Result<UnitResponse> {
    let sys = PoissonSystem::new(device, mesh)?;
    unit_response_with(&sys, mesh, gate)
}

pub fn unit_response_with(sys: &PoissonSystem, mesh: &Mesh, gate: &str) -> Result<UnitResponse> {
    let g = sys.gates.iter().position(|x| x == gate).ok_or_else(|| Error::UnknownGate(gate.into()))?;
    let mut v = vec![0.0; sys.gates.len()];
    v[g] = 1.0;
    let d1 = sys.solve(&v)?;
    let e1 = gradient(mesh, &d1).into_iter().map(|g| [-g[0], -g[1], -g[2]]).collect();
    Ok(UnitResponse { gate: gate.into(), d1, e1 })
}

/// Gradient of a nodal field: central differences inside, one-sided on the boundary.
pub fn gradient(mesh: &Mesh, f: &[f64]) -> Vec<[f64; 3]> {
    let n = mesh.n;
    let stride = [n[1] * n[2], n[2], 1];
    let mut out = vec![[0.0; 3]; f.len()];
    for i in 0..n[0] {
        for j in 0..n[1] {
            for k in 0..n[2] {
                let p = mesh.node(i, j, k);
                let ijk = [i, j, k];
                for a in 0..3 {
                    let h = mesh.h[a];
                    let s = stride[a];
                    out[p][a] = if ijk[a] == 0 {
                        (f[p + s] - f[p]) / h
                    } else if ijk[a] + 1 == n[a] {
                        (f[p] - f[p - s]) / h
                    } else {
                        (f[p + s] - f[p - s]) / (2.0 * h)
                    };
                }
            }
        }
    }
    out
}

/// Mirror image of node index `i` along `axis`, if it lies on the mesh.
pub fn mirror_index(mesh: &Mesh, plane: &MirrorPlane, i: usize) -> Result<Option<usize>> {
    let a = plane.axis();
    let t = 2.0 * (plane.position - mesh.origin[a]) / mesh.h[a];
    let tr = t.round();
    if (t - tr).abs() > 1e-6 {
        return Err(Error::MisalignedMirror(plane.name().into()));
    }
    let m = tr as i64 - i as i64;
    Ok(if m >= 0 && (m as usize) < mesh.n[a] { Some(m as usize) } else { None })
}

/// Classifies the parity of `E1` under a mirror over the nodes inside `region`.
pub fn field_parity(
    e1: &[[f64; 3]],
    mesh: &Mesh,
    mirror: &MirrorPlane,
    region: &crate::device::Aabb,
    tol: f64,
) -> Result<Parity> {
    let a = mirror.axis();
    let mut even = 0.0;
    let mut odd = 0.0;
    let mut norm = 0.0;
    for i in 0..mesh.n[0] {
        for j in 0..mesh.n[1] {
            for k in 0..mesh.n[2] {
                let r = [mesh.coord(0, i), mesh.coord(1, j), mesh.coord(2, k)];
                if !region.contains(r, 1e-9) {
                    continue;
                }
                let mut m = [i, j, k];
                match mirror_index(mesh, mirror, m[a])? {
                    Some(x) => m[a] = x,
                    None => continue,
                }
                let e = e1[mesh.node(i, j, k)];
                let em = e1[mesh.node(m[0], m[1], m[2])];
                for c in 0..3 {
                    let sigma_e = if c == a { -e[c] } else { e[c] };
                    even += (em[c] - sigma_e).powi(2);
                    odd += (em[c] + sigma_e).powi(2);
                    norm += e[c] * e[c];
                }
            }
        }
    }
    if norm == 0.0 {
        return Ok(Parity::Even);
    }
    let (re, ro) = ((even / norm).sqrt(), (odd / norm).sqrt());
    Ok(if re < tol {
        Parity::Even
    } else if ro < tol {
        Parity::Odd
    } else {
        Parity::None
    })
}

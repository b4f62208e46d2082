//! Device to g-matrix pipeline: electrostatics by superposition, three zero-field solves.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::device::{DeviceModel, DeviceSpec, StrainTensor};
use crate::electrostatics::{field_parity, gradient, mirror_index, unit_response_with, Parity, PoissonSystem, UnitResponse};
use crate::error::{Error, Result};
use crate::gmatrix::{
    align_doublet, compute_g, doublet_elements, g_prime_from_doublets, perturbation_series, GMatrixSet, M1Operators, PerturbationBreakdown,
    DEFAULT_DELTA_B, DEFAULT_DELTA_V,
};
use crate::kp::{CouplingFlags, KpModel, MagneticField};
use crate::mesh::{build_mesh, Mesh, MeshSpec};
use crate::spectrum::{centroid, lowest_hole_states, pair_kramers, KramersDoublet, SolverOptions};
use crate::symmetry::{symmetry_adapt, Mirror, MirrorPlane};

/// Gate voltages (V) by gate name; unlisted gates sit at 0 V.
pub type Bias = BTreeMap<String, f64>;

/// RF drive as a weighted combination of gates, `dV_g = w_g v_ac`.
pub type Drive = BTreeMap<String, f64>;

pub fn single_gate_drive(gate: &str) -> Drive {
    Drive::from([(gate.to_string(), 1.0)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineOptions {
    pub solver: SolverOptions,
    pub flags: CouplingFlags,
    pub delta_v: f64,
    pub delta_b: f64,
    /// Excited Kramers pairs kept beyond the ground doublet.
    pub excited_pairs: usize,
    /// Mirrors used to fix the doublet basis (empty: canonical Jz basis).
    pub adapt_mirrors: Vec<Mirror>,
    /// Gauge origin of the vector potential; the charge centroid when absent.
    pub gauge_origin: Option<[f64; 3]>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            flags: CouplingFlags::default(),
            delta_v: DEFAULT_DELTA_V,
            delta_b: DEFAULT_DELTA_B,
            excited_pairs: 0,
            adapt_mirrors: Vec::new(),
            gauge_origin: None,
        }
    }
}

/// Zero-field spectrum at one bias point.
#[derive(Debug, Clone)]
pub struct BiasSolution {
    pub model: KpModel,
    pub doublets: Vec<KramersDoublet>,
    pub iterations: usize,
    pub max_residual: f64,
}

impl BiasSolution {
    pub fn ground(&self) -> &KramersDoublet {
        &self.doublets[0]
    }

    /// Excitation energies `E_0 - E_n` (meV) of the excited pairs.
    pub fn excitations(&self) -> Vec<f64> {
        let e0 = self.doublets[0].energy;
        self.doublets[1..].iter().map(|d| e0 - d.energy).collect()
    }
}

/// Everything produced by the three-solve construction at one bias.
#[derive(Debug, Clone)]
pub struct OperatingPoint {
    pub bias: Bias,
    pub drive: Drive,
    pub solution: BiasSolution,
    pub gauge_origin: [f64; 3],
    pub m1: M1Operators,
    /// Drive potential per k.p node (V per volt of drive).
    pub d1_kp: Vec<f64>,
    /// Ground doublets at `V0 + dV` and `V0 - dV` before alignment.
    pub shifted: [KramersDoublet; 2],
    pub gset: GMatrixSet,
}

impl OperatingPoint {
    pub fn ground(&self) -> &KramersDoublet {
        self.solution.ground()
    }

    /// Rebuilds the g-matrices for another basis of the ground doublet and gauge origin.
    pub fn rebuild(&self, ground: &KramersDoublet, gauge_origin: [f64; 3]) -> Result<GMatrixSet> {
        let m1 = M1Operators::new(&self.solution.model, self.m1.delta_b, gauge_origin);
        gmatrix_set(&m1, ground, &self.shifted, self.gset.delta_v)
    }

    pub fn perturbation(&self, b: [f64; 3], b_field: f64, v_ac: f64) -> Result<PerturbationBreakdown> {
        let s = &self.solution;
        perturbation_series(s.ground(), &s.doublets[1..], &self.m1, &self.d1_kp, b, b_field, v_ac)
    }
}

/// A device with its mesh and per-gate unit responses.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub device: DeviceModel,
    pub mesh: Mesh,
    pub responses: Vec<UnitResponse>,
}

impl Pipeline {
    pub fn new(device: DeviceModel, mesh_spec: &MeshSpec) -> Result<Self> {
        let mesh = build_mesh(&device, mesh_spec)?;
        let responses = if device.gates.is_empty() {
            Vec::new()
        } else {
            let sys = PoissonSystem::new(&device, &mesh)?;
            device
                .gates
                .iter()
                .map(|g| unit_response_with(&sys, &mesh, &g.name))
                .collect::<Result<Vec<_>>>()?
        };
        Ok(Self { device, mesh, responses })
    }

    pub fn from_spec(spec: &DeviceSpec, mesh_spec: &MeshSpec) -> Result<Self> {
        Self::new(crate::device::build_device(spec)?, mesh_spec)
    }

    /// Replaces the strain without redoing the electrostatics.
    pub fn with_strain(&self, strain: StrainTensor) -> Self {
        let mut p = self.clone();
        p.device.strain = strain;
        p
    }

    fn check_gates<'a>(&self, names: impl Iterator<Item = &'a String>) -> Result<()> {
        for n in names {
            self.device.gate_index(n)?;
        }
        Ok(())
    }

    /// Superposed potential (V) on the mesh nodes.
    pub fn potential(&self, bias: &Bias) -> Result<Vec<f64>> {
        self.check_gates(bias.keys())?;
        let mut v = vec![0.0; self.mesh.num_nodes()];
        for r in &self.responses {
            let vg = bias.get(&r.gate).copied().unwrap_or(0.0);
            if vg != 0.0 {
                v.iter_mut().zip(&r.d1).for_each(|(x, d)| *x += vg * d);
            }
        }
        Ok(v)
    }

    /// Drive potential per volt on the mesh nodes.
    pub fn drive_potential(&self, drive: &Drive) -> Result<Vec<f64>> {
        if drive.is_empty() {
            return Err(Error::InvalidInput("empty drive".into()));
        }
        self.potential(drive)
    }

    /// Drive potential per volt restricted to the k.p nodes.
    pub fn drive_kp(&self, drive: &Drive) -> Result<Vec<f64>> {
        let d = self.drive_potential(drive)?;
        let g = &self.mesh.kp;
        Ok((0..g.num_nodes()).map(|p| d[g.mesh_node(self.mesh.n, p)]).collect())
    }

    pub fn model(&self, bias: &Bias, flags: CouplingFlags) -> Result<KpModel> {
        KpModel::new(&self.device, &self.mesh, &self.potential(bias)?, flags)
    }

    /// Zero-field spectrum with `1 + excited_pairs` Kramers doublets.
    pub fn solve_bias(&self, bias: &Bias, opts: &PipelineOptions) -> Result<BiasSolution> {
        let model = self.model(bias, opts.flags)?;
        solve_model(model, opts)
    }

    /// The three-solve g-matrix construction at `bias` for the given drive.
    pub fn operating_point(&self, bias: &Bias, drive: &Drive, opts: &PipelineOptions) -> Result<OperatingPoint> {
        self.check_gates(bias.keys())?;
        self.check_gates(drive.keys())?;
        let d1_kp = self.drive_kp(drive)?;
        let mut solution = self.solve_bias(bias, opts)?;
        if !opts.adapt_mirrors.is_empty() {
            let g = *solution.model.grid();
            solution.doublets[0] = symmetry_adapt(&g, &solution.doublets[0], &opts.adapt_mirrors)?;
        }
        let gauge_origin = opts.gauge_origin.unwrap_or_else(|| centroid(solution.model.grid(), solution.ground()));
        let m1 = M1Operators::new(&solution.model, opts.delta_b, gauge_origin);
        let shifted_ground = |sign: f64| -> Result<KramersDoublet> {
            let mut b = bias.clone();
            for (name, w) in drive {
                *b.entry(name.clone()).or_insert(0.0) += sign * opts.delta_v * w;
            }
            let ground_only = PipelineOptions { excited_pairs: 0, ..opts.clone() };
            Ok(self.solve_bias(&b, &ground_only)?.doublets.swap_remove(0))
        };
        let shifted = [shifted_ground(1.0)?, shifted_ground(-1.0)?];
        let gset = gmatrix_set(&m1, solution.ground(), &shifted, opts.delta_v)?;
        Ok(OperatingPoint { bias: bias.clone(), drive: drive.clone(), solution, gauge_origin, m1, d1_kp, shifted, gset })
    }

    /// Mirror plane through the centre of the k.p grid.
    pub fn central_plane(&self, mirror: Mirror) -> MirrorPlane {
        MirrorPlane { mirror, position: self.mesh.kp.center()[mirror.axis()] }
    }

    /// Whether materials, bias potential and strain are invariant under `mirror`.
    pub fn is_symmetric(&self, mirror: Mirror, bias: &Bias, tol: f64) -> Result<bool> {
        let plane = self.central_plane(mirror);
        let a = mirror.axis();
        let m = &self.mesh;
        let Ok(Some(first)) = mirror_index(m, &plane, 0) else { return Ok(false) };
        if first + 1 != m.n[a] {
            return Ok(false);
        }
        let e = &self.device.strain.0;
        if (0..3).any(|b| b != a && (e[a][b].abs() > 1e-15 || e[b][a].abs() > 1e-15)) {
            return Ok(false);
        }
        let nc = [m.n[0] - 1, m.n[1] - 1, m.n[2] - 1];
        let mat = |c: usize| self.device.regions[m.cell_region[c] as usize].material;
        for i in 0..nc[0] {
            for j in 0..nc[1] {
                for k in 0..nc[2] {
                    let mut q = [i, j, k];
                    q[a] = nc[a] - 1 - q[a];
                    if mat(m.cell(i, j, k)) != mat(m.cell(q[0], q[1], q[2])) {
                        return Ok(false);
                    }
                }
            }
        }
        let v = self.potential(bias)?;
        let scale = v.iter().fold(1e-12f64, |x, y| x.max(y.abs()));
        for i in 0..m.n[0] {
            for j in 0..m.n[1] {
                for k in 0..m.n[2] {
                    let mut q = [i, j, k];
                    q[a] = m.n[a] - 1 - q[a];
                    if (v[m.node(i, j, k)] - v[m.node(q[0], q[1], q[2])]).abs() > tol * scale {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    /// Exact mirrors at `bias` with the parity of the drive field under each.
    pub fn detect_mirrors(&self, bias: &Bias, drive: &Drive, tol: f64) -> Result<Vec<(Mirror, Parity)>> {
        let e1 = gradient(&self.mesh, &self.drive_potential(drive)?);
        let channel = self.device.channel_region().bbox;
        let mut out = Vec::new();
        for mirror in Mirror::ALL {
            if self.is_symmetric(mirror, bias, tol)? {
                let parity = field_parity(&e1, &self.mesh, &self.central_plane(mirror), &channel, tol)?;
                out.push((mirror, parity));
            }
        }
        Ok(out)
    }

    /// g-matrix of the ground doublet alone (no drive).
    pub fn g_matrix(&self, bias: &Bias, opts: &PipelineOptions) -> Result<([[f64; 3]; 3], BiasSolution)> {
        let s = self.solve_bias(bias, opts)?;
        let origin = opts.gauge_origin.unwrap_or_else(|| centroid(s.model.grid(), s.ground()));
        let m1 = M1Operators::new(&s.model, opts.delta_b, origin);
        Ok((compute_g(&doublet_elements(&m1, s.ground())), s))
    }
}

/// g, g' and derived tensors from the reference doublet and the two shifted ones.
pub fn gmatrix_set(
    m1: &M1Operators,
    ground: &KramersDoublet,
    shifted: &[KramersDoublet; 2],
    delta_v: f64,
) -> Result<GMatrixSet> {
    let g = compute_g(&doublet_elements(m1, ground));
    let (dp, a_plus) = align_doublet(ground, &shifted[0])?;
    let (dm, a_minus) = align_doublet(ground, &shifted[1])?;
    let g_plus = compute_g(&doublet_elements(m1, &dp));
    let g_minus = compute_g(&doublet_elements(m1, &dm));
    let gp = g_prime_from_doublets(m1, &dp, &dm, delta_v);
    Ok(GMatrixSet::with_g_prime(g, gp, g_plus, g_minus, delta_v, m1.delta_b, [a_plus, a_minus]))
}

/// Zero-field solve of an assembled model.
pub fn solve_model(model: KpModel, opts: &PipelineOptions) -> Result<BiasSolution> {
    let h = model.hamiltonian(&MagneticField::zero(), [0.0; 3]);
    let count = 2 * (1 + opts.excited_pairs);
    let eig = lowest_hole_states(&h, count, &opts.solver)?;
    let tol = (1e3 * opts.solver.tol * eig.norm_estimate).max(1e-7);
    let doublets = pair_kramers(&eig, tol)?;
    let max_residual = eig.residuals.iter().cloned().fold(0.0, f64::max);
    Ok(BiasSolution { model, doublets, iterations: eig.iterations, max_residual })
}

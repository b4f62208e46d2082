//! Highest hole states of the k.p operator and Kramers-pair bookkeeping.

mod lobpcg;
pub mod precond;

use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kp::bulk::{angular_momentum, BAND_JZ, TR_PERM, TR_PHASE};
use crate::kp::KpOperator;
use crate::units::HBAR2_2M0;
pub use lobpcg::{lobpcg, LobpcgParams, LobpcgResult};
use precond::LaplacePreconditioner;

/// Six-band envelope, node-major and band-minor.
pub type SpinorField = Vec<C64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Dense diagonalization up to `dense_max_dim`, iterative above.
    Auto,
    Dense,
    Lobpcg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub method: Method,
    /// Residual target relative to the operator norm estimate.
    pub tol: f64,
    pub max_iter: usize,
    /// Extra block vectors beyond the requested states.
    pub guard: usize,
    pub seed: u64,
    pub dense_max_dim: usize,
    /// Energy window (meV) below which neighbouring levels count as degenerate.
    pub degeneracy_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            method: Method::Auto,
            tol: 1e-11,
            max_iter: 3000,
            guard: 4,
            seed: 0x5eed,
            dense_max_dim: 2600,
            degeneracy_tol: 1e-6,
        }
    }
}

/// Eigenpairs sorted by decreasing hole energy (ground state first).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSet {
    pub energies: Vec<f64>,
    pub states: Vec<SpinorField>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub norm_estimate: f64,
}

/// A Kramers pair in the canonical basis `up = T down`, `down = -T up`.
#[derive(Debug, Clone, PartialEq)]
pub struct KramersDoublet {
    pub energy: f64,
    pub up: SpinorField,
    pub down: SpinorField,
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Time reversal of a six-band envelope.
pub fn time_reversal(psi: &[C64]) -> SpinorField {
    let mut out = vec![C64::new(0.0, 0.0); psi.len()];
    for p in 0..psi.len() / 6 {
        for b in 0..6 {
            out[6 * p + TR_PERM[b]] = psi[6 * p + b].conj() * TR_PHASE[b];
        }
    }
    out
}

/// Weight of the heavy-hole components.
pub fn heavy_hole_weight(psi: &[C64]) -> f64 {
    let mut hh = 0.0;
    let mut tot = 0.0;
    for (i, z) in psi.iter().enumerate() {
        let w = z.norm_sqr();
        tot += w;
        if i % 6 == 0 || i % 6 == 3 {
            hh += w;
        }
    }
    hh / tot
}

fn column(m: &Mat<C64>, j: usize) -> SpinorField {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

fn residual(op: &KpOperator, psi: &[C64], e: f64) -> f64 {
    let mut y = vec![C64::new(0.0, 0.0); psi.len()];
    op.apply(psi, &mut y);
    y.iter().zip(psi).map(|(a, b)| (a - b * e).norm_sqr()).sum::<f64>().sqrt()
}

/// The `count` hole states with the highest energies.
pub fn lowest_hole_states(op: &KpOperator, count: usize, opts: &SolverOptions) -> Result<EigenSet> {
    let n = op.dim();
    if count < 1 || count > n {
        return Err(Error::InvalidInput(format!("cannot compute {count} states of a {n}-dimensional operator")));
    }
    let dense = match opts.method {
        Method::Dense => true,
        Method::Lobpcg => false,
        Method::Auto => n <= opts.dense_max_dim,
    };
    let anorm = op.norm_estimate();
    if dense {
        let h = op.to_dense();
        let eig = h.self_adjoint_eigen(Side::Lower).map_err(|e| Error::InvalidInput(format!("{e:?}")))?;
        let s = eig.S().column_vector();
        let u = eig.U();
        let mut energies = Vec::with_capacity(count);
        let mut states = Vec::with_capacity(count);
        for k in 0..count {
            let j = n - 1 - k;
            energies.push(s[j].re);
            states.push((0..n).map(|i| u[(i, j)]).collect::<SpinorField>());
        }
        if count < n && (s[n - count].re - s[n - count - 1].re).abs() < opts.degeneracy_tol {
            return Err(Error::DegenerateSubspaceUnresolved { energy: s[n - count].re });
        }
        let residuals = states.iter().zip(&energies).map(|(s, &e)| residual(op, s, e)).collect();
        return Ok(EigenSet { energies, states, residuals, iterations: 0, norm_estimate: anorm });
    }

    let grid = *op.grid();
    let mut shift = 0.0;
    for a in 0..3 {
        let l = (grid.n[a] + 1) as f64 * grid.h[a];
        shift += (std::f64::consts::PI / l).powi(2);
    }
    let scale = 4.0 * HBAR2_2M0;
    let pc = LaplacePreconditioner::new(&grid, scale, scale * shift);
    let apply = |x: &Mat<C64>| {
        let mut y = Mat::<C64>::zeros(x.nrows(), x.ncols());
        for j in 0..x.ncols() {
            op.apply(x.col_as_slice(j), y.col_as_slice_mut(j));
            for v in y.col_as_slice_mut(j) {
                *v = -*v;
            }
        }
        y
    };
    let pre = |x: &Mat<C64>| {
        let mut y = Mat::<C64>::zeros(x.nrows(), x.ncols());
        for j in 0..x.ncols() {
            pc.apply(x.col_as_slice(j), y.col_as_slice_mut(j));
        }
        y
    };
    let block = (count + opts.guard).min(n);
    let res = lobpcg(
        n,
        &apply,
        &pre,
        &LobpcgParams {
            block,
            wanted: count,
            tol_abs: opts.tol * anorm,
            max_iter: opts.max_iter,
            seed: opts.seed,
        },
    )?;
    if block > count && (res.values[count] - res.values[count - 1]).abs() < opts.degeneracy_tol {
        return Err(Error::DegenerateSubspaceUnresolved { energy: -res.values[count - 1] });
    }
    let energies: Vec<f64> = res.values[..count].iter().map(|v| -v).collect();
    let states: Vec<SpinorField> = (0..count).map(|j| column(&res.vectors, j)).collect();
    Ok(EigenSet {
        energies,
        states,
        residuals: res.residuals[..count].to_vec(),
        iterations: res.iterations,
        norm_estimate: anorm,
    })
}

fn band_operator_matrix(states: [&[C64]; 2], op: &dyn Fn(&[C64]) -> SpinorField) -> [[C64; 2]; 2] {
    let images = [op(states[0]), op(states[1])];
    let mut m = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = inner(states[i], &images[j]);
        }
    }
    m
}

/// Eigenvector of the larger eigenvalue of a 2x2 Hermitian matrix, and the eigenvalue gap.
fn top_eigvec(m: &[[C64; 2]; 2]) -> ([C64; 2], f64) {
    let a = m[0][0].re;
    let d = m[1][1].re;
    let b = m[0][1];
    let half = 0.5 * (a - d);
    let disc = (half * half + b.norm_sqr()).sqrt();
    let lam = 0.5 * (a + d) + disc;
    let v = if b.norm() < 1e-300 {
        if a >= d {
            [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
        } else {
            [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]
        }
    } else {
        let v = [b, C64::new(lam - a, 0.0)];
        let nn = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        [v[0] / nn, v[1] / nn]
    };
    (v, 2.0 * disc)
}

fn band_apply(psi: &[C64], m: &crate::kp::bulk::Block) -> SpinorField {
    let mut out = vec![C64::new(0.0, 0.0); psi.len()];
    for p in 0..psi.len() / 6 {
        for r in 0..6 {
            let mut acc = C64::new(0.0, 0.0);
            for c in 0..6 {
                acc += m[(r, c)] * psi[6 * p + c];
            }
            out[6 * p + r] = acc;
        }
    }
    out
}

/// Canonical Kramers basis of the span of two degenerate states.
pub fn canonical_doublet(a: &[C64], b: &[C64], energy: f64) -> Result<KramersDoublet> {
    // Orthonormalize the pair first.
    let na = norm(a);
    let a: SpinorField = a.iter().map(|x| x / na).collect();
    let ov = inner(&a, b);
    let mut b: SpinorField = b.iter().zip(&a).map(|(y, x)| y - x * ov).collect();
    let nb = norm(&b);
    b.iter_mut().for_each(|x| *x /= nb);

    let jz = |psi: &[C64]| -> SpinorField {
        psi.iter().enumerate().map(|(i, z)| z * BAND_JZ[i % 6]).collect()
    };
    let j = angular_momentum();
    let jx = |psi: &[C64]| band_apply(psi, &j[0]);
    let jy = |psi: &[C64]| band_apply(psi, &j[1]);
    let ops: [&dyn Fn(&[C64]) -> SpinorField; 3] = [&jz, &jx, &jy];
    let mut coeff = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    for op in ops {
        let m = band_operator_matrix([&a, &b], op);
        let (v, gap) = top_eigvec(&m);
        coeff = v;
        if gap > 1e-8 {
            break;
        }
    }
    let mut up: SpinorField = a.iter().zip(&b).map(|(x, y)| x * coeff[0] + y * coeff[1]).collect();
    let (imax, _) = up
        .iter()
        .enumerate()
        .fold((0usize, -1.0f64), |acc, (i, z)| if z.norm() > acc.1 * (1.0 + 1e-9) { (i, z.norm()) } else { acc });
    let ph = up[imax].conj() / up[imax].norm();
    up.iter_mut().for_each(|z| *z *= ph);
    let nu = norm(&up);
    up.iter_mut().for_each(|z| *z /= nu);

    let t = time_reversal(&up);
    let ca = inner(&a, &t);
    let cb = inner(&b, &t);
    let proj: SpinorField = a.iter().zip(&b).map(|(x, y)| -(x * ca + y * cb)).collect();
    let overlap = norm(&proj);
    if overlap < 0.999 {
        return Err(Error::UnpairedState { index: 0, splitting: 0.0, overlap });
    }
    let cu = inner(&up, &proj);
    let mut down: SpinorField = proj.iter().zip(&up).map(|(d, u)| d - u * cu).collect();
    let nd = norm(&down);
    down.iter_mut().for_each(|z| *z /= nd);
    Ok(KramersDoublet { energy, up, down })
}

/// Groups consecutive states into Kramers doublets.
pub fn pair_kramers(eigs: &EigenSet, tol_energy: f64) -> Result<Vec<KramersDoublet>> {
    let n = eigs.energies.len();
    if n % 2 != 0 {
        return Err(Error::UnpairedState { index: n - 1, splitting: f64::INFINITY, overlap: 0.0 });
    }
    let mut out = Vec::with_capacity(n / 2);
    for k in 0..n / 2 {
        let (e0, e1) = (eigs.energies[2 * k], eigs.energies[2 * k + 1]);
        let splitting = (e0 - e1).abs();
        if splitting > tol_energy {
            return Err(Error::UnpairedState { index: 2 * k, splitting, overlap: 0.0 });
        }
        let d = canonical_doublet(&eigs.states[2 * k], &eigs.states[2 * k + 1], 0.5 * (e0 + e1)).map_err(
            |e| match e {
                Error::UnpairedState { overlap, .. } => Error::UnpairedState { index: 2 * k, splitting, overlap },
                other => other,
            },
        )?;
        out.push(d);
    }
    Ok(out)
}

/// Charge centroid of a doublet.
pub fn centroid(grid: &crate::mesh::KpGrid, d: &KramersDoublet) -> [f64; 3] {
    let mut c = [0.0; 3];
    let mut w = 0.0;
    for p in 0..grid.num_nodes() {
        let rho: f64 = (0..6).map(|b| d.up[6 * p + b].norm_sqr() + d.down[6 * p + b].norm_sqr()).sum();
        let r = grid.position(p);
        for a in 0..3 {
            c[a] += rho * r[a];
        }
        w += rho;
    }
    c.map(|x| x / w)
}

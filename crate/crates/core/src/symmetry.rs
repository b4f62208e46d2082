//! Mirror-plane constraints on the g-matrix and its gate derivative.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::electrostatics::Parity;
use crate::error::{Error, Result};
use crate::kp::bulk::{angular_momentum, Block};
use crate::mesh::KpGrid;
use crate::spectrum::KramersDoublet;

/// The three mirrors of the device frame, named by the plane they leave invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mirror {
    /// Normal along x.
    Yz,
    /// Normal along y.
    Xz,
    /// Normal along z.
    Xy,
}

impl Mirror {
    pub const ALL: [Mirror; 3] = [Mirror::Yz, Mirror::Xz, Mirror::Xy];

    pub fn axis(self) -> usize {
        match self {
            Mirror::Yz => 0,
            Mirror::Xz => 1,
            Mirror::Xy => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mirror::Yz => "yz",
            Mirror::Xz => "xz",
            Mirror::Xy => "xy",
        }
    }

    /// Pseudo-spin representation of the mirror in a symmetry-adapted doublet.
    pub fn gamma_s(self) -> [[C64; 2]; 2] {
        let z = C64::new(0.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            Mirror::Yz => [[z, -i], [-i, z]],
            Mirror::Xz => [[z, C64::new(-1.0, 0.0)], [C64::new(1.0, 0.0), z]],
            Mirror::Xy => [[-i, z], [z, i]],
        }
    }

    /// Action of the mirror on the magnetic field (an axial vector).
    pub fn gamma_b(self) -> [f64; 3] {
        match self {
            Mirror::Yz => [1.0, -1.0, -1.0],
            Mirror::Xz => [-1.0, 1.0, -1.0],
            Mirror::Xy => [-1.0, -1.0, 1.0],
        }
    }
}

/// A mirror placed at a coordinate along its normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MirrorPlane {
    pub mirror: Mirror,
    pub position: f64,
}

impl MirrorPlane {
    pub fn axis(&self) -> usize {
        self.mirror.axis()
    }

    pub fn name(&self) -> &'static str {
        self.mirror.name()
    }
}

/// 3x3 mask of entries constrained to vanish.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroPattern {
    pub zero: [[bool; 3]; 3],
    pub provenance: Vec<String>,
}

// Allowed entries of g under a single mirror, and of g' for an even or odd drive.
const G_ALLOWED: [[[bool; 3]; 3]; 3] = [
    // yz
    [[true, false, false], [false, true, true], [false, true, true]],
    // xz
    [[true, false, true], [false, true, false], [true, false, true]],
    // xy
    [[true, true, false], [true, true, false], [false, false, true]],
];
const GP_ODD_ALLOWED: [[[bool; 3]; 3]; 3] = [
    [[false, true, true], [true, false, false], [true, false, false]],
    [[false, true, false], [true, false, true], [false, true, false]],
    [[false, false, true], [false, false, true], [true, true, false]],
];

impl ZeroPattern {
    pub fn none() -> Self {
        Self { zero: [[false; 3]; 3], provenance: Vec::new() }
    }

    fn from_allowed(allowed: &[[bool; 3]; 3], tag: String) -> Self {
        let mut zero = [[false; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                zero[i][j] = !allowed[i][j];
            }
        }
        Self { zero, provenance: vec![tag] }
    }

    /// Union of the constrained zeros.
    pub fn combine(&self, other: &ZeroPattern) -> ZeroPattern {
        let mut zero = self.zero;
        for i in 0..3 {
            for j in 0..3 {
                zero[i][j] |= other.zero[i][j];
            }
        }
        let mut provenance = self.provenance.clone();
        provenance.extend(other.provenance.iter().cloned());
        ZeroPattern { zero, provenance }
    }

    pub fn is_all_zero(&self) -> bool {
        self.zero.iter().flatten().all(|&z| z)
    }
}

/// Shape of g for a set of mirrors.
pub fn g_pattern(mirrors: &[Mirror]) -> ZeroPattern {
    mirrors.iter().fold(ZeroPattern::none(), |acc, &m| {
        acc.combine(&ZeroPattern::from_allowed(&G_ALLOWED[m.axis()], format!("g/{}", m.name())))
    })
}

/// Shape of g' for mirrors with the parity of the drive field under each.
pub fn g_prime_pattern(mirrors: &[(Mirror, Parity)]) -> ZeroPattern {
    mirrors.iter().fold(ZeroPattern::none(), |acc, &(m, p)| {
        let pat = match p {
            Parity::Even => ZeroPattern::from_allowed(&G_ALLOWED[m.axis()], format!("g'/{}/even", m.name())),
            Parity::Odd => ZeroPattern::from_allowed(&GP_ODD_ALLOWED[m.axis()], format!("g'/{}/odd", m.name())),
            Parity::None => ZeroPattern { zero: [[false; 3]; 3], provenance: vec![format!("g'/{}/other", m.name())] },
        };
        acc.combine(&pat)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternReport {
    pub pass: bool,
    /// Largest entry that should vanish: (row, column, value / max |entry|).
    pub worst: Option<(usize, usize, f64)>,
    pub violations: Vec<(usize, usize, f64)>,
}

/// Checks that the masked entries are below `tol_rel` times the largest entry.
pub fn verify_pattern(m: &[[f64; 3]; 3], pattern: &ZeroPattern, tol_rel: f64) -> PatternReport {
    let scale = m.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut worst: Option<(usize, usize, f64)> = None;
    let mut violations = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            if !pattern.zero[i][j] {
                continue;
            }
            let r = if scale > 0.0 { m[i][j].abs() / scale } else { 0.0 };
            if worst.map_or(true, |w| r > w.2) {
                worst = Some((i, j, r));
            }
            if r > tol_rel {
                violations.push((i, j, r));
            }
        }
    }
    PatternReport { pass: violations.is_empty(), worst, violations }
}

/// Field orientations with a symmetry-forced vanishing Rabi frequency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Extinctions {
    /// Every orientation (g' vanishes).
    All,
    /// Device axes (0 = x, 1 = y, 2 = z).
    Axes(Vec<usize>),
}

/// Axis orientations `b = e_k` for which `(g b) x (g' b)` vanishes symbolically.
pub fn predict_extinctions(g: &ZeroPattern, gp: &ZeroPattern) -> Extinctions {
    if gp.is_all_zero() {
        return Extinctions::All;
    }
    let mut axes = Vec::new();
    for k in 0..3 {
        let parallel = (0..3).all(|i| {
            (0..3).all(|j| i == j || g.zero[i][k] || gp.zero[j][k])
        });
        if parallel {
            axes.push(k);
        }
    }
    Extinctions::Axes(axes)
}

/// Mirror acting on a six-band envelope: band rotation `exp(-i pi J_n)` and spatial reflection
/// through the centre of the k.p grid.
pub fn apply_mirror(grid: &KpGrid, mirror: Mirror, psi: &[C64]) -> Vec<C64> {
    let d = mirror_band_matrix(mirror);
    let a = mirror.axis();
    let mut out = vec![C64::new(0.0, 0.0); psi.len()];
    for p in 0..grid.num_nodes() {
        let mut ijk = grid.ijk(p);
        ijk[a] = grid.n[a] - 1 - ijk[a];
        let q = grid.node(ijk[0], ijk[1], ijk[2]);
        for r in 0..6 {
            let mut acc = C64::new(0.0, 0.0);
            for c in 0..6 {
                acc += d[(r, c)] * psi[6 * p + c];
            }
            out[6 * q + r] = acc;
        }
    }
    out
}

/// `exp(-i pi J_n)` in the six-band basis.
pub fn mirror_band_matrix(mirror: Mirror) -> Block {
    let j = angular_momentum()[mirror.axis()];
    // J_n has half-integer eigenvalues m, so exp(-i pi J_n) = sum_m exp(-i pi m) P_m.
    let eig = j.symmetric_eigen();
    let mut out = Block::zeros();
    for k in 0..6 {
        let m = eig.eigenvalues[k];
        let v = eig.eigenvectors.column(k);
        let ph = C64::from_polar(1.0, -std::f64::consts::PI * m);
        out += v * v.adjoint() * ph;
    }
    out
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// 2x2 matrix of the mirror in the doublet basis.
pub fn doublet_representation(grid: &KpGrid, mirror: Mirror, d: &KramersDoublet) -> [[C64; 2]; 2] {
    let basis = [&d.up, &d.down];
    let images = [apply_mirror(grid, mirror, &d.up), apply_mirror(grid, mirror, &d.down)];
    let mut g = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            g[i][j] = inner(basis[i], &images[j]);
        }
    }
    g
}

/// Axis `n` of a 2x2 mirror matrix `-i n.sigma` (up to overall sign).
fn mirror_axis(g: &[[C64; 2]; 2]) -> Result<[f64; 3]> {
    // tr(G sigma_k) = -2 i n_k
    let i = C64::new(0.0, 1.0);
    let tx = g[0][1] + g[1][0];
    let ty = (g[1][0] - g[0][1]) * i;
    let tz = g[0][0] - g[1][1];
    let n = [(tx * i * 0.5).re, (ty * i * 0.5).re, (tz * i * 0.5).re];
    let im = [(tx * i * 0.5).im, (ty * i * 0.5).im, (tz * i * 0.5).im];
    let norm = n.iter().map(|x| x * x).sum::<f64>().sqrt();
    let imn = im.iter().map(|x| x * x).sum::<f64>().sqrt();
    let trace = (g[0][0] + g[1][1]).norm();
    if (norm - 1.0).abs() > 1e-6 || imn > 1e-6 || trace > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "doublet is not symmetric under the mirror (axis norm {norm}, residual {imn}, trace {trace})"
        )));
    }
    Ok(n.map(|x| x / norm))
}

fn su2(axis: [f64; 3], angle: f64) -> [[C64; 2]; 2] {
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    let i = C64::new(0.0, 1.0);
    [
        [C64::new(c, 0.0) - i * s * axis[2], -i * s * C64::new(axis[0], -axis[1])],
        [-i * s * C64::new(axis[0], axis[1]), C64::new(c, 0.0) + i * s * axis[2]],
    ]
}

fn rotate_doublet(d: &KramersDoublet, w: &[[C64; 2]; 2]) -> KramersDoublet {
    let up = d.up.iter().zip(&d.down).map(|(u, v)| u * w[0][0] + v * w[1][0]).collect();
    let down = d.up.iter().zip(&d.down).map(|(u, v)| u * w[0][1] + v * w[1][1]).collect();
    KramersDoublet { energy: d.energy, up, down }
}

/// SU(2) rotation taking unit vector `n` to unit vector `t`, restricted to rotations about
/// `fixed` when given (which must be orthogonal to both).
fn rotation_between(n: [f64; 3], t: [f64; 3], fixed: Option<[f64; 3]>) -> ([f64; 3], f64) {
    let dot = (n[0] * t[0] + n[1] * t[1] + n[2] * t[2]).clamp(-1.0, 1.0);
    let cross = [n[1] * t[2] - n[2] * t[1], n[2] * t[0] - n[0] * t[2], n[0] * t[1] - n[1] * t[0]];
    let cn = cross.iter().map(|x| x * x).sum::<f64>().sqrt();
    let axis = match fixed {
        Some(f) => {
            let s = cross[0] * f[0] + cross[1] * f[1] + cross[2] * f[2];
            if s < 0.0 {
                f.map(|x| -x)
            } else {
                f
            }
        }
        None if cn > 1e-12 => cross.map(|x| x / cn),
        None => {
            // antiparallel or parallel: any axis orthogonal to n
            let trial = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
            let c = [
                n[1] * trial[2] - n[2] * trial[1],
                n[2] * trial[0] - n[0] * trial[2],
                n[0] * trial[1] - n[1] * trial[0],
            ];
            let m = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            c.map(|x| x / m)
        }
    };
    (axis, dot.acos())
}

/// Rotates a doublet so that the listed mirrors act as their canonical pseudo-spin matrices.
///
/// The grid must be mirror symmetric about its centre for every listed mirror.
pub fn symmetry_adapt(grid: &KpGrid, d: &KramersDoublet, mirrors: &[Mirror]) -> Result<KramersDoublet> {
    let mut out = d.clone();
    let mut fixed: Option<[f64; 3]> = None;
    for (k, &m) in mirrors.iter().enumerate() {
        if k >= 2 {
            break;
        }
        let n = mirror_axis(&doublet_representation(grid, m, &out))?;
        let mut t = [0.0; 3];
        t[m.axis()] = 1.0;
        let (axis, angle) = rotation_between(n, t, fixed);
        // With U = (up, down) W, the representation transforms as W^H G W.
        for sign in [1.0, -1.0] {
            let w = su2(axis, sign * angle);
            let cand = rotate_doublet(&out, &w);
            let n2 = mirror_axis(&doublet_representation(grid, m, &cand))?;
            if (n2[m.axis()] - 1.0).abs() < 1e-6 {
                out = cand;
                break;
            }
        }
        let n2 = mirror_axis(&doublet_representation(grid, m, &out))?;
        if (n2[m.axis()] - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidInput(format!("could not adapt doublet to mirror {}", m.name())));
        }
        fixed = Some(t);
    }
    Ok(out)
}

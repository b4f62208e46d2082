//! g-matrix, its gate derivative, Rabi frequencies and the perturbation series.

pub mod decompose;

use nalgebra::{Matrix2, Vector3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kp::{KpModel, KpOperator};
use crate::spectrum::{inner, KramersDoublet, SpinorField};
use crate::units::{HBAR, H_PLANCK, MEV_PER_VOLT, MU_B};
pub use decompose::{split_tmr_izr, svd_decompose, zeeman_tensor, zeeman_tensor_derivative, GSvd, TmrIzr, M3};

/// Default field step of the M1 central difference (T).
pub const DEFAULT_DELTA_B: f64 = 1e-4;
/// Default gate step of the g' central difference (V).
pub const DEFAULT_DELTA_V: f64 = 1e-3;

/// The three magnetic-moment operators `M1 = -dH/dB` at zero field.
#[derive(Debug, Clone)]
pub struct M1Operators {
    pub ops: [KpOperator; 3],
    pub delta_b: f64,
    pub gauge_origin: [f64; 3],
}

impl M1Operators {
    pub fn new(model: &KpModel, delta_b: f64, gauge_origin: [f64; 3]) -> Self {
        Self {
            ops: std::array::from_fn(|a| model.m1(a, delta_b, gauge_origin)),
            delta_b,
            gauge_origin,
        }
    }

    /// `M1_a psi` for the three axes.
    pub fn apply(&self, psi: &[C64]) -> [SpinorField; 3] {
        std::array::from_fn(|a| {
            let mut y = vec![C64::new(0.0, 0.0); psi.len()];
            self.ops[a].apply(psi, &mut y);
            y
        })
    }
}

/// Matrix elements `<i|M1_a|j>` over a window of states.
#[derive(Debug, Clone, PartialEq)]
pub struct MagneticMomentElements {
    pub n: usize,
    /// Row-major `n x n` per axis (meV/T).
    pub m: [Vec<C64>; 3],
    pub delta_b: f64,
}

impl MagneticMomentElements {
    pub fn get(&self, axis: usize, i: usize, j: usize) -> C64 {
        self.m[axis][i * self.n + j]
    }
}

pub fn m1_elements(m1: &M1Operators, states: &[&[C64]]) -> MagneticMomentElements {
    let n = states.len();
    let mut m: [Vec<C64>; 3] = Default::default();
    for a in 0..3 {
        m[a] = vec![C64::new(0.0, 0.0); n * n];
    }
    for j in 0..n {
        let img = m1.apply(states[j]);
        for a in 0..3 {
            for i in 0..n {
                m[a][i * n + j] = inner(states[i], &img[a]);
            }
        }
    }
    MagneticMomentElements { n, m, delta_b: m1.delta_b }
}

/// `<i|M1_a|j>` in the doublet basis (0 = up, 1 = down).
pub type DoubletElements = [[[C64; 2]; 2]; 3];

pub fn doublet_elements(m1: &M1Operators, d: &KramersDoublet) -> DoubletElements {
    let e = m1_elements(m1, &[&d.up, &d.down]);
    std::array::from_fn(|a| [[e.get(a, 0, 0), e.get(a, 0, 1)], [e.get(a, 1, 0), e.get(a, 1, 1)]])
}

/// g-matrix from the doublet matrix elements of `M1`.
pub fn compute_g(e: &DoubletElements) -> M3 {
    let s = -2.0 / MU_B;
    let mut g = [[0.0; 3]; 3];
    for a in 0..3 {
        let du = e[a][1][0];
        g[0][a] = s * du.re;
        g[1][a] = s * du.im;
        g[2][a] = s * e[a][0][0].re;
    }
    g
}

/// Effective g-factor `|g b|`.
pub fn effective_g(g: &M3, b: [f64; 3]) -> f64 {
    (decompose::to_na(g) * Vector3::from(b)).norm()
}

/// Rotates `other` onto `reference`: the cross-overlap becomes `alpha * I`.
pub fn align_doublet(reference: &KramersDoublet, other: &KramersDoublet) -> Result<(KramersDoublet, f64)> {
    let o_basis = [&other.up, &other.down];
    let r_basis = [&reference.up, &reference.down];
    let o = Matrix2::from_fn(|i, j| inner(o_basis[i], r_basis[j]));
    let svd = o.svd(true, true);
    let smin = svd.singular_values.min();
    let alpha = 0.5 * (svd.singular_values[0] + svd.singular_values[1]);
    if smin < 0.5 {
        return Err(Error::OverlapTooSmall { alpha: smin });
    }
    // O = W S with W = U V^H; the new basis is other * W.
    let w = svd.u.unwrap() * svd.v_t.unwrap();
    let up = other.up.iter().zip(&other.down).map(|(u, d)| u * w[(0, 0)] + d * w[(1, 0)]).collect();
    let down = other.up.iter().zip(&other.down).map(|(u, d)| u * w[(0, 1)] + d * w[(1, 1)]).collect();
    Ok((KramersDoublet { energy: other.energy, up, down }, alpha))
}

/// Central-difference g' from two aligned doublets.
///
/// The difference of matrix elements is formed from difference vectors,
/// `<a+|M|b+> - <a-|M|b-> = <a+ - a-|M|b+> + <a-|M|b+ - b->`, which avoids the
/// cancellation of two nearly equal inner products.
pub fn g_prime_from_doublets(m1: &M1Operators, plus: &KramersDoublet, minus: &KramersDoublet, delta_v: f64) -> M3 {
    let diff = |a: &[C64], b: &[C64]| -> SpinorField { a.iter().zip(b).map(|(x, y)| x - y).collect() };
    let p = [&plus.up, &plus.down];
    let m = [&minus.up, &minus.down];
    let d = [diff(&plus.up, &minus.up), diff(&plus.down, &minus.down)];
    let mp = [m1.apply(p[0]), m1.apply(p[1])];
    let md = [m1.apply(&d[0]), m1.apply(&d[1])];
    let e: DoubletElements = std::array::from_fn(|a| {
        std::array::from_fn(|i| std::array::from_fn(|j| inner(&d[i], &mp[j][a]) + inner(m[i], &md[j][a])))
    });
    let mut g = compute_g(&e);
    g.iter_mut().flatten().for_each(|x| *x /= 2.0 * delta_v);
    g
}

/// Central difference of aligned g-matrices.
pub fn g_prime(g_plus: &M3, g_minus: &M3, delta_v: f64) -> M3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (g_plus[i][j] - g_minus[i][j]) / (2.0 * delta_v);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiResult {
    /// Rabi frequency (Hz).
    pub f_rabi: f64,
    pub g_star: f64,
    /// Larmor frequency (Hz).
    pub f_larmor: f64,
    /// Larmor vector (rad/s) and its gate derivative (rad/s/V).
    pub omega: [f64; 3],
    pub omega_prime: [f64; 3],
    pub b_field: f64,
    pub direction: [f64; 3],
    pub v_ac: f64,
}

/// Rabi frequency from `g` and `g'`.
pub fn rabi_from_g(g: &M3, gp: &M3, b: [f64; 3], b_field: f64, v_ac: f64) -> Result<RabiResult> {
    let bv = Vector3::from(b);
    let gb = decompose::to_na(g) * bv;
    let gpb = decompose::to_na(gp) * bv;
    let g_star = gb.norm();
    if !(g_star > 1e-12) {
        return Err(Error::ZeroLarmor);
    }
    let f_rabi = MU_B * b_field * v_ac / (2.0 * H_PLANCK * g_star) * gb.cross(&gpb).norm();
    let k = MU_B * b_field / (2.0 * HBAR);
    Ok(RabiResult {
        f_rabi,
        g_star,
        f_larmor: g_star * MU_B * b_field / H_PLANCK,
        omega: (gb * k).into(),
        omega_prime: (gpb * k).into(),
        b_field,
        direction: b,
        v_ac,
    })
}

/// Unit-response potential sampled on the k.p nodes, applied as a diagonal operator.
pub fn apply_d1(d1: &[f64], psi: &[C64]) -> SpinorField {
    psi.iter().enumerate().map(|(i, z)| z * d1[i / 6]).collect()
}

/// Rabi frequency `(e/h) v_ac |<1|D1|0>|` between two finite-field eigenstates.
pub fn rabi_direct(state0: &[C64], state1: &[C64], d1: &[f64], v_ac: f64) -> f64 {
    MEV_PER_VOLT * v_ac / H_PLANCK * inner(state1, &apply_d1(d1, state0)).norm()
}

/// Per-pair contributions to the Rabi frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationBreakdown {
    /// Complex contribution of each excited doublet (Hz).
    pub contributions: Vec<(f64, f64)>,
    /// `|sum_{n<=k} f_n|` for k = 1..N.
    pub partial_sums: Vec<f64>,
    pub total: f64,
}

impl PerturbationBreakdown {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.contributions.iter().map(|&(r, i)| r.hypot(i)).collect()
    }
}

/// Zeroth-order qubit states: eigenvectors of `H1 = -B b.M1` in the ground doublet (lower first).
pub fn zeroth_order_qubit(e: &DoubletElements, ground: &KramersDoublet, b: [f64; 3]) -> (SpinorField, SpinorField) {
    let h = Matrix2::from_fn(|i, j| -(e[0][i][j] * b[0] + e[1][i][j] * b[1] + e[2][i][j] * b[2]));
    let h = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let (lo, hi) = if eig.eigenvalues[0] <= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let mk = |k: usize| -> SpinorField {
        let c = eig.eigenvectors.column(k);
        ground.up.iter().zip(&ground.down).map(|(u, d)| u * c[0] + d * c[1]).collect()
    };
    (mk(lo), mk(hi))
}

/// Second-order perturbation series of the Rabi matrix element over excited doublets.
pub fn perturbation_series(
    ground: &KramersDoublet,
    excited: &[KramersDoublet],
    m1: &M1Operators,
    d1: &[f64],
    b: [f64; 3],
    b_field: f64,
    v_ac: f64,
) -> Result<PerturbationBreakdown> {
    let e = doublet_elements(m1, ground);
    let (q0, q1) = zeroth_order_qubit(&e, ground, b);
    let bm1 = |psi: &[C64]| -> SpinorField {
        let img = m1.apply(psi);
        (0..psi.len()).map(|i| img[0][i] * b[0] + img[1][i] * b[1] + img[2][i] * b[2]).collect()
    };
    let m0 = bm1(&q0);
    let m1q1 = bm1(&q1);
    let d0 = apply_d1(d1, &q0);
    let d1q1 = apply_d1(d1, &q1);
    let pref = MEV_PER_VOLT * v_ac / H_PLANCK * (-b_field);
    let mut contributions = Vec::with_capacity(excited.len());
    let mut partial_sums = Vec::with_capacity(excited.len());
    let mut acc = C64::new(0.0, 0.0);
    for (n, ex) in excited.iter().enumerate() {
        let de = ground.energy - ex.energy;
        if de.abs() < 1e-9 {
            return Err(Error::DegenerateExcitedState { index: n + 1 });
        }
        let mut c = C64::new(0.0, 0.0);
        for s in [&ex.up, &ex.down] {
            // <1|D1|n><n|b.M1|0> + <1|b.M1|n><n|D1|0>
            c += inner(s, &d1q1).conj() * inner(s, &m0) + inner(s, &m1q1).conj() * inner(s, &d0);
        }
        let f = c * (pref / de);
        acc += f;
        contributions.push((f.re, f.im));
        partial_sums.push(acc.norm());
    }
    Ok(PerturbationBreakdown { contributions, partial_sums, total: acc.norm() })
}

/// Full set of linear-response quantities at one bias point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GMatrixSet {
    pub g: M3,
    pub g_prime: M3,
    pub svd: GSvd,
    pub zeeman: M3,
    /// Product-rule derivative `g'^T g + g^T g'`.
    pub zeeman_prime: M3,
    /// `[G(V+dV) - G(V-dV)] / (2 dV)` from the aligned g-matrices.
    pub zeeman_prime_differenced: M3,
    pub tmr: Option<M3>,
    pub izr: Option<M3>,
    pub delta_v: f64,
    pub delta_b: f64,
    pub alpha: [f64; 2],
}

impl GMatrixSet {
    pub fn new(g: M3, g_plus: M3, g_minus: M3, delta_v: f64, delta_b: f64, alpha: [f64; 2]) -> Self {
        Self::with_g_prime(g, g_prime(&g_plus, &g_minus, delta_v), g_plus, g_minus, delta_v, delta_b, alpha)
    }

    /// As `new`, with g' supplied (e.g. from `g_prime_from_doublets`).
    pub fn with_g_prime(g: M3, gp: M3, g_plus: M3, g_minus: M3, delta_v: f64, delta_b: f64, alpha: [f64; 2]) -> Self {
        let zp = zeeman_tensor(&g_plus);
        let zm = zeeman_tensor(&g_minus);
        let zeeman_prime_differenced = g_prime(&zp, &zm, delta_v);
        let split = split_tmr_izr(&g, &gp).ok();
        Self {
            g,
            g_prime: gp,
            svd: svd_decompose(&g),
            zeeman: zeeman_tensor(&g),
            zeeman_prime: zeeman_tensor_derivative(&g, &gp),
            zeeman_prime_differenced,
            tmr: split.map(|s| s.tmr),
            izr: split.map(|s| s.izr),
            delta_v,
            delta_b,
            alpha,
        }
    }

    pub fn rabi(&self, b: [f64; 3], b_field: f64, v_ac: f64) -> Result<RabiResult> {
        rabi_from_g(&self.g, &self.g_prime, b, b_field, v_ac)
    }
}

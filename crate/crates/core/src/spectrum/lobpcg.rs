//! Block preconditioned conjugate gradient eigensolver for the smallest eigenvalues.

use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub struct LobpcgResult {
    pub values: Vec<f64>,
    pub vectors: Mat<C64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

fn herm_part(g: &Mat<C64>) -> Mat<C64> {
    let n = g.nrows();
    Mat::from_fn(n, n, |i, j| (g[(i, j)] + g[(j, i)].conj()) * 0.5)
}

/// `v - x (x^H v)`, applied twice.
fn project_out(v: &mut Mat<C64>, x: &Mat<C64>) {
    for _ in 0..2 {
        let c = x.adjoint() * &*v;
        *v = &*v - x * &c;
    }
}

/// Orthonormalizes the columns of `v`, dropping numerically dependent directions.
fn svqb(v: &Mat<C64>) -> Mat<C64> {
    let mut v = v.clone();
    for _ in 0..2 {
        let k = v.ncols();
        if k == 0 {
            return v;
        }
        let g = herm_part(&(v.adjoint() * &v));
        let d: Vec<f64> = (0..k).map(|i| {
            let x = g[(i, i)].re;
            if x > 0.0 { 1.0 / x.sqrt() } else { 0.0 }
        }).collect();
        let gs = Mat::from_fn(k, k, |i, j| g[(i, j)] * (d[i] * d[j]));
        let eig = gs.self_adjoint_eigen(Side::Lower).expect("eigendecomposition of Gram matrix");
        let th = eig.S().column_vector();
        let z = eig.U();
        let tmax = (0..k).map(|i| th[i].re).fold(0.0f64, f64::max);
        let keep: Vec<usize> = (0..k).filter(|&i| th[i].re > 1e-12 * tmax).collect();
        let t = Mat::from_fn(k, keep.len(), |i, c| z[(i, keep[c])] * (d[i] / th[keep[c]].re.sqrt()));
        v = &v * &t;
    }
    v
}

fn columns(m: &Mat<C64>, idx: &[usize]) -> Mat<C64> {
    Mat::from_fn(m.nrows(), idx.len(), |i, c| m[(i, idx[c])])
}

fn hstack(a: &Mat<C64>, b: &Mat<C64>) -> Mat<C64> {
    let ka = a.ncols();
    Mat::from_fn(a.nrows(), ka + b.ncols(), |i, j| if j < ka { a[(i, j)] } else { b[(i, j - ka)] })
}

pub struct LobpcgParams {
    pub block: usize,
    pub wanted: usize,
    pub tol_abs: f64,
    pub max_iter: usize,
    pub seed: u64,
}

/// Smallest `wanted` eigenpairs of the Hermitian operator `apply`.
pub fn lobpcg(
    n: usize,
    apply: &dyn Fn(&Mat<C64>) -> Mat<C64>,
    precond: &dyn Fn(&Mat<C64>) -> Mat<C64>,
    p: &LobpcgParams,
) -> Result<LobpcgResult> {
    let m = p.block.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let x0 = Mat::from_fn(n, m, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let mut x = svqb(&x0);
    if x.ncols() < m {
        return Err(Error::InvalidInput("random start block is rank deficient".into()));
    }
    let mut ax = apply(&x);
    let rayleigh_ritz = |x: &Mat<C64>, ax: &Mat<C64>| -> (Mat<C64>, Mat<C64>, Vec<f64>) {
        let g = herm_part(&(x.adjoint() * ax));
        let eig = g.self_adjoint_eigen(Side::Lower).expect("Rayleigh-Ritz");
        let c = eig.U().to_owned();
        let lam = (0..g.nrows()).map(|i| eig.S().column_vector()[i].re).collect();
        (x * &c, ax * &c, lam)
    };
    let (nx, nax, mut lam) = rayleigh_ritz(&x, &ax);
    x = nx;
    ax = nax;
    let mut pdir: Option<Mat<C64>> = None;
    let mut residuals = vec![f64::INFINITY; m];
    for it in 0..p.max_iter {
        let mut r = Mat::from_fn(n, m, |i, j| ax[(i, j)] - x[(i, j)] * lam[j]);
        for j in 0..m {
            residuals[j] = (0..n).map(|i| r[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        }
        if residuals[..p.wanted].iter().all(|&res| res <= p.tol_abs) {
            return Ok(LobpcgResult {
                values: lam[..m].to_vec(),
                vectors: x,
                residuals,
                iterations: it,
            });
        }
        let active: Vec<usize> = (0..m).filter(|&j| residuals[j] > p.tol_abs).collect();
        r = columns(&r, &active);
        let w = precond(&r);
        let mut v = match &pdir {
            Some(pd) => hstack(&w, pd),
            None => w,
        };
        project_out(&mut v, &x);
        let v = svqb(&v);
        if v.ncols() == 0 {
            break;
        }
        let av = apply(&v);
        let k = v.ncols();
        let xax = x.adjoint() * &ax;
        let xav = x.adjoint() * &av;
        let vav = v.adjoint() * &av;
        let g = Mat::from_fn(m + k, m + k, |i, j| match (i < m, j < m) {
            (true, true) => xax[(i, j)],
            (true, false) => xav[(i, j - m)],
            (false, true) => xav[(j, i - m)].conj(),
            (false, false) => vav[(i - m, j - m)],
        });
        let g = herm_part(&g);
        let eig = g.self_adjoint_eigen(Side::Lower).expect("Rayleigh-Ritz");
        let u = eig.U();
        let cx = Mat::from_fn(m, m, |i, j| u[(i, j)]);
        let cv = Mat::from_fn(k, m, |i, j| u[(m + i, j)]);
        lam = (0..m).map(|i| eig.S().column_vector()[i].re).collect();
        let pv = &v * &cv;
        let apv = &av * &cv;
        x = &x * &cx + &pv;
        ax = &ax * &cx + &apv;
        pdir = Some(pv);
        if (it + 1) % 25 == 0 {
            // Restore orthonormality and the exact A X product.
            x = svqb(&x);
            if x.ncols() < m {
                return Err(Error::NotConverged { iterations: it, converged: 0, requested: p.wanted });
            }
            ax = apply(&x);
            let (nx, nax, nl) = rayleigh_ritz(&x, &ax);
            x = nx;
            ax = nax;
            lam = nl;
            pdir = None;
        }
    }
    let converged = residuals[..p.wanted].iter().filter(|&&res| res <= p.tol_abs).count();
    Err(Error::NotConverged { iterations: p.max_iter, converged, requested: p.wanted })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_operator() {
        let n = 200;
        let d: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.5).collect();
        let apply = |x: &Mat<C64>| Mat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * d[i]);
        let pre = |x: &Mat<C64>| Mat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] / d[i]);
        let res = lobpcg(
            n,
            &apply,
            &pre,
            &LobpcgParams { block: 6, wanted: 4, tol_abs: 1e-10, max_iter: 500, seed: 3 },
        )
        .unwrap();
        for i in 0..4 {
            assert!((res.values[i] - d[i]).abs() < 1e-9);
        }
    }
}

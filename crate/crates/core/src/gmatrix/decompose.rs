//! SVD of the g-matrix, Zeeman tensor and the TMR / iso-Zeeman split of g'.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type M3 = [[f64; 3]; 3];

pub fn to_na(m: &M3) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[i][j])
}

pub fn from_na(m: &Matrix3<f64>) -> M3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[(i, j)];
        }
    }
    out
}

/// `g = U diag(g_d) V^T` with proper rotations `U`, `V`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GSvd {
    pub u: M3,
    pub gd: [f64; 3],
    pub v: M3,
}

impl GSvd {
    pub fn reconstruct(&self) -> M3 {
        from_na(&(to_na(&self.u) * Matrix3::from_diagonal(&self.gd.into()) * to_na(&self.v).transpose()))
    }

    /// Principal factors matched to the device axes by the largest component of each `V` column.
    pub fn factors_by_axis(&self) -> [f64; 3] {
        let mut out = [f64::NAN; 3];
        let mut used = [false; 3];
        // Greedy assignment by decreasing alignment.
        let mut cand: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..3 {
            for a in 0..3 {
                cand.push((self.v[a][i].abs(), i, a));
            }
        }
        cand.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
        for (_, i, a) in cand {
            if !used[i] && out[a].is_nan() {
                out[a] = self.gd[i].abs();
                used[i] = true;
            }
        }
        out
    }
}

/// SVD with `|g_d|` sorted descending and the sign convention: each `V` column has a
/// positive largest component, then the third column of `V` and of `U` absorb determinant signs.
pub fn svd_decompose(g: &M3) -> GSvd {
    let svd = to_na(g).svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let v = vt.transpose();
    let s = svd.singular_values;
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap());
    let mut uo = Matrix3::zeros();
    let mut vo = Matrix3::zeros();
    let mut gd = [0.0; 3];
    for (k, &i) in idx.iter().enumerate() {
        let mut vc = v.column(i).into_owned();
        let mut uc = u.column(i).into_owned();
        let big = (0..3).max_by(|&a, &b| vc[a].abs().partial_cmp(&vc[b].abs()).unwrap()).unwrap();
        if vc[big] < 0.0 {
            vc = -vc;
            uc = -uc;
        }
        vo.set_column(k, &vc);
        uo.set_column(k, &uc);
        gd[k] = s[i];
    }
    if vo.determinant() < 0.0 {
        let c = -vo.column(2).into_owned();
        vo.set_column(2, &c);
        gd[2] = -gd[2];
    }
    if uo.determinant() < 0.0 {
        let c = -uo.column(2).into_owned();
        uo.set_column(2, &c);
        gd[2] = -gd[2];
    }
    GSvd { u: from_na(&uo), gd, v: from_na(&vo) }
}

/// Zeeman tensor `G = g^T g`.
pub fn zeeman_tensor(g: &M3) -> M3 {
    let g = to_na(g);
    from_na(&(g.transpose() * g))
}

/// Derivative of the Zeeman tensor, `G' = g'^T g + g^T g'`.
pub fn zeeman_tensor_derivative(g: &M3, gp: &M3) -> M3 {
    let (g, gp) = (to_na(g), to_na(gp));
    from_na(&(gp.transpose() * g + g.transpose() * gp))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TmrIzr {
    pub tmr: M3,
    pub izr: M3,
    /// Largest entry of `g_d izr + (g_d izr)^T` in the principal frames, relative to `|g_d| |g'|`.
    pub antisymmetry_residual: f64,
}

/// Splits `g'` into the g-TMR part `g_d^-1 G'/2` and the iso-Zeeman remainder.
pub fn split_tmr_izr(g: &M3, gp: &M3) -> Result<TmrIzr> {
    let svd = svd_decompose(g);
    let gmax = svd.gd.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for (i, &x) in svd.gd.iter().enumerate() {
        if x.abs() <= 1e-10 * gmax.max(f64::MIN_POSITIVE) {
            return Err(Error::SingularPrincipalFactor { index: i, value: x });
        }
    }
    let (u, v) = (to_na(&svd.u), to_na(&svd.v));
    let gpt = u.transpose() * to_na(gp) * v;
    let gd = Matrix3::from_diagonal(&svd.gd.into());
    let big_gp = gpt.transpose() * gd + gd * gpt;
    let tmr_t = Matrix3::from_fn(|i, j| 0.5 * big_gp[(i, j)] / svd.gd[i]);
    let izr_t = gpt - tmr_t;
    let a = gd * izr_t;
    let sym = a + a.transpose();
    let scale = gmax * gpt.abs().max();
    let antisymmetry_residual = if scale > 0.0 { sym.abs().max() / scale } else { 0.0 };
    let tmr = u * tmr_t * v.transpose();
    let tmr = from_na(&tmr);
    let mut izr = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            izr[i][j] = gp[i][j] - tmr[i][j];
        }
    }
    Ok(TmrIzr { tmr, izr, antisymmetry_residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positive_diagonal_is_identity_frames() {
        let s = svd_decompose(&[[2.5, 0.0, 0.0], [0.0, 1.7, 0.0], [0.0, 0.0, 0.8]]);
        assert_eq!(s.gd, [2.5, 1.7, 0.8]);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((s.u[i][j] - e).abs() < 1e-14 && (s.v[i][j] - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn negative_determinant_gives_one_negative_factor() {
        let s = svd_decompose(&[[-1.0, 0.2, 0.0], [0.1, 2.0, 0.3], [0.0, 0.4, 1.5]]);
        assert_eq!(s.gd.iter().filter(|&&x| x < 0.0).count(), 1);
        assert!(to_na(&s.u).determinant() > 0.0 && to_na(&s.v).determinant() > 0.0);
    }
}

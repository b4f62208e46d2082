//! Fast inverse of a shifted discrete Laplacian, applied band by band.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::mesh::KpGrid;

pub struct LaplacePreconditioner {
    n: [usize; 3],
    periodic: [bool; 3],
    plans: [(Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>); 3],
    eig: [Vec<f64>; 3],
    scale: f64,
    shift: f64,
}

impl LaplacePreconditioner {
    /// Preconditioner `(scale * L + shift)^-1` on the k.p grid, `L` the discrete `-laplacian`.
    pub fn new(grid: &KpGrid, scale: f64, shift: f64) -> Self {
        let mut planner = FftPlanner::new();
        let periodic = [grid.periodic_x, false, false];
        let mut eig: [Vec<f64>; 3] = Default::default();
        let plans = std::array::from_fn(|a| {
            let n = grid.n[a];
            let h2 = grid.h[a] * grid.h[a];
            let len = if periodic[a] { n } else { 2 * (n + 1) };
            eig[a] = if periodic[a] {
                (0..n).map(|k| 4.0 / h2 * (std::f64::consts::PI * k as f64 / n as f64).sin().powi(2)).collect()
            } else {
                (1..=n)
                    .map(|k| 4.0 / h2 * (std::f64::consts::PI * k as f64 / (2.0 * (n + 1) as f64)).sin().powi(2))
                    .collect()
            };
            (planner.plan_fft_forward(len), planner.plan_fft_inverse(len))
        });
        Self { n: grid.n, periodic, plans, eig, scale, shift }
    }

    fn transform_axis(&self, f: &mut [C64], axis: usize, inverse: bool) {
        let n = self.n;
        let stride = [n[1] * n[2], n[2], 1];
        let len = n[axis];
        let s = stride[axis];
        let (fwd, inv) = &self.plans[axis];
        let plan = if inverse && self.periodic[axis] { inv } else { fwd };
        let m = if self.periodic[axis] { len } else { 2 * (len + 1) };
        let mut buf = vec![C64::new(0.0, 0.0); m];
        let mut scratch = vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        let others: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
        for u in 0..n[others[0]] {
            for v in 0..n[others[1]] {
                let base = u * stride[others[0]] + v * stride[others[1]];
                if self.periodic[axis] {
                    for k in 0..len {
                        buf[k] = f[base + k * s];
                    }
                    plan.process_with_scratch(&mut buf, &mut scratch);
                    let norm = if inverse { 1.0 / len as f64 } else { 1.0 };
                    for k in 0..len {
                        f[base + k * s] = buf[k] * norm;
                    }
                } else {
                    buf[0] = C64::new(0.0, 0.0);
                    buf[len + 1] = C64::new(0.0, 0.0);
                    for k in 0..len {
                        let x = f[base + k * s];
                        buf[k + 1] = x;
                        buf[m - 1 - k] = -x;
                    }
                    plan.process_with_scratch(&mut buf, &mut scratch);
                    // DST-I: X_k = (i/2) Y_k; its inverse is 2/(N+1) times itself.
                    let norm = if inverse { 2.0 / (len + 1) as f64 } else { 1.0 };
                    for k in 0..len {
                        f[base + k * s] = buf[k + 1] * C64::new(0.0, 0.5 * norm);
                    }
                }
            }
        }
    }

    fn solve_scalar(&self, f: &mut [C64]) {
        for a in 0..3 {
            self.transform_axis(f, a, false);
        }
        let n = self.n;
        for i in 0..n[0] {
            for j in 0..n[1] {
                for k in 0..n[2] {
                    let lam = self.eig[0][i] + self.eig[1][j] + self.eig[2][k];
                    f[(i * n[1] + j) * n[2] + k] /= self.scale * lam + self.shift;
                }
            }
        }
        for a in 0..3 {
            self.transform_axis(f, a, true);
        }
    }

    /// `z = M^-1 r` for one six-band vector.
    pub fn apply(&self, r: &[C64], z: &mut [C64]) {
        let nodes = self.n[0] * self.n[1] * self.n[2];
        let bands: Vec<Vec<C64>> = (0..6)
            .into_par_iter()
            .map(|b| {
                let mut f: Vec<C64> = (0..nodes).map(|p| r[6 * p + b]).collect();
                self.solve_scalar(&mut f);
                f
            })
            .collect();
        for (b, f) in bands.iter().enumerate() {
            for p in 0..nodes {
                z[6 * p + b] = f[p];
            }
        }
    }
}

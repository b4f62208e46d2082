//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fails.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

use spinqubit_core::num_complex::Complex64 as Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinqubit_cli::commands::{cmd_rabimap, cmd_solve, cmd_sweep, map_angles, CHECK_ORIENTATIONS};
use spinqubit_cli::RunConfig;
use spinqubit_core::device::MaterialParams;
use spinqubit_core::gmatrix::{effective_g, rabi_direct, rabi_from_g, split_tmr_izr, M3};
use spinqubit_core::kp::bulk::bulk_hamiltonian;
use spinqubit_core::kp::{unit_vector, CouplingFlags, MagneticField};
use spinqubit_core::mesh::MeshSpec;
use spinqubit_core::nalgebra::Matrix3;
use spinqubit_core::pipeline::{single_gate_drive, Bias, Drive, OperatingPoint, Pipeline, PipelineOptions};
use spinqubit_core::presets;
use spinqubit_core::reference::{brute_force_rabi, delta_gz, finite_field_qubit};
use spinqubit_core::spectrum::{KramersDoublet, Method, SolverOptions};
use spinqubit_core::units::{HBAR2_2M0, MU_B};

type Outcome = Result<(bool, String), String>;

const V_AC: f64 = 1e-3;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn max_abs(m: &M3) -> f64 {
    m.iter().flatten().fold(0.0, |a, x| a.max(x.abs()))
}

fn dense() -> SolverOptions {
    SolverOptions { method: Method::Dense, ..Default::default() }
}

fn map_max(g: &M3, gp: &M3) -> f64 {
    map_angles(37, 37)
        .into_iter()
        .filter_map(|(t, p)| rabi_from_g(g, gp, unit_vector(t.to_radians(), p.to_radians()), 1.0, V_AC).ok())
        .fold(0.0, |a, r| a.max(r.f_rabi))
}

fn levels(h: &spinqubit_core::kp::bulk::Block) -> Vec<f64> {
    let mut v: Vec<f64> = h.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v
}

fn bulk_spectrum() -> Outcome {
    let t = Instant::now();
    let si = MaterialParams::silicon();
    let e0 = levels(&bulk_hamiltonian(&si, [0.0; 3]));
    let dev = e0[..4].iter().map(|x| x.abs()).chain(e0[4..].iter().map(|x| (x + si.delta_so).abs())).fold(0.0, f64::max);
    let k = 1e-3;
    let ek = levels(&bulk_hamiltonian(&si, [0.0, 0.0, k]));
    let mass = |e: f64| -HBAR2_2M0 * k * k / e;
    let hh = mass(ek[0]) * (si.gamma1 - 2.0 * si.gamma2) - 1.0;
    let lh = mass(ek[2]) * (si.gamma1 + 2.0 * si.gamma2) - 1.0;
    let secs = t.elapsed().as_secs_f64();
    let pass = dev < 1e-12 && hh.abs() < 0.01 && lh.abs() < 0.01 && secs < 1.0;
    Ok((pass, format!("k=0 deviation {dev:.1e} meV, mass errors hh {hh:.1e} lh {lh:.1e}, {secs:.3} s")))
}

fn thin_film() -> Result<Pipeline, String> {
    Pipeline::from_spec(&presets::thin_film(), &MeshSpec { target_spacing: [1.0, 1.0, 0.5] }).map_err(err)
}

fn pure_doublet(p: &Pipeline) -> Outcome {
    let opts = PipelineOptions { flags: CouplingFlags::bloch_only(), ..Default::default() };
    let (g, _) = p.g_matrix(&Bias::new(), &opts).map_err(err)?;
    let pass = g[0][0].abs() < 0.05 && g[1][1].abs() < 0.05 && (g[2][2] - 2.52).abs() < 0.05;
    Ok((pass, format!("g diag ({:.4}, {:.4}, {:.4}), dim {}", g[0][0], g[1][1], g[2][2], p.mesh.kp.dim())))
}

fn envelope_correction(p: &Pipeline) -> Outcome {
    let (g, _) = p.g_matrix(&Bias::new(), &PipelineOptions::default()).map_err(err)?;
    let si = MaterialParams::silicon();
    let dgz = delta_gz(si.gamma1, si.gamma2, si.gamma3).map_err(err)?;
    let rel = g[2][2] / 4.66 - 1.0;
    let pass = rel.abs() < 0.1 && (dgz - 2.14).abs() <= 0.01;
    Ok((pass, format!("g_z {:.4} ({:+.1}% from 4.66), delta_gz {dgz:.4}", g[2][2], 100.0 * rel)))
}

fn desk_point() -> Result<OperatingPoint, String> {
    let p = Pipeline::from_spec(&presets::desk_device(), &MeshSpec::uniform(1.0)).map_err(err)?;
    let opts = PipelineOptions { excited_pairs: 24, ..Default::default() };
    p.operating_point(&Bias::from([("fg".to_string(), -0.1)]), &single_gate_drive("fg"), &opts).map_err(err)
}

fn formalism_equivalence(op: &OperatingPoint) -> Outcome {
    let mut worst = [0.0f64; 2];
    for &(t, p) in &CHECK_ORIENTATIONS {
        for (k, b) in [0.1, 1.0].into_iter().enumerate() {
            let f = MagneticField::from_angles(b, t.to_radians(), p.to_radians());
            let bf = brute_force_rabi(&op.solution.model, &f, op.gauge_origin, &op.d1_kp, V_AC).map_err(err)?;
            let lin = op.gset.rabi(f.direction, b, V_AC).map_err(err)?.f_rabi;
            worst[k] = worst[k].max((lin / bf - 1.0).abs());
        }
    }
    let pass = worst[0] < 0.01 && worst[1] < 0.05;
    Ok((pass, format!("{} orientations, worst deviation {:.2e} at 0.1 T, {:.2e} at 1 T", CHECK_ORIENTATIONS.len(), worst[0], worst[1])))
}

fn perturbation_series(op: &OperatingPoint) -> Outcome {
    let f = MagneticField::new(0.1, [0.0, 1.0, 1.0]).map_err(err)?;
    let q = finite_field_qubit(&op.solution.model, &f, op.gauge_origin, &dense()).map_err(err)?;
    let direct = rabi_direct(&q.state0, &q.state1, &op.d1_kp, V_AC);
    let pt = op.perturbation(f.direction, 0.1, V_AC).map_err(err)?;
    let n = pt.partial_sums.len();
    let rel = pt.total / direct - 1.0;
    Ok((n == 24 && rel.abs() < 0.1, format!("{n} pairs: {:.4e} Hz vs direct {direct:.4e} Hz ({:+.1}%)", pt.total, 100.0 * rel)))
}

fn symmetry_extinctions(op: &OperatingPoint) -> Outcome {
    let mx = map_max(&op.gset.g, &op.gset.g_prime);
    let fx = op.gset.rabi([1.0, 0.0, 0.0], 1.0, V_AC).map_err(err)?.f_rabi;
    let plate = Pipeline::from_spec(&presets::plate_box(), &MeshSpec::uniform(1.0)).map_err(err)?;
    let drive = Drive::from([("left".to_string(), 1.0), ("right".to_string(), -1.0)]);
    let at = |l: f64, r: f64| -> Result<f64, String> {
        let bias = Bias::from([("left".to_string(), l), ("right".to_string(), r)]);
        let op = plate.operating_point(&bias, &drive, &PipelineOptions::default()).map_err(err)?;
        Ok(map_max(&op.gset.g, &op.gset.g_prime))
    };
    let (sym, asym) = (at(-0.05, -0.05)?, at(-0.1, 0.0)?);
    let pass = fx < 1e-6 * mx && asym >= 100.0 * sym;
    Ok((pass, format!("desk f_R(x)/max {:.1e}; plate box max f_R {sym:.2e} Hz symmetric vs {asym:.2e} Hz asymmetric", fx / mx)))
}

fn rotate(d: &KramersDoublet, a: Complex, b: Complex) -> KramersDoublet {
    // (up, down) W with W = [[a, -b*], [b, a*]] in SU(2).
    let up = d.up.iter().zip(&d.down).map(|(u, v)| u * a + v * b).collect();
    let down = d.up.iter().zip(&d.down).map(|(u, v)| -u * b.conj() + v * a.conj()).collect();
    KramersDoublet { energy: d.energy, up, down }
}

fn invariance(op: &OperatingPoint) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let f = |b: [f64; 3]| op.gset.rabi(b, 1.0, V_AC).unwrap().f_rabi;
    // Near an extinction f_R is a cancellation whose relative error is round-off
    // amplified, so directions are drawn where the drive is not suppressed.
    let f_max = (0..37 * 37)
        .map(|k| f(unit_vector((k / 37) as f64 * PI / 36.0, (k % 37) as f64 * PI / 36.0)))
        .fold(0.0, f64::max);
    let dirs: Vec<[f64; 3]> = std::iter::repeat_with(|| unit_vector(rng.random_range(0.1..3.0), rng.random_range(0.0..6.28)))
        .filter(|b| f(*b) >= 0.1 * f_max)
        .take(8)
        .collect();
    let base: Vec<f64> = dirs.iter().map(|b| f(*b)).collect();
    let spread = |gs: &spinqubit_core::gmatrix::GMatrixSet| -> f64 {
        dirs.iter().zip(&base).map(|(b, f0)| (gs.rabi(*b, 1.0, V_AC).unwrap().f_rabi / f0 - 1.0).abs()).fold(0.0, f64::max)
    };
    let mut su2: f64 = 0.0;
    for _ in 0..20 {
        let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        let (a, b) = (Complex::new(q[0] / n, q[1] / n), Complex::new(q[2] / n, q[3] / n));
        su2 = su2.max(spread(&op.rebuild(&rotate(op.ground(), a, b), op.gauge_origin).map_err(err)?));
    }
    let mut gauge: f64 = 0.0;
    for _ in 0..3 {
        let o: [f64; 3] = std::array::from_fn(|i| op.gauge_origin[i] + rng.random_range(-2.0..2.0));
        gauge = gauge.max(spread(&op.rebuild(op.ground(), o).map_err(err)?));
    }
    let gs = &op.gset;
    let z = Matrix3::from_fn(|i, j| gs.zeeman[i][j]);
    let zs = z.abs().max();
    let psd = ((z - z.transpose()).abs().max() / zs).max(-z.symmetric_eigen().eigenvalues.min() / zs);
    let rec = gs.svd.reconstruct();
    let svd = (0..9).map(|k| (rec[k / 3][k % 3] - gs.g[k / 3][k % 3]).abs()).fold(0.0, f64::max) / max_abs(&gs.g);
    let split = split_tmr_izr(&gs.g, &gs.g_prime).map_err(err)?;
    let sum = (0..9)
        .map(|k| (split.tmr[k / 3][k % 3] + split.izr[k / 3][k % 3] - gs.g_prime[k / 3][k % 3]).abs())
        .fold(0.0, f64::max)
        / max_abs(&gs.g_prime);
    let pass = su2 < 1e-10 && gauge < 1e-8 && psd < 1e-12 && svd < 1e-12 && sum < 1e-14 && split.antisymmetry_residual < 1e-10;
    Ok((
        pass,
        format!(
            "SU(2) {su2:.1e}, gauge {gauge:.1e}, G {psd:.1e}, SVD {svd:.1e}, TMR+IZR {sum:.1e}, IZR residual {:.1e}",
            split.antisymmetry_residual
        ),
    ))
}

fn zeeman_linearity(op: &OperatingPoint) -> Outcome {
    let mut worst: f64 = 0.0;
    for b in [0.05, 0.1, 0.25, 0.5] {
        for &(t, p) in &CHECK_ORIENTATIONS {
            let f = MagneticField::from_angles(b, t.to_radians(), p.to_radians());
            let q = finite_field_qubit(&op.solution.model, &f, op.gauge_origin, &dense()).map_err(err)?;
            worst = worst.max((q.splitting() / (effective_g(&op.gset.g, f.direction) * MU_B * b) - 1.0).abs());
        }
    }
    Ok((worst < 1e-3, format!("worst |dE/(g* muB B) - 1| = {worst:.2e} over B <= 0.5 T")))
}

fn config(name: &str) -> Result<RunConfig, String> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    RunConfig::load(&path).map_err(err)
}

fn strain_crossover() -> Outcome {
    let cfg = config("strain-sweep.toml")?;
    let t = cmd_sweep(&cfg).map_err(err)?;
    if let Some(r) = t.rows.iter().find(|r| r.error.is_some()) {
        return Err(format!("strain {}: {}", r.param, r.error.as_deref().unwrap()));
    }
    let cross = t.rows.windows(2).find(|w| w[0].hh_weight >= 0.5 && w[1].hh_weight < 0.5).map(|w| {
        let s = (w[0].hh_weight - 0.5) / (w[0].hh_weight - w[1].hh_weight);
        w[0].param + s * (w[1].param - w[0].param)
    });
    let Some(cross) = cross else { return Ok((false, "no heavy-hole to light-hole switch".into())) };
    // Ordering checked where the ground doublet is predominantly light-hole.
    let lh: Vec<_> = t.rows.iter().filter(|r| r.hh_weight < 0.25).collect();
    let ordered = !lh.is_empty() && lh.iter().all(|r| r.g_axes[2] < r.g_axes[0] && r.g_axes[2] < r.g_axes[1]);
    let pass = (0.0005..=0.002).contains(&cross) && ordered;
    Ok((pass, format!("50% crossing at {:.3}%, g_z below g_x, g_y at {} light-hole points", 100.0 * cross, lh.len())))
}

fn economy() -> Outcome {
    let dir = std::env::temp_dir().join(format!("spinqubit-acceptance-{}", std::process::id()));
    let mut cfg = config("desk.toml")?;
    cfg.cache = Some(dir.clone());
    cmd_solve(&cfg).map_err(err)?;
    let t = Instant::now();
    let (map, hit) = cmd_rabimap(&cfg).map_err(err)?;
    let secs = t.elapsed().as_secs_f64();
    let _ = std::fs::remove_dir_all(&dir);
    let pass = hit && map.rows.len() == 37 * 37 && secs < 1.0;
    Ok((pass, format!("{} points in {:.1} ms after one solve (cache hit: {hit})", map.rows.len(), 1e3 * secs)))
}

fn main() {
    let mut all = true;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let (pass, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        all &= pass;
        println!("{} {n:>2} {name}: {detail} [{:.1} s]", if pass { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64());
    };
    report(1, "bulk spectrum", &mut bulk_spectrum);
    let film = thin_film();
    report(2, "pure-doublet g-factors", &mut || pure_doublet(film.as_ref().map_err(Clone::clone)?));
    report(3, "envelope correction", &mut || envelope_correction(film.as_ref().map_err(Clone::clone)?));
    drop(film);
    let desk = desk_point();
    let desk = desk.as_ref().map_err(Clone::clone);
    report(4, "formalism equivalence", &mut || formalism_equivalence(desk.clone()?));
    report(5, "perturbation series", &mut || perturbation_series(desk.clone()?));
    report(6, "symmetry extinctions", &mut || symmetry_extinctions(desk.clone()?));
    report(7, "invariance suite", &mut || invariance(desk.clone()?));
    report(8, "Zeeman linearity", &mut || zeeman_linearity(desk.clone()?));
    report(9, "strain crossover", &mut strain_crossover);
    report(10, "map economy", &mut economy);
    if !all {
        std::process::exit(1);
    }
}

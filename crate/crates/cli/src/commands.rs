//! The subcommands as library functions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spinqubit_core::device::{biaxial_strain, DeviceSpec};
use spinqubit_core::electrostatics::Parity;
use spinqubit_core::gmatrix::{rabi_direct, rabi_from_g, zeeman_tensor, RabiResult, M3};
use spinqubit_core::kp::{unit_vector, CouplingFlags, MagneticField};
use spinqubit_core::pipeline::{Bias, Drive, OperatingPoint, Pipeline, PipelineOptions};
use spinqubit_core::reference::{finite_field_qubit, DENSE_CAP};
use spinqubit_core::spectrum::{heavy_hole_weight, Method, SolverOptions};
use spinqubit_core::symmetry::{
    g_pattern, g_prime_pattern, predict_extinctions, verify_pattern, Extinctions, Mirror, PatternReport, ZeroPattern,
};
use spinqubit_core::units::{H_PLANCK, MU_B};
use spinqubit_core::Error;

use crate::cache::{Cache, SolveRecord};
use crate::config::{config_hash, solve_key, RunConfig, CODE_VERSION};
use crate::error::CliError;

/// Relative tolerance for parity and pattern tests.
pub const SYMMETRY_TOL: f64 = 1e-6;

fn norm3(v: [f64; 3]) -> [f64; 3] {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.map(|x| x / n)
}

/// Rejects bias and drive entries naming gates the device lacks.
fn check_gates(spec: &DeviceSpec, bias: &Bias, drive: &Drive) -> Result<(), CliError> {
    if drive.is_empty() {
        return Err(CliError::Validation("device has no gate to drive".into()));
    }
    for g in bias.keys().chain(drive.keys()) {
        if !spec.gates.iter().any(|x| &x.name == g) {
            return Err(Error::UnknownGate(g.clone()).into());
        }
    }
    Ok(())
}

/// Pipeline and drive for a validated config.
pub fn prepare(cfg: &RunConfig) -> Result<(DeviceSpec, Pipeline, Drive), CliError> {
    cfg.validate()?;
    let spec = cfg.device_spec()?;
    let drive = cfg.effective_drive(&spec);
    check_gates(&spec, &cfg.bias, &drive)?;
    let pipeline = Pipeline::from_spec(&spec, &cfg.mesh_spec())?;
    Ok((spec, pipeline, drive))
}

fn record(cfg: &RunConfig, spec: &DeviceSpec, key: String, drive: &Drive, op: &OperatingPoint) -> SolveRecord {
    let s = &op.solution;
    SolveRecord {
        key,
        code_version: CODE_VERSION.into(),
        device: spec.name.clone(),
        bias: cfg.bias.clone(),
        drive: drive.clone(),
        dim: s.model.dim(),
        ground_energy: s.ground().energy,
        excitations: s.excitations(),
        hh_weight: heavy_hole_weight(&s.ground().up),
        gauge_origin: op.gauge_origin,
        iterations: s.iterations,
        max_residual: s.max_residual,
        gset: op.gset.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutput {
    pub config_hash: String,
    #[serde(flatten)]
    pub record: SolveRecord,
}

/// Runs (or loads from cache) the three zero-field solves. The flag reports a cache hit.
pub fn cmd_solve(cfg: &RunConfig) -> Result<(SolveOutput, bool), CliError> {
    cfg.validate()?;
    let spec = cfg.device_spec()?;
    let drive = cfg.effective_drive(&spec);
    check_gates(&spec, &cfg.bias, &drive)?;
    let key = solve_key(cfg, &spec, &drive);
    let hash = config_hash(cfg, &spec);
    let cache = cfg.cache.as_deref().map(Cache::open).transpose()?;
    if let Some(c) = &cache {
        if let Some(rec) = c.load(&key)? {
            return Ok((SolveOutput { config_hash: hash, record: rec }, true));
        }
    }
    let (spec, pipeline, drive) = prepare(cfg)?;
    let op = pipeline.operating_point(&cfg.bias, &drive, &cfg.options)?;
    let rec = record(cfg, &spec, key, &drive, &op);
    if let Some(c) = &cache {
        let g = op.ground();
        let [p, m] = &op.shifted;
        c.store(&rec, &[&g.up, &g.down, &p.up, &p.down, &m.up, &m.down])?;
    }
    Ok((SolveOutput { config_hash: hash, record: rec }, false))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapRow {
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub g_star: f64,
    /// Field magnitude (T) used at this orientation.
    pub b_field: f64,
    pub f_larmor: f64,
    pub f_rabi: f64,
    pub zero_larmor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiMap {
    pub config_hash: String,
    pub device: String,
    pub bias: Bias,
    pub v_ac: f64,
    pub b_field: Option<f64>,
    pub fixed_zeeman_ghz: Option<f64>,
    pub rows: Vec<MapRow>,
}

/// Orientation grid: theta on [0, 180] inclusive, phi on [0, 180).
pub fn map_angles(theta_points: usize, phi_points: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(theta_points * phi_points);
    for i in 0..theta_points {
        let th = if theta_points == 1 { 90.0 } else { 180.0 * i as f64 / (theta_points - 1) as f64 };
        for j in 0..phi_points {
            out.push((th, 180.0 * j as f64 / phi_points as f64));
        }
    }
    out
}

/// Rabi frequency at one orientation, either at fixed field or fixed Zeeman splitting.
pub fn rabi_at(g: &M3, gp: &M3, b: [f64; 3], b_field: Option<f64>, zeeman_ghz: Option<f64>, v_ac: f64) -> spinqubit_core::Result<RabiResult> {
    let field = match (b_field, zeeman_ghz) {
        (Some(b), _) => b,
        (None, Some(z)) => {
            let gs = spinqubit_core::gmatrix::effective_g(g, b);
            if gs == 0.0 {
                return Err(Error::ZeroLarmor);
            }
            H_PLANCK * z * 1e9 / (gs * MU_B)
        }
        (None, None) => return Err(Error::InvalidInput("no field".into())),
    };
    rabi_from_g(g, gp, b, field, v_ac)
}

/// Rabi map from a solve record; no eigensolves.
pub fn rabimap_from(cfg: &RunConfig, out: &SolveOutput) -> RabiMap {
    let g = &out.record.gset.g;
    let gp = &out.record.gset.g_prime;
    let b_field = cfg.field.magnitude;
    let zeeman = cfg.field.fixed_zeeman_ghz;
    let rows = map_angles(cfg.map.theta_points, cfg.map.phi_points)
        .into_par_iter()
        .map(|(th, ph)| {
            let b = unit_vector(th.to_radians(), ph.to_radians());
            match rabi_at(g, gp, b, b_field, zeeman, cfg.field.v_ac) {
                Ok(r) => MapRow {
                    theta_deg: th,
                    phi_deg: ph,
                    g_star: r.g_star,
                    b_field: r.b_field,
                    f_larmor: r.f_larmor,
                    f_rabi: r.f_rabi,
                    zero_larmor: false,
                },
                Err(_) => MapRow {
                    theta_deg: th,
                    phi_deg: ph,
                    g_star: 0.0,
                    b_field: f64::NAN,
                    f_larmor: 0.0,
                    f_rabi: f64::NAN,
                    zero_larmor: true,
                },
            }
        })
        .collect();
    RabiMap {
        config_hash: out.config_hash.clone(),
        device: out.record.device.clone(),
        bias: out.record.bias.clone(),
        v_ac: cfg.field.v_ac,
        b_field,
        fixed_zeeman_ghz: zeeman,
        rows,
    }
}

pub fn cmd_rabimap(cfg: &RunConfig) -> Result<(RabiMap, bool), CliError> {
    let (out, hit) = cmd_solve(cfg)?;
    Ok((rabimap_from(cfg, &out), hit))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Swept gate voltage (V) or biaxial strain (fraction).
    pub param: f64,
    pub hh_weight: f64,
    /// `E_0 - E_n` (meV) for the configured number of excited pairs.
    pub excitations: Vec<f64>,
    /// Principal g-factors matched to the device axes.
    pub g_axes: [f64; 3],
    pub gp_diag: [f64; 3],
    pub f_rabi: f64,
    /// Largest single-pair share of the perturbation series.
    pub dominant_share: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub config_hash: String,
    pub parameter: String,
    pub excited_pairs: usize,
    pub rows: Vec<SweepRow>,
}

fn failed_row(param: f64, pairs: usize, e: &dyn std::fmt::Display) -> SweepRow {
    SweepRow {
        param,
        hh_weight: f64::NAN,
        excitations: vec![f64::NAN; pairs],
        g_axes: [f64::NAN; 3],
        gp_diag: [f64::NAN; 3],
        f_rabi: f64::NAN,
        dominant_share: f64::NAN,
        error: Some(e.to_string()),
    }
}

fn sweep_point(cfg: &RunConfig, p: &Pipeline, bias: &Bias, drive: &Drive, param: f64) -> Result<SweepRow, CliError> {
    let b = norm3(cfg.field.direction);
    let pairs = cfg.options.excited_pairs;
    let op = p.operating_point(bias, drive, &cfg.options)?;
    let gs = &op.gset;
    let f_rabi = rabi_at(&gs.g, &gs.g_prime, b, cfg.field.magnitude, cfg.field.fixed_zeeman_ghz, cfg.field.v_ac)
        .map(|r| r.f_rabi)
        .unwrap_or(f64::NAN);
    let dominant_share = if pairs > 0 {
        let bf = cfg.field.magnitude.unwrap_or(1.0);
        let m = op.perturbation(b, bf, cfg.field.v_ac)?.magnitudes();
        let tot: f64 = m.iter().sum();
        m.iter().cloned().fold(0.0, f64::max) / tot
    } else {
        f64::NAN
    };
    let mut excitations = op.solution.excitations();
    excitations.resize(pairs, f64::NAN);
    Ok(SweepRow {
        param,
        hh_weight: heavy_hole_weight(&op.ground().up),
        excitations,
        g_axes: gs.svd.factors_by_axis(),
        gp_diag: [gs.g_prime[0][0], gs.g_prime[1][1], gs.g_prime[2][2]],
        f_rabi,
        dominant_share,
        error: None,
    })
}

/// Voltage or strain sweep; each point is independent and failures are recorded per row.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<SweepTable, CliError> {
    let sw = cfg.sweep.as_ref().ok_or_else(|| CliError::Validation("missing [sweep] section".into()))?;
    let (parameter, values) = match (&sw.voltages, &sw.strains) {
        (Some(v), None) => {
            let gate = sw.gate.as_ref().ok_or_else(|| CliError::Validation("voltage sweep needs `gate`".into()))?;
            (format!("V_{gate}"), v.values())
        }
        (None, Some(s)) => ("strain".to_string(), s.values()),
        _ => return Err(CliError::Validation("sweep needs exactly one of `voltages` or `strains`".into())),
    };
    if values.is_empty() {
        return Err(CliError::Validation("sweep grid is empty".into()));
    }
    cfg.validate()?;
    if let Some(gate) = &sw.gate {
        if sw.voltages.is_some() && !cfg.device_spec()?.gates.iter().any(|g| &g.name == gate) {
            return Err(Error::UnknownGate(gate.clone()).into());
        }
    }
    let (spec, pipeline, drive) = prepare(cfg)?;
    let pairs = cfg.options.excited_pairs;
    let hash = config_hash(cfg, &spec);
    let rows = values
        .par_iter()
        .map(|&x| {
            let res = if sw.strains.is_some() {
                biaxial_strain(x, pipeline.device.channel_material())
                    .map_err(CliError::from)
                    .and_then(|e| sweep_point(cfg, &pipeline.with_strain(e), &cfg.bias, &drive, x))
            } else {
                let mut bias = cfg.bias.clone();
                bias.insert(sw.gate.clone().unwrap(), x);
                sweep_point(cfg, &pipeline, &bias, &drive, x)
            };
            res.unwrap_or_else(|e| failed_row(x, pairs, &e))
        })
        .collect();
    Ok(SweepTable { config_hash: hash, parameter, excited_pairs: pairs, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckItem {
    pub name: String,
    pub pass: bool,
    /// Measured deviation.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub config_hash: String,
    pub all_pass: bool,
    pub items: Vec<CheckItem>,
}

fn item(name: &str, value: f64, tolerance: f64, detail: String) -> CheckItem {
    CheckItem { name: name.into(), pass: value <= tolerance, value, tolerance, detail }
}

/// Field orientations (theta, phi in degrees) used by the cross-formula checks.
pub const CHECK_ORIENTATIONS: [(f64, f64); 6] =
    [(45.0, 90.0), (90.0, 90.0), (0.0, 0.0), (45.0, 30.0), (60.0, 120.0), (30.0, 250.0)];

fn max_map(g: &M3, gp: &M3, v_ac: f64) -> f64 {
    map_angles(37, 37)
        .into_iter()
        .filter_map(|(t, p)| rabi_from_g(g, gp, unit_vector(t.to_radians(), p.to_radians()), 1.0, v_ac).ok())
        .fold(0.0, |a, r| a.max(r.f_rabi))
}

/// Cross-checks of the formalism on a dense-solvable instance.
pub fn cmd_check(cfg: &RunConfig) -> Result<CheckReport, CliError> {
    let (spec, pipeline, drive) = prepare(cfg)?;
    let dim = pipeline.mesh.kp.dim();
    if dim > DENSE_CAP {
        return Err(Error::DimensionTooLarge { dim, cap: DENSE_CAP }.into());
    }
    let dense = SolverOptions { method: Method::Dense, ..cfg.options.solver };
    let opts = PipelineOptions { solver: dense, excited_pairs: cfg.options.excited_pairs.max(24), ..cfg.options.clone() };
    let op = pipeline.operating_point(&cfg.bias, &drive, &opts)?;
    let model = &op.solution.model;
    let v_ac = cfg.field.v_ac;
    let gs = &op.gset;
    let mut items = Vec::new();

    let h = model.hamiltonian(&MagneticField::from_angles(1.0, 0.7, 0.3), op.gauge_origin);
    items.push(item("hermiticity", h.hermiticity_defect() / h.norm_estimate(), 1e-13, "relative Hermiticity defect at 1 T".into()));
    items.push(item(
        "eigen_residual",
        op.solution.max_residual / h.norm_estimate(),
        1e-9,
        "largest relative eigenpair residual".into(),
    ));
    items.push(item(
        "doublet_alignment",
        1.0 - gs.alpha[0].min(gs.alpha[1]),
        1e-2,
        format!("1 - min(alpha), alpha = {:?}", gs.alpha),
    ));

    for (b_field, tol, name) in [(0.1, 1e-2, "eq13_vs_direct_0.1T"), (1.0, 5e-2, "eq13_vs_direct_1T")] {
        let mut worst: f64 = 0.0;
        for &(t, p) in &CHECK_ORIENTATIONS {
            let f = MagneticField::from_angles(b_field, t.to_radians(), p.to_radians());
            let q = finite_field_qubit(model, &f, op.gauge_origin, &dense)?;
            let direct = rabi_direct(&q.state0, &q.state1, &op.d1_kp, v_ac);
            let eq13 = gs.rabi(f.direction, b_field, v_ac)?.f_rabi;
            worst = worst.max((eq13 / direct - 1.0).abs());
        }
        items.push(item(name, worst, tol, format!("{} orientations", CHECK_ORIENTATIONS.len())));
    }

    let mut worst: f64 = 0.0;
    for b_field in [0.1, 0.25, 0.5] {
        for &(t, p) in &CHECK_ORIENTATIONS[..3] {
            let f = MagneticField::from_angles(b_field, t.to_radians(), p.to_radians());
            let q = finite_field_qubit(model, &f, op.gauge_origin, &dense)?;
            let gstar = spinqubit_core::gmatrix::effective_g(&gs.g, f.direction);
            worst = worst.max((q.splitting() / (gstar * MU_B * b_field) - 1.0).abs());
        }
    }
    items.push(item("zeeman_linearity", worst, 1e-3, "B <= 0.5 T".into()));

    let b = norm3(cfg.field.direction);
    let f = MagneticField::new(0.1, b)?;
    let q = finite_field_qubit(model, &f, op.gauge_origin, &dense)?;
    let direct = rabi_direct(&q.state0, &q.state1, &op.d1_kp, v_ac);
    let pert = op.perturbation(b, 0.1, v_ac)?;
    let trunc = pert.partial_sums[23.min(pert.partial_sums.len() - 1)];
    items.push(item(
        "perturbation_24_pairs",
        (trunc / direct - 1.0).abs(),
        0.1,
        format!("direction {b:?}, {} pairs available", pert.partial_sums.len()),
    ));

    let z = zeeman_tensor(&gs.g);
    let zmax = z.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
    let asym = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).fold(0.0f64, |a, (i, j)| a.max((z[i][j] - z[j][i]).abs()));
    let emin = spinqubit_core::nalgebra::Matrix3::from_fn(|i, j| z[i][j]).symmetric_eigen().eigenvalues.min();
    items.push(item("zeeman_tensor_psd", (asym / zmax).max(-emin / zmax), 1e-12, "asymmetry and negative eigenvalue".into()));

    let rec = gs.svd.reconstruct();
    let gmax = gs.g.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
    let err = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).fold(0.0f64, |a, (i, j)| a.max((rec[i][j] - gs.g[i][j]).abs()));
    items.push(item("svd_reconstruction", err / gmax, 1e-12, String::new()));

    if let (Some(tmr), Some(izr)) = (gs.tmr, gs.izr) {
        let gpmax = gs.g_prime.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
        let sum = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .fold(0.0f64, |a, (i, j)| a.max((tmr[i][j] + izr[i][j] - gs.g_prime[i][j]).abs()));
        items.push(item("tmr_plus_izr", sum / gpmax.max(1e-300), 1e-12, String::new()));
    }

    // Richardson estimate of the central-difference error in g'.
    let wide = PipelineOptions { delta_v: 2.0 * opts.delta_v, excited_pairs: 0, ..opts.clone() };
    let op2 = pipeline.operating_point(&cfg.bias, &drive, &wide)?;
    let gpmax = gs.g_prime.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
    let rich = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .fold(0.0f64, |a, (i, j)| a.max((op2.gset.g_prime[i][j] - gs.g_prime[i][j]).abs() / 3.0));
    items.push(item("richardson_g_prime", rich / gpmax, 1e-3, format!("delta_v = {} V", opts.delta_v)));

    // gamma3 -> 0 in the channel material suppresses the Rabi frequency.
    let base = max_map(&gs.g, &gs.g_prime, v_ac);
    let mut p0 = pipeline.clone();
    let ch = p0.device.regions[p0.device.channel].material;
    p0.device.materials[ch].gamma3 = 0.0;
    let ground_only = PipelineOptions { excited_pairs: 0, ..opts.clone() };
    let op0 = p0.operating_point(&cfg.bias, &drive, &ground_only)?;
    let m1_only = PipelineOptions {
        flags: CouplingFlags { gamma3_override: Some(0.0), ..opts.flags },
        ..ground_only.clone()
    };
    let op_m1 = pipeline.operating_point(&cfg.bias, &drive, &m1_only)?;
    let ratio = max_map(&op0.gset.g, &op0.gset.g_prime, v_ac) / base;
    let ratio_m1 = max_map(&op_m1.gset.g, &op_m1.gset.g_prime, v_ac) / base;
    items.push(item(
        "gamma3_zero_collapse",
        ratio,
        1e-2,
        format!("max f_R ratio with gamma3 = 0; gamma3 = 0 in M1 only gives {ratio_m1:.3e}"),
    ));

    let all_pass = items.iter().all(|i| i.pass);
    Ok(CheckReport { config_hash: config_hash(cfg, &spec), all_pass, items })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub config_hash: String,
    pub mirrors: Vec<(Mirror, Parity)>,
    pub g_pattern: ZeroPattern,
    pub g_prime_pattern: ZeroPattern,
    pub g_check: PatternReport,
    pub g_prime_check: PatternReport,
    pub extinctions: Extinctions,
    /// `f_R / max map f_R` at each predicted extinct axis.
    pub extinction_values: Vec<(usize, f64)>,
    pub g: M3,
    pub g_prime: M3,
    pub pass: bool,
}

/// Detects exact mirrors, predicts the g and g' zero patterns and verifies them.
pub fn cmd_symmetry(cfg: &RunConfig) -> Result<SymmetryReport, CliError> {
    let (spec, pipeline, drive) = prepare(cfg)?;
    let mirrors = pipeline.detect_mirrors(&cfg.bias, &drive, SYMMETRY_TOL)?;
    let opts = PipelineOptions { adapt_mirrors: mirrors.iter().map(|m| m.0).collect(), ..cfg.options.clone() };
    let op = pipeline.operating_point(&cfg.bias, &drive, &opts)?;
    let gp_pat = g_prime_pattern(&mirrors);
    let g_pat = g_pattern(&mirrors.iter().map(|m| m.0).collect::<Vec<_>>());
    let g_check = verify_pattern(&op.gset.g, &g_pat, SYMMETRY_TOL);
    let g_prime_check = verify_pattern(&op.gset.g_prime, &gp_pat, SYMMETRY_TOL);
    let extinctions = predict_extinctions(&g_pat, &gp_pat);
    let max = max_map(&op.gset.g, &op.gset.g_prime, cfg.field.v_ac);
    let axes = match &extinctions {
        Extinctions::All => vec![0, 1, 2],
        Extinctions::Axes(a) => a.clone(),
    };
    let extinction_values = axes
        .iter()
        .map(|&k| {
            let mut b = [0.0; 3];
            b[k] = 1.0;
            let f = rabi_from_g(&op.gset.g, &op.gset.g_prime, b, 1.0, cfg.field.v_ac).map_or(0.0, |r| r.f_rabi);
            (k, if max > 0.0 { f / max } else { 0.0 })
        })
        .collect::<Vec<_>>();
    let pass = g_check.pass
        && g_prime_check.pass
        && (matches!(extinctions, Extinctions::All) || extinction_values.iter().all(|x| x.1 < SYMMETRY_TOL));
    Ok(SymmetryReport {
        config_hash: config_hash(cfg, &spec),
        mirrors,
        g_pattern: g_pat,
        g_prime_pattern: gp_pat,
        g_check,
        g_prime_check,
        extinctions,
        extinction_values,
        g: op.gset.g,
        g_prime: op.gset.g_prime,
        pass,
    })
}

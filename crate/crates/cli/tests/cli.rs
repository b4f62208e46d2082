use std::path::Path;
use std::process::Command;

use spinqubit_cli::commands::{map_angles, rabi_at, rabimap_from};
use spinqubit_cli::output::{json, map_csv};
use spinqubit_cli::{cmd_check, cmd_rabimap, cmd_solve, cmd_sweep, CliError, RunConfig};
use spinqubit_core::kp::unit_vector;
use spinqubit_core::units::{H_PLANCK, MU_B};
use spinqubit_core::Error;

const DESK: &str = r#"
[device]
preset = "desk"

[bias]
fg = -0.1

[drive]
fg = 1.0
"#;

fn desk(cache: Option<&Path>) -> RunConfig {
    let mut cfg = RunConfig::from_toml(DESK).unwrap();
    cfg.cache = cache.map(Path::to_path_buf);
    cfg
}

fn run_binary(dir: &Path, toml: &str, args: &[&str]) -> std::process::Output {
    let path = dir.join("run.toml");
    std::fs::write(&path, toml).unwrap();
    Command::new(env!("CARGO_BIN_EXE_spinqubit"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .output()
        .unwrap()
}

#[test]
fn warm_cache_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk(Some(dir.path()));
    let (cold, hit) = cmd_solve(&cfg).unwrap();
    assert!(!hit);
    let (warm, hit) = cmd_solve(&cfg).unwrap();
    assert!(hit);
    assert_eq!(json(&cold), json(&warm));
    assert_eq!(map_csv(&rabimap_from(&cfg, &cold)), map_csv(&rabimap_from(&cfg, &warm)));

    // A different bias misses.
    let mut other = cfg.clone();
    other.bias.insert("fg".into(), -0.12);
    assert_ne!(cmd_solve(&other).unwrap().0.record.key, cold.record.key);

    // Flipping a byte of the state file is detected.
    let states = dir.path().join(format!("{}.states", cold.record.key));
    let mut bytes = std::fs::read(&states).unwrap();
    bytes[100] ^= 0x40;
    std::fs::write(&states, bytes).unwrap();
    let err = cmd_solve(&cfg).unwrap_err();
    assert!(matches!(err, CliError::CacheCorrupt(_)), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn unknown_gate_fails_before_solving() {
    let mut cfg = desk(None);
    cfg.bias.insert("plunger".into(), 0.1);
    let t = std::time::Instant::now();
    let err = cmd_solve(&cfg).unwrap_err();
    assert!(matches!(err, CliError::Core(Error::UnknownGate(ref g)) if g == "plunger"), "{err}");
    assert_eq!(err.exit_code(), 2);
    // Rejected from the config alone, well before any electrostatics.
    assert!(t.elapsed().as_millis() < 200);
}

#[test]
fn map_is_even_under_field_reversal_and_thread_count() {
    let cfg = desk(None);
    let (out, _) = cmd_solve(&cfg).unwrap();
    let map = rabimap_from(&cfg, &out);
    assert_eq!(map.rows.len(), 37 * 37);
    assert_eq!(map.rows.len(), map_angles(37, 37).len());
    let (g, gp) = (&out.record.gset.g, &out.record.gset.g_prime);
    let max = map.rows.iter().fold(0.0f64, |m, r| m.max(r.f_rabi));
    for r in &map.rows {
        let b = unit_vector(r.theta_deg.to_radians(), r.phi_deg.to_radians());
        let neg = rabi_at(g, gp, b.map(|x| -x), Some(1.0), None, cfg.field.v_ac).unwrap().f_rabi;
        assert_eq!(neg, r.f_rabi);
        // The antipodal grid point differs from -b only by rounding of the angles.
        let anti = unit_vector((180.0 - r.theta_deg).to_radians(), (r.phi_deg + 180.0).to_radians());
        let f = rabi_at(g, gp, anti, Some(1.0), None, cfg.field.v_ac).unwrap().f_rabi;
        assert!((f - r.f_rabi).abs() <= 1e-12 * max, "{r:?} vs {f}");
    }
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| map_csv(&rabimap_from(&cfg, &out)));
    let b = four.install(|| map_csv(&rabimap_from(&cfg, &out)));
    assert_eq!(a, b);
}

#[test]
fn fixed_zeeman_mode_rescales_the_field() {
    let mut cfg = desk(None);
    cfg.field.magnitude = None;
    cfg.field.fixed_zeeman_ghz = Some(9.0);
    let (map, _) = cmd_rabimap(&cfg).unwrap();
    let target = H_PLANCK * 9e9;
    for r in map.rows.iter().filter(|r| !r.zero_larmor) {
        assert!((r.g_star * MU_B * r.b_field / target - 1.0).abs() < 1e-10, "{r:?}");
        assert!((r.f_larmor / 9e9 - 1.0).abs() < 1e-10);
    }
}

#[test]
fn sweep_validation() {
    let empty = format!("{DESK}\n[sweep]\ngate = \"bg\"\nvoltages = {{ start = 0.0, stop = 0.1, points = 0 }}\n");
    let cfg = RunConfig::from_toml(&empty).unwrap();
    assert!(matches!(cmd_sweep(&cfg), Err(CliError::Validation(_))));
    let both = format!("{DESK}\n[sweep]\ngate = \"bg\"\nvoltages = {{ start = 0.0, stop = 0.1, points = 2 }}\nstrains = {{ start = 0.0, stop = 0.1, points = 2 }}\n");
    assert!(matches!(cmd_sweep(&RunConfig::from_toml(&both).unwrap()), Err(CliError::Validation(_))));
    let bad_gate = format!("{DESK}\n[sweep]\ngate = \"nope\"\nvoltages = {{ start = 0.0, stop = 0.1, points = 2 }}\n");
    assert!(matches!(cmd_sweep(&RunConfig::from_toml(&bad_gate).unwrap()), Err(CliError::Core(Error::UnknownGate(_)))));
}

#[test]
fn sweep_records_per_point_failures() {
    // The strain range crosses the material limit; those rows fail, the rest complete.
    let toml = format!("{DESK}\n[sweep]\nstrains = {{ start = 0.0, stop = 0.1, points = 2 }}\n");
    let t = cmd_sweep(&RunConfig::from_toml(&toml).unwrap()).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert!(t.rows[0].error.is_none() && t.rows[0].hh_weight > 0.5);
    assert!(t.rows[1].error.as_deref().unwrap().contains("out of range"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = run_binary(dir.path(), DESK, &["solve"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let v: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(v["dim"], 1848);
    assert!(v["config_hash"].as_str().unwrap().len() == 64);

    let bad = run_binary(dir.path(), &format!("{DESK}\n[field]\nmagnitude = -1.0\n"), &["rabimap"]);
    assert_eq!(bad.status.code(), Some(2));
    let unknown = run_binary(dir.path(), "[device]\npreset = \"desk\"\nbogus = 1\n", &["solve"]);
    assert_eq!(unknown.status.code(), Some(2));

    let diverge = format!("{DESK}\n[options.solver]\nmethod = \"Lobpcg\"\nmax_iter = 2\n");
    let fail = run_binary(dir.path(), &diverge, &["solve"]);
    assert_eq!(fail.status.code(), Some(3), "{}", String::from_utf8_lossy(&fail.stderr));

    let csv = run_binary(dir.path(), DESK, &["rabimap", "--format", "csv", "--fixed-zeeman", "9"]);
    assert_eq!(csv.status.code(), Some(0));
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("# config_hash="));
    assert_eq!(text.lines().count(), 2 + 37 * 37);
}

#[test]
fn check_flags_a_coarse_gate_step() {
    let fine = cmd_check(&desk(None)).unwrap();
    let failing: Vec<_> = fine.items.iter().filter(|i| !i.pass).collect();
    assert!(fine.all_pass, "{failing:?}");

    let mut cfg = desk(None);
    cfg.options.delta_v = 0.1;
    let coarse = cmd_check(&cfg).unwrap();
    let rich = coarse.items.iter().find(|i| i.name == "richardson_g_prime").unwrap();
    assert!(!rich.pass, "{rich:?}");
    assert!(!coarse.all_pass);
}

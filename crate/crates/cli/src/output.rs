//! CSV and JSON rendering.

use std::fmt::Write;

use serde::Serialize;

use crate::commands::{RabiMap, SweepTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Columns: theta_deg, phi_deg, g_star, b_field_t, f_larmor_hz, f_rabi_hz, zero_larmor.
pub fn map_csv(m: &RabiMap) -> String {
    let mut s = String::new();
    writeln!(s, "# config_hash={}", m.config_hash).unwrap();
    writeln!(s, "theta_deg,phi_deg,g_star,b_field_t,f_larmor_hz,f_rabi_hz,zero_larmor").unwrap();
    for r in &m.rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.theta_deg, r.phi_deg, r.g_star, r.b_field, r.f_larmor, r.f_rabi, r.zero_larmor as u8
        )
        .unwrap();
    }
    s
}

/// Columns: parameter, hh_weight, dE_1..dE_n (meV), g_x, g_y, g_z, gp_xx, gp_yy, gp_zz,
/// f_rabi_hz, dominant_share, error.
pub fn sweep_csv(t: &SweepTable) -> String {
    let mut s = String::new();
    writeln!(s, "# config_hash={}", t.config_hash).unwrap();
    let mut header = vec![t.parameter.clone(), "hh_weight".into()];
    header.extend((1..=t.excited_pairs).map(|n| format!("dE_{n}_mev")));
    header.extend(["g_x", "g_y", "g_z", "gp_xx", "gp_yy", "gp_zz", "f_rabi_hz", "dominant_share", "error"].map(String::from));
    writeln!(s, "{}", header.join(",")).unwrap();
    for r in &t.rows {
        let mut cols = vec![r.param.to_string(), r.hh_weight.to_string()];
        cols.extend(r.excitations.iter().map(|x| x.to_string()));
        cols.extend(r.g_axes.iter().chain(&r.gp_diag).map(|x| x.to_string()));
        cols.push(r.f_rabi.to_string());
        cols.push(r.dominant_share.to_string());
        cols.push(r.error.as_deref().unwrap_or("").replace(',', ";"));
        writeln!(s, "{}", cols.join(",")).unwrap();
    }
    s
}

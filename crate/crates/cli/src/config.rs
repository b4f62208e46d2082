//! Run configuration read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spinqubit_core::device::DeviceSpec;
use spinqubit_core::mesh::MeshSpec;
use spinqubit_core::pipeline::{Bias, Drive, PipelineOptions};
use spinqubit_core::presets;

use crate::error::CliError;

/// Bumped whenever cached results may change meaning.
pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "+cache2");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSource {
    /// Device TOML file, relative to the config file.
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Built-in device name.
    #[serde(default)]
    pub preset: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    /// Target spacing per axis (nm).
    pub spacing: [f64; 3],
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { spacing: [1.0; 3] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    /// Field magnitude (T); exclusive with `fixed_zeeman_ghz`.
    #[serde(default)]
    pub magnitude: Option<f64>,
    /// Constant Zeeman splitting (GHz); the field is rescaled per orientation.
    #[serde(default)]
    pub fixed_zeeman_ghz: Option<f64>,
    /// RF amplitude (V).
    #[serde(default = "default_v_ac")]
    pub v_ac: f64,
    /// Field direction for sweeps and checks.
    #[serde(default = "default_direction")]
    pub direction: [f64; 3],
}

fn default_v_ac() -> f64 {
    1e-3
}

fn default_direction() -> [f64; 3] {
    [0.0, 1.0, 1.0]
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self { magnitude: Some(1.0), fixed_zeeman_ghz: None, v_ac: default_v_ac(), direction: default_direction() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    /// Polar angles from 0 to 180 degrees inclusive.
    pub theta_points: usize,
    /// Azimuthal angles on [0, 180) degrees.
    pub phi_points: usize,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self { theta_points: 37, phi_points: 37 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n).map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Gate swept by `voltages`.
    #[serde(default)]
    pub gate: Option<String>,
    #[serde(default)]
    pub voltages: Option<Range>,
    /// Biaxial in-plane strain values (fractions).
    #[serde(default)]
    pub strains: Option<Range>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub device: DeviceSource,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub bias: Bias,
    #[serde(default)]
    pub drive: Drive,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub map: MapConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub options: PipelineOptions,
    /// Output file; standard output when absent.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub cache: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    /// Reads a config file; relative paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(p) = &cfg.device.path {
            if p.is_relative() {
                cfg.device.path = Some(base.join(p));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Validation(m.into()));
        match (&self.device.path, &self.device.preset) {
            (Some(_), Some(_)) | (None, None) => return bad("device needs exactly one of `path` or `preset`"),
            _ => {}
        }
        match (self.field.magnitude, self.field.fixed_zeeman_ghz) {
            (Some(b), None) if b > 0.0 => {}
            (None, Some(z)) if z > 0.0 => {}
            _ => return bad("field needs exactly one positive `magnitude` or `fixed_zeeman_ghz`"),
        }
        if self.map.theta_points == 0 || self.map.phi_points == 0 {
            return bad("map grid is empty");
        }
        if !(self.field.v_ac > 0.0) {
            return bad("v_ac must be positive");
        }
        if self.field.direction.iter().all(|&x| x == 0.0) {
            return bad("field direction is zero");
        }
        if self.mesh.spacing.iter().any(|&h| !(h > 0.0)) {
            return bad("mesh spacing must be positive");
        }
        if !(self.options.delta_v > 0.0) || !(self.options.delta_b > 0.0) {
            return bad("finite-difference steps must be positive");
        }
        Ok(())
    }

    pub fn device_spec(&self) -> Result<DeviceSpec, CliError> {
        if let Some(p) = &self.device.path {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
            return Ok(DeviceSpec::from_toml(&text)?);
        }
        let name = self.device.preset.as_deref().unwrap_or_default();
        presets::by_name(name).ok_or_else(|| CliError::Validation(format!("unknown device preset `{name}`")))
    }

    pub fn mesh_spec(&self) -> MeshSpec {
        MeshSpec { target_spacing: self.mesh.spacing }
    }

    /// Drive used for g': the configured one, else the first biased gate.
    pub fn effective_drive(&self, spec: &DeviceSpec) -> Drive {
        if !self.drive.is_empty() {
            return self.drive.clone();
        }
        let first = self.bias.keys().next().or_else(|| spec.gates.first().map(|g| &g.name));
        first.map(|g| Drive::from([(g.clone(), 1.0)])).unwrap_or_default()
    }
}

/// Hex SHA-256 of a serializable value (through its JSON form).
pub fn hash_of<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct SolveKey<'a> {
    device: &'a DeviceSpec,
    mesh: &'a MeshConfig,
    bias: &'a Bias,
    drive: &'a Drive,
    options: &'a PipelineOptions,
    version: &'a str,
}

/// Cache key of the three-solve construction.
pub fn solve_key(cfg: &RunConfig, spec: &DeviceSpec, drive: &Drive) -> String {
    hash_of(&SolveKey {
        device: spec,
        mesh: &cfg.mesh,
        bias: &cfg.bias,
        drive,
        options: &cfg.options,
        version: CODE_VERSION,
    })
}

/// Provenance hash of the whole resolved configuration.
pub fn config_hash(cfg: &RunConfig, spec: &DeviceSpec) -> String {
    #[derive(Serialize)]
    struct Full<'a> {
        cfg: &'a RunConfig,
        device: &'a DeviceSpec,
        version: &'a str,
    }
    hash_of(&Full { cfg, device: spec, version: CODE_VERSION })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_defaults() {
        let c = RunConfig::from_toml("[device]\npreset = \"desk\"\n[bias]\nfg = -0.1\n").unwrap();
        c.validate().unwrap();
        assert_eq!(c.map.theta_points, 37);
        assert_eq!(c.field.magnitude, Some(1.0));
        let spec = c.device_spec().unwrap();
        assert_eq!(c.effective_drive(&spec), Drive::from([("fg".to_string(), 1.0)]));
    }

    #[test]
    fn field_modes_are_exclusive() {
        let c = RunConfig::from_toml("[device]\npreset = \"desk\"\n[field]\nmagnitude = 1.0\nfixed_zeeman_ghz = 9.0\n").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::from_toml("[device]\npreset = \"desk\"\n[field]\nv_ac = 1e-3\n").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn empty_grid_rejected() {
        let c = RunConfig::from_toml("[device]\npreset = \"desk\"\n[map]\ntheta_points = 0\nphi_points = 3\n").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn range_values() {
        assert_eq!(Range { start: 0.0, stop: 1.0, points: 3 }.values(), vec![0.0, 0.5, 1.0]);
        assert!(Range { start: 0.0, stop: 1.0, points: 0 }.values().is_empty());
    }

    #[test]
    fn key_changes_with_bias() {
        let a = RunConfig::from_toml("[device]\npreset = \"desk\"\n[bias]\nfg = -0.1\n").unwrap();
        let b = RunConfig::from_toml("[device]\npreset = \"desk\"\n[bias]\nfg = -0.2\n").unwrap();
        let s = a.device_spec().unwrap();
        let d = a.effective_drive(&s);
        assert_ne!(solve_key(&a, &s, &d), solve_key(&b, &s, &d));
        assert_eq!(solve_key(&a, &s, &d), solve_key(&a.clone(), &s, &d));
    }
}

//! On-disk cache of solve results: a JSON record plus a checksummed binary state file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spinqubit_core::gmatrix::GMatrixSet;
use spinqubit_core::num_complex::Complex64 as C64;
use spinqubit_core::pipeline::{Bias, Drive};

use crate::error::CliError;

const MAGIC: &[u8; 4] = b"SQST";
const FORMAT: u32 = 1;

/// Result of the three-solve construction at one bias point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub key: String,
    pub code_version: String,
    pub device: String,
    pub bias: Bias,
    pub drive: Drive,
    pub dim: usize,
    /// Ground doublet energy (meV, electron sign convention).
    pub ground_energy: f64,
    /// `E_0 - E_n` of the excited pairs (meV).
    pub excitations: Vec<f64>,
    pub hh_weight: f64,
    pub gauge_origin: [f64; 3],
    pub iterations: usize,
    pub max_residual: f64,
    pub gset: GMatrixSet,
}

pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn open(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn paths(&self, key: &str) -> (PathBuf, PathBuf) {
        (self.dir.join(format!("{key}.json")), self.dir.join(format!("{key}.states")))
    }

    /// Cached record, `None` on a miss.
    pub fn load(&self, key: &str) -> Result<Option<SolveRecord>, CliError> {
        let (json, states) = self.paths(key);
        if !json.exists() || !states.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&json)?;
        let rec: SolveRecord = serde_json::from_str(&text).map_err(|_| CliError::CacheCorrupt(key.into()))?;
        if rec.key != key {
            return Err(CliError::CacheCorrupt(key.into()));
        }
        let s = read_states(&fs::read(&states)?).ok_or_else(|| CliError::CacheCorrupt(key.into()))?;
        if s.iter().any(|v| v.len() != rec.dim) {
            return Err(CliError::CacheCorrupt(key.into()));
        }
        Ok(Some(rec))
    }

    /// Reads the cached states (ground up, ground down, then the shifted doublets).
    pub fn load_states(&self, key: &str) -> Result<Vec<Vec<C64>>, CliError> {
        let (_, states) = self.paths(key);
        read_states(&fs::read(states)?).ok_or_else(|| CliError::CacheCorrupt(key.into()))
    }

    pub fn store(&self, rec: &SolveRecord, states: &[&[C64]]) -> Result<(), CliError> {
        let (json, st) = self.paths(&rec.key);
        fs::write(&st, write_states(states))?;
        let text = serde_json::to_string(rec).expect("serializable record");
        fs::write(&json, text)?;
        Ok(())
    }
}

pub fn write_states(states: &[&[C64]]) -> Vec<u8> {
    let dim = states.first().map_or(0, |s| s.len());
    let mut out = Vec::with_capacity(24 + 16 * dim * states.len() + 32);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT.to_le_bytes());
    out.extend_from_slice(&(dim as u64).to_le_bytes());
    out.extend_from_slice(&(states.len() as u64).to_le_bytes());
    for s in states {
        for z in s.iter() {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    let sum = Sha256::digest(&out);
    out.extend_from_slice(&sum);
    out
}

pub fn read_states(bytes: &[u8]) -> Option<Vec<Vec<C64>>> {
    if bytes.len() < 24 + 32 || &bytes[..4] != MAGIC {
        return None;
    }
    let (body, sum) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != sum {
        return None;
    }
    let u32_at = |o: usize| u32::from_le_bytes(body[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(body[o..o + 8].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(body[o..o + 8].try_into().unwrap());
    if u32_at(4) != FORMAT {
        return None;
    }
    let (dim, count) = (u64_at(8), u64_at(16));
    if body.len() != 24 + 16 * dim * count {
        return None;
    }
    Some(
        (0..count)
            .map(|s| (0..dim).map(|i| {
                let o = 24 + 16 * (s * dim + i);
                C64::new(f64_at(o), f64_at(o + 8))
            }).collect())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn states_roundtrip_and_corruption() {
        let a = vec![C64::new(1.0, -2.0), C64::new(0.5, 0.25)];
        let b = vec![C64::new(-3.0, 0.0), C64::new(1e-300, 7.0)];
        let mut bytes = write_states(&[&a, &b]);
        assert_eq!(read_states(&bytes).unwrap(), vec![a, b]);
        bytes[30] ^= 1;
        assert!(read_states(&bytes).is_none());
        assert!(read_states(b"SQST").is_none());
    }
}

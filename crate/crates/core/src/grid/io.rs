//! Mask files: one byte (0 or 1) per cell in row-major order, plus a JSON
//! sidecar `<file>.json` holding the grid spec.

use std::fs;
use std::path::{Path, PathBuf};

use super::{DomainMask, GridSpec};
use crate::error::{Error, Result};

/// Path of the JSON sidecar that accompanies a binary mask or field file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

impl DomainMask {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.inside.iter().map(|&b| u8::from(b)).collect()
    }

    pub fn from_bytes(spec: GridSpec, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != spec.len() {
            return Err(Error::InvalidParameter(format!(
                "mask has {} bytes, grid has {} cells",
                bytes.len(),
                spec.len()
            )));
        }
        let inside = bytes
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::InvalidParameter(format!("mask byte {other} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()?;
        DomainMask::new(spec, inside)
    }

    /// Write the mask bytes to `path` and the spec to `path` + ".json".
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        fs::write(sidecar_path(path), serde_json::to_vec_pretty(&self.spec)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let side = sidecar_path(path);
        let spec: GridSpec = serde_json::from_slice(&fs::read(&side)?).map_err(|e| Error::Format {
            path: side.clone(),
            reason: e.to_string(),
        })?;
        let bytes = fs::read(path)?;
        DomainMask::from_bytes(spec, &bytes).map_err(|e| Error::Format { path: path.to_path_buf(), reason: e.to_string() })
    }
}

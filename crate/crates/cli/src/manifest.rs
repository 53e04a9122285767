//! Run manifest: the configuration, tool version, wall-clock span and a
//! SHA-256 inventory of every output file.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: digest {found} does not match the recorded {recorded}")]
    Mismatch { path: PathBuf, recorded: String, found: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Config file text as read.
    pub config: String,
    /// Environment overrides applied on top of it.
    pub overrides: Vec<String>,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub files: Vec<FileEntry>,
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn digest(path: &Path) -> Result<(u64, String), ManifestError> {
    let bytes = fs::read(path).map_err(|source| ManifestError::File { path: path.to_owned(), source })?;
    Ok((bytes.len() as u64, hex::encode(Sha256::digest(&bytes))))
}

/// Inventory of `files` (relative to `root`), in the given order.
pub fn inventory(root: &Path, files: &[String]) -> Result<Vec<FileEntry>, ManifestError> {
    files
        .iter()
        .map(|rel| {
            let (bytes, sha256) = digest(&root.join(rel))?;
            Ok(FileEntry { path: rel.clone(), bytes, sha256 })
        })
        .collect()
}

impl RunManifest {
    pub fn write(&self, root: &Path) -> Result<(), ManifestError> {
        let path = root.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|source| ManifestError::Json { path: path.clone(), source })?;
        fs::write(&path, text + "\n").map_err(|source| ManifestError::File { path, source })
    }

    pub fn read(root: &Path) -> Result<Self, ManifestError> {
        let path = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|source| ManifestError::File { path: path.clone(), source })?;
        serde_json::from_str(&text).map_err(|source| ManifestError::Json { path, source })
    }

    /// Every listed file exists under `root` with the recorded digest.
    pub fn validate(&self, root: &Path) -> Result<(), ManifestError> {
        for f in &self.files {
            let path = root.join(&f.path);
            let (_, found) = digest(&path)?;
            if found != f.sha256 {
                return Err(ManifestError::Mismatch { path, recorded: f.sha256.clone(), found });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tampering_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.csv"), "x\n1\n").unwrap();
        let m = RunManifest {
            tool: "u2flow".into(),
            version: "0".into(),
            config: "k = 2\n".into(),
            overrides: vec![],
            started_unix_s: 0.0,
            finished_unix_s: 0.0,
            files: inventory(dir.path(), &["a.csv".to_string()]).unwrap(),
        };
        assert_eq!(m.files[0].bytes, 4);
        m.write(dir.path()).unwrap();
        let back = RunManifest::read(dir.path()).unwrap();
        assert_eq!(back, m);
        back.validate(dir.path()).unwrap();
        fs::write(dir.path().join("a.csv"), "x\n2\n").unwrap();
        assert!(matches!(back.validate(dir.path()), Err(ManifestError::Mismatch { .. })));
    }
}

//! `manifest.json`: what produced an output directory and what is in it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_sha256: String,
    pub version: String,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
    /// Relative path (forward slashes) to SHA-256.
    pub files: BTreeMap<String, String>,
    /// Per-stage diagnostics (fit residuals, condition numbers, blow-ups, ...).
    pub diagnostics: BTreeMap<String, serde_json::Value>,
}

impl RunManifest {
    pub fn new(config_sha256: String) -> Self {
        Self { config_sha256, version: env!("CARGO_PKG_VERSION").to_string(), ..Self::default() }
    }

    pub fn path(dir: &Path) -> PathBuf {
        dir.join(MANIFEST_NAME)
    }

    /// Loads the manifest of `dir` if it belongs to the same config, else
    /// starts a fresh one.
    pub fn open(dir: &Path, config_sha256: &str) -> Result<Self> {
        let path = Self::path(dir);
        if !path.exists() {
            return Ok(Self::new(config_sha256.to_string()));
        }
        let text = std::fs::read_to_string(&path)?;
        let m: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        Ok(if m.config_sha256 == config_sha256 { m } else { Self::new(config_sha256.to_string()) })
    }

    /// Rescans `dir` so every file (except the manifest) is listed with its
    /// current checksum, then writes the manifest.
    pub fn save(&mut self, dir: &Path) -> Result<()> {
        self.files = checksum_tree(dir)?;
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(Self::path(dir), text + "\n")?;
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

fn checksum_tree(dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for entry in walkdir::WalkDir::new(dir) {
        let entry = entry.map_err(|e| Error::Io(e.into()))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(dir).expect("walk stays below dir");
        let key = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        if key != MANIFEST_NAME {
            out.insert(key, sha256_file(entry.path())?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_every_file_with_checksum() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("a/b")).unwrap();
        std::fs::write(dir.path().join("a/b/x.csv"), "r,v\n").unwrap();
        std::fs::write(dir.path().join("top.txt"), "").unwrap();
        let mut m = RunManifest::new("abc".into());
        m.timings.insert("simulate".into(), 1.5);
        m.save(dir.path()).unwrap();
        assert_eq!(m.files.len(), 2);
        assert_eq!(
            m.files["top.txt"],
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert!(m.files.contains_key("a/b/x.csv"));

        let again = RunManifest::open(dir.path(), "abc").unwrap();
        assert_eq!(again, m);
        assert!(RunManifest::open(dir.path(), "other").unwrap().files.is_empty());
    }
}

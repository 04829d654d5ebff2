//! Run manifest: config hash, version, documented deviations, output
//! files with checksums, and per-stage wall-clock times.

use crate::error::{Error, Result};
use crate::learners::Algorithm;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub scenario: String,
    pub config_hash: String,
    /// Methodological substitutions baked into this build.
    pub deviations: Vec<String>,
    pub files: Vec<FileEntry>,
    /// Wall-clock seconds per stage; informational, varies run to run.
    pub wall_clock_seconds: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(scenario: &str, config_hash: String, algorithm: Algorithm) -> RunManifest {
        let mut deviations =
            vec!["hyperparameter search: uniform random sampling stands in for TPE".to_string()];
        if algorithm == Algorithm::Gbdt {
            deviations.push(
                "learner: in-repo gradient-boosted trees stand in for LightGBM".to_string(),
            );
        }
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            scenario: scenario.to_string(),
            config_hash,
            deviations,
            files: Vec::new(),
            wall_clock_seconds: BTreeMap::new(),
        }
    }

    pub fn add_file(&mut self, out_dir: &Path, path: &Path, bytes: &[u8]) {
        let mut hasher = Sha256::new();
        hasher.update(bytes);
        let digest = hasher.finalize();
        let rel = path
            .strip_prefix(out_dir)
            .unwrap_or(path)
            .to_string_lossy()
            .to_string();
        self.files.push(FileEntry {
            path: rel,
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        });
    }

    pub fn record_time(&mut self, stage: &str, seconds: f64) {
        self.wall_clock_seconds.insert(stage.to_string(), seconds);
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_toml(text: &str) -> Result<RunManifest> {
        toml::from_str(text).map_err(|e| Error::SchemaMismatch(format!("bad manifest: {e}")))
    }

    /// Everything files must satisfy on successful exit.
    pub fn check_files_exist(&self, out_dir: &Path) -> Result<()> {
        for entry in &self.files {
            let p = out_dir.join(&entry.path);
            if !p.exists() {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("manifest lists missing file {p:?}"),
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deviations_cover_gbdt_and_random_search() {
        let m = RunManifest::new("scenario2", "abc".into(), Algorithm::Gbdt);
        assert_eq!(m.deviations.len(), 2);
        let m = RunManifest::new("scenario2", "abc".into(), Algorithm::Logreg);
        assert_eq!(m.deviations.len(), 1);
        assert!(m.deviations[0].contains("random"));
    }

    #[test]
    fn toml_round_trip() {
        let mut m = RunManifest::new("scenario1", "ff".into(), Algorithm::Gbdt);
        m.record_time("seed_0", 1.25);
        m.add_file(Path::new("/out"), Path::new("/out/x.csv"), b"data");
        let back = RunManifest::from_toml(&m.to_toml()).unwrap();
        assert_eq!(m, back);
    }
}

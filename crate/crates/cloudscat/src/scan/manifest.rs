//! Run manifest: configuration echo, software version, artifact
//! checksums, resample counters, throughput, and statistical-noise
//! summaries. Written as `manifest.json` next to the artifacts it
//! describes.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn sha256_hex(data: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(data);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct ResampleSummary {
    pub geometry: u64,
    pub degeneracy: u64,
    pub configurations: u64,
    pub rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NoiseSummary {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub files: Vec<FileEntry>,
    pub resamples: ResampleSummary,
    pub wall_seconds: f64,
    pub realizations_per_second: f64,
    /// Scalar summaries of the statistical noise of the run (standard
    /// errors, residuals, quadrature checks).
    pub noise: Vec<NoiseSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heatmap_range: Option<[f64; 2]>,
}

impl Manifest {
    pub fn new(command: &str, config_echo: serde_json::Value) -> Self {
        Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config_echo,
            files: Vec::new(),
            resamples: ResampleSummary::default(),
            wall_seconds: 0.0,
            realizations_per_second: 0.0,
            noise: Vec::new(),
            heatmap_range: None,
        }
    }

    pub fn record_file(&mut self, name: &str, contents: &[u8]) {
        self.files.push(FileEntry {
            name: name.to_string(),
            bytes: contents.len(),
            sha256: sha256_hex(contents),
        });
    }

    pub fn add_noise(&mut self, name: &str, value: f64) {
        self.noise.push(NoiseSummary {
            name: name.to_string(),
            value,
        });
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

/// Re-hash every file listed in `dir/manifest.json` and compare with the
/// recorded checksums.
pub fn verify_manifest(dir: &Path) -> Result<()> {
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path)?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    let files = value
        .get("files")
        .and_then(|f| f.as_array())
        .ok_or_else(|| Error::Validation("manifest has no files array".into()))?;
    for entry in files {
        let name = entry
            .get("name")
            .and_then(|n| n.as_str())
            .ok_or_else(|| Error::Validation("manifest file entry without name".into()))?;
        let want = entry
            .get("sha256")
            .and_then(|h| h.as_str())
            .ok_or_else(|| Error::Validation(format!("{name}: missing sha256")))?;
        let data = std::fs::read(dir.join(name))?;
        let got = sha256_hex(&data);
        if got != want {
            return Err(Error::Validation(format!(
                "checksum mismatch for {name}: recorded {want}, actual {got}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_known_vectors() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_round_trip_verifies() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new("spectrum", serde_json::json!({"k": 1}));
        std::fs::write(dir.path().join("a.csv"), "x\n1.0\n").unwrap();
        m.record_file("a.csv", b"x\n1.0\n");
        m.add_noise("c_total_se_max", 0.01);
        m.write(dir.path()).unwrap();
        verify_manifest(dir.path()).unwrap();
    }

    #[test]
    fn corrupted_artifact_fails_verification() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new("spectrum", serde_json::json!({}));
        std::fs::write(dir.path().join("a.csv"), "x\n1.0\n").unwrap();
        m.record_file("a.csv", b"x\n1.0\n");
        m.write(dir.path()).unwrap();
        std::fs::write(dir.path().join("a.csv"), "x\n2.0\n").unwrap();
        let err = verify_manifest(dir.path()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
        assert!(err.to_string().contains("a.csv"));
    }

    #[test]
    fn manifest_json_shape() {
        let mut m = Manifest::new("pattern", serde_json::json!({"n": 2}));
        m.heatmap_range = Some([0.0, 2.5]);
        let text = serde_json::to_string(&m).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["command"], "pattern");
        assert_eq!(v["config"]["n"], 2);
        assert_eq!(v["heatmap_range"][1], 2.5);
        assert!(v["version"].as_str().unwrap().contains('.'));
    }
}

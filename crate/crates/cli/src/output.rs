//! Artifact staging and the run manifest.

use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::run::Artifact;

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG: &str = "config.json";

#[derive(Debug, Serialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub plcml: &'static str,
    pub plcml_cli: &'static str,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub artifacts: Vec<ArtifactEntry>,
    pub versions: Versions,
}

fn sha(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn manifest(cfg: &ExperimentConfig, command: &str, artifacts: &[Artifact]) -> Manifest {
    Manifest {
        command: command.to_string(),
        config_sha256: cfg.hash(),
        seed: cfg.seed,
        artifacts: artifacts.iter().map(|a| ArtifactEntry { path: a.name.clone(), bytes: a.bytes.len(), sha256: sha(&a.bytes) }).collect(),
        versions: Versions { plcml: plcml::VERSION, plcml_cli: env!("CARGO_PKG_VERSION") },
    }
}

/// The configuration as run, without the output location and thread count
/// so that reruns elsewhere produce identical files.
fn config_artifact(cfg: &ExperimentConfig) -> Artifact {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    let map = v.as_object_mut().expect("object");
    map.remove("output_dir");
    map.remove("threads");
    Artifact { name: CONFIG.to_string(), bytes: (serde_json::to_string_pretty(&v).expect("json") + "\n").into_bytes() }
}

/// Writes every artifact into a staging directory inside the output
/// directory, then moves them into place and writes the manifest last. On
/// failure the staging directory is removed, as is the output directory if
/// this call created it.
pub fn commit(cfg: &ExperimentConfig, command: &str, mut artifacts: Vec<Artifact>) -> io::Result<Vec<PathBuf>> {
    artifacts.push(config_artifact(cfg));
    let out = &cfg.output_dir;
    let created = !out.exists();
    std::fs::create_dir_all(out)?;
    let result = stage_and_move(out, cfg, command, &artifacts);
    if result.is_err() && created {
        let _ = std::fs::remove_dir_all(out);
    }
    result
}

fn stage_and_move(out: &Path, cfg: &ExperimentConfig, command: &str, artifacts: &[Artifact]) -> io::Result<Vec<PathBuf>> {
    let staging = tempfile::Builder::new().prefix(".staging-").tempdir_in(out)?;
    for a in artifacts {
        std::fs::write(staging.path().join(&a.name), &a.bytes)?;
    }
    let m = manifest(cfg, command, artifacts);
    std::fs::write(staging.path().join(MANIFEST), serde_json::to_string_pretty(&m).expect("manifest") + "\n")?;
    let mut paths = Vec::new();
    for name in artifacts.iter().map(|a| a.name.as_str()).chain([MANIFEST]) {
        let dest = out.join(name);
        std::fs::rename(staging.path().join(name), &dest)?;
        paths.push(dest);
    }
    Ok(paths)
}

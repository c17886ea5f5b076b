use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub stage: String,
    pub stratum: Option<String>,
    pub file: String,
    pub rows: usize,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub generated_at: String,
    pub artifacts: Vec<ArtifactRecord>,
}

fn stage_rank(stage: &str) -> usize {
    super::STAGES
        .iter()
        .position(|s| *s == stage)
        .unwrap_or(super::STAGES.len())
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Option<Manifest>> {
        let path = dir.join(MANIFEST_FILE);
        if !path.is_file() {
            return Ok(None);
        }
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Some(serde_json::from_slice(&bytes)?))
    }

    /// Merges `records` into the manifest already in `dir` (replacing entries
    /// for the same file) and writes the result.
    pub fn update(dir: &Path, config_hash: &str, records: Vec<ArtifactRecord>) -> Result<Manifest> {
        let mut artifacts = match Manifest::load(dir) {
            Ok(Some(m)) => m.artifacts,
            Ok(None) => Vec::new(),
            Err(e) => {
                log::warn!("ignoring unreadable {MANIFEST_FILE}: {e}");
                Vec::new()
            }
        };
        artifacts.retain(|a| !records.iter().any(|r| r.file == a.file));
        artifacts.extend(records);
        artifacts.sort_by(|a, b| {
            (stage_rank(&a.stage), &a.stratum, &a.file).cmp(&(stage_rank(&b.stage), &b.stratum, &b.file))
        });
        let manifest = Manifest {
            config_hash: config_hash.to_string(),
            generated_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            artifacts,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        write_atomic(&dir.join(MANIFEST_FILE), &bytes)?;
        Ok(manifest)
    }

    pub fn stages_for(&self, stratum: &str) -> Vec<&str> {
        let mut stages: Vec<&str> = self
            .artifacts
            .iter()
            .filter(|a| a.stratum.as_deref() == Some(stratum))
            .map(|a| a.stage.as_str())
            .collect();
        stages.dedup();
        stages
    }
}

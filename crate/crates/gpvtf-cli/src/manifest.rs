//! On-disk manifests: every artifact records the exact inputs that
//! produced it, so replaying a manifest reproduces the run bit-for-bit.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use gpvtf::data::{load_dataset, PairedDataset};
use gpvtf::error::{Error, Result};

pub const SYNTH_FORMAT: &str = "gpvtf-synth-manifest-v1";
pub const RUN_FORMAT: &str = "gpvtf-run-manifest-v1";
pub const METRICS_FORMAT: &str = "gpvtf-metrics-v1";

/// Parameters that generated a synthetic dataset, plus the files written.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthManifest {
    pub format: String,
    pub k: usize,
    pub per_cluster: usize,
    pub d1: usize,
    pub d2: usize,
    pub separation: f64,
    pub modality_noise: f64,
    pub seed: u64,
    /// File names relative to the manifest's directory.
    pub visual: String,
    pub tactile: String,
    pub labels: String,
}

impl SynthManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let m: SynthManifest = serde_json::from_str(&text)
            .map_err(|e| Error::param(format!("{}: {e}", path.display())))?;
        if m.format != SYNTH_FORMAT {
            return Err(Error::param(format!(
                "{}: unsupported manifest format {:?}",
                path.display(),
                m.format
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::param(format!("manifest serialization: {e}")))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn resolve_files(&self, manifest_path: &Path) -> (PathBuf, PathBuf, PathBuf) {
        let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
        (
            base.join(&self.visual),
            base.join(&self.tactile),
            base.join(&self.labels),
        )
    }
}

/// Where a run's dataset comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSource {
    pub visual: PathBuf,
    pub tactile: PathBuf,
    pub labels: PathBuf,
}

impl DatasetSource {
    pub fn load(&self) -> Result<PairedDataset> {
        load_dataset(&self.visual, &self.tactile, &self.labels)
    }
}

/// The complete, resolved input of one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub dataset: DatasetSource,
    pub missing_rate: f64,
    pub seed: u64,
    pub config: gpvtf::trainer::TrainConfig,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let m: RunManifest = serde_json::from_str(&text)
            .map_err(|e| Error::param(format!("{}: {e}", path.display())))?;
        if m.format != RUN_FORMAT {
            return Err(Error::param(format!(
                "{}: unsupported manifest format {:?}",
                path.display(),
                m.format
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::param(format!("manifest serialization: {e}")))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

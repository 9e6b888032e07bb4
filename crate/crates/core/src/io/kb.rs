//! On-disk run history: numbered snapshot files plus a JSON manifest.
//!
//! The manifest carries no wall-clock data, so two runs of the same
//! scenario produce byte-identical directories.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::scenario::Scenario;
use super::snapshot;
use crate::sph::StepDiagnostics;
use crate::{Error, Result, Snapshot};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FORMAT: &str = "sphr-kb/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub index: usize,
    pub step: u64,
    pub time: f64,
    pub file: String,
    /// CRC32 of the file body, hex.
    pub checksum: String,
    pub diagnostics: StepDiagnostics,
}

/// End-of-run conservation and range summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps_completed: u64,
    pub final_time: f64,
    pub initial_momentum: [f64; 3],
    pub final_momentum: [f64; 3],
    /// `|P_end − P_0|`.
    pub momentum_drift: f64,
    /// `Σ m |v|` at step 0.
    pub momentum_scale: f64,
    /// Drift over scale; absent when the initial state is at rest.
    pub relative_momentum_drift: Option<f64>,
    pub min_density: f64,
    pub max_density: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub step: u64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub code_version: String,
    pub scenario: Scenario,
    pub snapshots: Vec<SnapshotEntry>,
    #[serde(default)]
    pub summary: Option<RunSummary>,
    #[serde(default)]
    pub failure: Option<Failure>,
}

#[derive(Debug)]
pub struct KnowledgeBase {
    dir: PathBuf,
    manifest: Manifest,
}

impl KnowledgeBase {
    /// Starts a new knowledge base in `dir`, creating it if needed. Refuses
    /// a directory that already holds a manifest.
    pub fn create(dir: impl AsRef<Path>, scenario: &Scenario) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let manifest_path = dir.join(MANIFEST_FILE);
        if manifest_path.exists() {
            return Err(Error::InvalidArgument(format!(
                "{} already holds a knowledge base",
                dir.display()
            )));
        }
        let kb = Self {
            dir,
            manifest: Manifest {
                format: FORMAT.into(),
                code_version: env!("CARGO_PKG_VERSION").into(),
                scenario: scenario.clone(),
                snapshots: Vec::new(),
                summary: None,
                failure: None,
            },
        };
        kb.save_manifest()?;
        Ok(kb)
    }

    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::Snapshot(format!("{}: {e}", path.display())))?;
        if manifest.format != FORMAT {
            return Err(Error::Snapshot(format!("unsupported manifest format `{}`", manifest.format)));
        }
        Ok(Self { dir, manifest })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn len(&self) -> usize {
        self.manifest.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.snapshots.is_empty()
    }

    pub fn write_snapshot(&mut self, snap: &Snapshot) -> Result<usize> {
        let diag = StepDiagnostics::measure(&snap.table, snap.step, snap.time, None);
        self.write_snapshot_with(snap, diag)
    }

    /// Appends `snap` with caller-supplied diagnostics. Snapshots must have
    /// strictly increasing `(step, time)`.
    pub fn write_snapshot_with(&mut self, snap: &Snapshot, diagnostics: StepDiagnostics) -> Result<usize> {
        if let Some(last) = self.manifest.snapshots.last() {
            if !(snap.step > last.step && snap.time > last.time) {
                return Err(Error::InvalidArgument(format!(
                    "snapshot (step {}, t {}) does not follow (step {}, t {})",
                    snap.step, snap.time, last.step, last.time
                )));
            }
        }
        let index = self.len();
        let file = format!("snapshot_{index:06}.sphr");
        let bytes = snapshot::encode(snap);
        let crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
        let path = self.dir.join(&file);
        std::fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        self.manifest.snapshots.push(SnapshotEntry {
            index,
            step: snap.step,
            time: snap.time,
            file,
            checksum: format!("{crc:08x}"),
            diagnostics,
        });
        self.save_manifest()?;
        Ok(index)
    }

    pub fn read_snapshot(&self, index: usize) -> Result<Snapshot> {
        let entry = self.manifest.snapshots.get(index).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "snapshot index {index} out of range (knowledge base holds {})",
                self.len()
            ))
        })?;
        let snap = snapshot::read_file(&self.dir.join(&entry.file))?;
        if snap.step != entry.step || snap.time.to_bits() != entry.time.to_bits() {
            return Err(Error::Snapshot(format!(
                "{} holds step {}, manifest says {}",
                entry.file, snap.step, entry.step
            )));
        }
        Ok(snap)
    }

    pub fn set_summary(&mut self, summary: RunSummary) -> Result<()> {
        self.manifest.summary = Some(summary);
        self.save_manifest()
    }

    pub fn record_failure(&mut self, step: u64, message: impl Into<String>) -> Result<()> {
        self.manifest.failure = Some(Failure {
            step,
            message: message.into(),
        });
        self.save_manifest()
    }

    fn save_manifest(&self) -> Result<()> {
        let path = self.dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serialises");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

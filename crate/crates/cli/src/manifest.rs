//! Run manifests: everything needed to repeat a recovery bit for bit.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tidt_core::experiments::MetricScope;
use tidt_core::sampling::PatternKind;
use tidt_core::{RecoveryReport, SolverConfig};

pub const MANIFEST_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// An input file and its content hash.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileRef {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileRef {
    pub fn of(path: &Path, bytes: &[u8]) -> Self {
        Self { path: path.to_path_buf(), sha256: sha256_hex(bytes) }
    }
}

/// How a mask file was generated, as recorded by `mask gen`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskProvenance {
    pub pattern: PatternKind,
    pub shape: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Minimum temporal sampling rate of the generated mask.
    pub rho: f64,
}

/// Sidecar path holding the provenance of a generated mask.
pub fn provenance_path(mask: &Path) -> PathBuf {
    let mut name = mask.as_os_str().to_os_string();
    name.push(".json");
    PathBuf::from(name)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskRef {
    #[serde(flatten)]
    pub file: FileRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<MaskProvenance>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub tool_version: String,
    pub solver: SolverConfig,
    pub input: FileRef,
    pub mask: MaskRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<FileRef>,
    pub scope: MetricScope,
    pub output: FileRef,
    pub report: RecoveryReport,
}

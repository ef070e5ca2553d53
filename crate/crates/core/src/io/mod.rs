//! File formats: keypoint, match and distance tables, ground truth, PGM
//! images and the per-pair manifest.

mod pgm;
mod tables;
mod truth;

pub use pgm::{read_pgm, write_pgm, Gray};
pub use tables::{
    read_distances, read_keypoints, read_matches, write_distances_binary, write_distances_csv,
    write_keypoints, write_matches, DISTANCE_MAGIC, DISTANCE_VERSION,
};
pub use truth::{read_ground_truth, write_ground_truth, CameraFile, GroundTruthFile};

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keypoint::PairContext;

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
}

/// Pretty JSON with a trailing newline, written atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::invalid(format!("cannot serialise {}: {e}", path.display())))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Description of one image pair on disk. Paths are relative to the
/// directory holding the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairFile {
    pub width1: f64,
    pub height1: f64,
    pub width2: f64,
    pub height2: f64,
    pub keypoints1: PathBuf,
    pub keypoints2: PathBuf,
    pub distances: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
}

impl PairFile {
    pub fn resolve(&self, base: &Path, rel: &Path) -> PathBuf {
        if rel.is_absolute() {
            rel.to_path_buf()
        } else {
            base.join(rel)
        }
    }

    /// Loads keypoints and image sizes.
    pub fn load_context(&self, base: &Path) -> Result<PairContext> {
        let k1 = read_keypoints(&self.resolve(base, &self.keypoints1))?;
        let k2 = read_keypoints(&self.resolve(base, &self.keypoints2))?;
        PairContext::new(k1, k2, (self.width1, self.height1), (self.width2, self.height2))
    }
}

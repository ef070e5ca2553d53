use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{Camera, DepthGroundTruth, DepthMap, GroundTruth, Mask};
use crate::model::{FundamentalMatrix, Homography};

use super::{pgm::Gray, read_json, read_pgm, write_json, write_pgm};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraFile {
    pub k: [f64; 9],
    pub r: [f64; 9],
    pub t: [f64; 3],
}

/// On-disk ground truth. Image paths are relative to the JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
#[allow(clippy::large_enum_variant)]
pub enum GroundTruthFile {
    Homography {
        h: [f64; 9],
    },
    Fundamental {
        f: [f64; 9],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mask1: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mask2: Option<PathBuf>,
    },
    Depth {
        depth1: PathBuf,
        depth2: PathBuf,
        /// Depth units per stored grey level.
        #[serde(default = "unit")]
        depth_scale: f64,
        camera1: CameraFile,
        camera2: CameraFile,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        f: Option<[f64; 9]>,
    },
}

fn unit() -> f64 {
    1.0
}

fn camera(c: &CameraFile) -> Result<Camera> {
    Camera::new(c.k, c.r, c.t)
}

fn camera_file(c: &Camera) -> CameraFile {
    let mut k = [0.0; 9];
    let mut r = [0.0; 9];
    for n in 0..9 {
        k[n] = c.k[(n / 3, n % 3)];
        r[n] = c.r[(n / 3, n % 3)];
    }
    CameraFile {
        k,
        r,
        t: [c.t.x, c.t.y, c.t.z],
    }
}

fn load_mask(path: &Path) -> Result<Mask> {
    let g = read_pgm(path)?;
    Mask::new(g.width, g.height, g.data.iter().map(|&v| v != 0).collect())
}

fn load_depth(path: &Path, scale: f64) -> Result<DepthMap> {
    let g = read_pgm(path)?;
    DepthMap::new(g.width, g.height, g.data.iter().map(|&v| v as f64 * scale).collect())
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    let file: GroundTruthFile = read_json(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let at = |p: &Path| base.join(p);
    let with_path = |e: Error| match e {
        e @ (Error::Io { .. } | Error::Parse { .. }) => e,
        other => Error::parse(path, other.to_string()),
    };
    let gt = match file {
        GroundTruthFile::Homography { h } => GroundTruth::Homography(Homography::new(h).map_err(with_path)?),
        GroundTruthFile::Fundamental { f, mask1, mask2 } => {
            let masks = match (mask1, mask2) {
                (Some(a), Some(b)) => Some((load_mask(&at(&a))?, load_mask(&at(&b))?)),
                (None, None) => None,
                _ => return Err(Error::parse(path, "masks must be given for both images")),
            };
            GroundTruth::Fundamental {
                f: FundamentalMatrix::new(f).map_err(with_path)?,
                masks,
            }
        }
        GroundTruthFile::Depth {
            depth1,
            depth2,
            depth_scale,
            camera1,
            camera2,
            f,
        } => {
            if !(depth_scale > 0.0 && depth_scale.is_finite()) {
                return Err(Error::parse(path, "depth_scale must be positive"));
            }
            GroundTruth::Depth(Box::new(DepthGroundTruth {
                depth1: load_depth(&at(&depth1), depth_scale)?,
                depth2: load_depth(&at(&depth2), depth_scale)?,
                camera1: camera(&camera1).map_err(with_path)?,
                camera2: camera(&camera2).map_err(with_path)?,
                fundamental: f.map(FundamentalMatrix::new).transpose().map_err(with_path)?,
            }))
        }
    };
    Ok(gt)
}

/// Writes `gt` as JSON at `path`. Masks and depth maps go to 16-bit PGM
/// files beside it, named after the JSON stem; depth is quantised to
/// 65535 levels of the largest value.
pub fn write_ground_truth(path: &Path, gt: &GroundTruth) -> Result<()> {
    let base = path.parent().unwrap_or(Path::new("."));
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::invalid(format!("bad ground truth path {}", path.display())))?;
    let side = |suffix: &str| PathBuf::from(format!("{stem}_{suffix}.pgm"));
    let file = match gt {
        GroundTruth::Homography(h) => GroundTruthFile::Homography { h: h.to_array() },
        GroundTruth::Fundamental { f, masks } => {
            let (mut mask1, mut mask2) = (None, None);
            if let Some((a, b)) = masks {
                for (mask, name, slot) in [(a, "mask1", &mut mask1), (b, "mask2", &mut mask2)] {
                    let rel = side(name);
                    let g = Gray {
                        width: mask.width,
                        height: mask.height,
                        data: mask.data.iter().map(|&v| if v { 255 } else { 0 }).collect(),
                    };
                    write_pgm(&base.join(&rel), &g)?;
                    *slot = Some(rel);
                }
            }
            GroundTruthFile::Fundamental {
                f: f.to_array(),
                mask1,
                mask2,
            }
        }
        GroundTruth::Depth(d) => {
            let peak = d.depth1.values.iter().chain(&d.depth2.values).fold(0.0f64, |a, &b| a.max(b));
            let scale = if peak > 0.0 { peak / 65535.0 } else { 1.0 };
            for (map, name) in [(&d.depth1, "depth1"), (&d.depth2, "depth2")] {
                let g = Gray {
                    width: map.width,
                    height: map.height,
                    data: map.values.iter().map(|v| (v / scale).round() as u16).collect(),
                };
                write_pgm(&base.join(side(name)), &g)?;
            }
            GroundTruthFile::Depth {
                depth1: side("depth1"),
                depth2: side("depth2"),
                depth_scale: scale,
                camera1: camera_file(&d.camera1),
                camera2: camera_file(&d.camera2),
                f: d.fundamental.as_ref().map(|f| f.to_array()),
            }
        }
    };
    write_json(path, &file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homography_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gt.json");
        let h = Homography::new([1.0, 0.1, 5.0, -0.05, 0.9, 3.0, 1e-4, 0.0, 1.0]).unwrap();
        write_ground_truth(&path, &GroundTruth::Homography(h.clone())).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"type\": \"homography\""));
        assert_eq!(read_ground_truth(&path).unwrap(), GroundTruth::Homography(h));
    }

    #[test]
    fn fundamental_with_masks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gt.json");
        let f = FundamentalMatrix::new([0.0, -1e-3, 0.2, 1e-3, 0.0, -0.3, -0.2, 0.3, 0.0]).unwrap();
        let m1 = Mask::new(2, 2, vec![true, false, false, true]).unwrap();
        let m2 = Mask::new(3, 1, vec![false, true, true]).unwrap();
        let gt = GroundTruth::Fundamental {
            f,
            masks: Some((m1, m2)),
        };
        write_ground_truth(&path, &gt).unwrap();
        assert!(dir.path().join("gt_mask1.pgm").exists());
        assert_eq!(read_ground_truth(&path).unwrap(), gt);
    }

    #[test]
    fn depth_round_trip_within_quantisation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.json");
        let id = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let k = [500.0, 0.0, 2.0, 0.0, 500.0, 1.0, 0.0, 0.0, 1.0];
        let d = DepthGroundTruth {
            depth1: DepthMap::new(2, 1, vec![0.0, 12.5]).unwrap(),
            depth2: DepthMap::new(1, 2, vec![3.3, 7.0]).unwrap(),
            camera1: Camera::new(k, id, [0.0; 3]).unwrap(),
            camera2: Camera::new(k, id, [-1.0, 0.0, 0.0]).unwrap(),
            fundamental: None,
        };
        write_ground_truth(&path, &GroundTruth::Depth(Box::new(d.clone()))).unwrap();
        let GroundTruth::Depth(back) = read_ground_truth(&path).unwrap() else {
            panic!("wrong variant");
        };
        assert_eq!(back.camera1, d.camera1);
        assert_eq!(back.camera2, d.camera2);
        assert_eq!(back.depth1.values[0], 0.0);
        for (a, b) in back.depth1.values.iter().chain(&back.depth2.values).zip(d.depth1.values.iter().chain(&d.depth2.values)) {
            assert!((a - b).abs() <= 12.5 / 65535.0);
        }
    }

    #[test]
    fn rejects_half_masks_and_bad_matrix() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gt.json");
        std::fs::write(&path, r#"{"type":"fundamental","f":[0,0,0,0,0,0,0,0,1],"mask1":"a.pgm"}"#).unwrap();
        assert!(matches!(read_ground_truth(&path), Err(Error::Parse { .. })));
        std::fs::write(&path, r#"{"type":"homography","h":[0,0,0,0,0,0,0,0,0]}"#).unwrap();
        assert!(matches!(read_ground_truth(&path), Err(Error::Parse { .. })));
        std::fs::write(&path, r#"{"type":"affine"}"#).unwrap();
        assert!(matches!(read_ground_truth(&path), Err(Error::Parse { .. })));
    }
}

//! Synthetic image pairs with planted correspondences.
//!
//! Every keypoint of the first image is planted against exactly one
//! keypoint of the second. Inliers follow the scene geometry up to uniform
//! noise and get low descriptor distances; outliers are placed uniformly
//! and get mid-range distances; every other pairing is far in descriptor
//! space. For planar scenes keypoints are spread so that no pairing other
//! than a planted inlier comes within [`MIN_SEPARATION`] pixels of the true
//! transfer, which makes the planted labels agree with geometric ground
//! truth at the default tolerances.

use std::str::FromStr;

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};
use crate::eval::{classify, Camera, GroundTruth, Method, Tolerances};
use crate::geometry::Point;
use crate::keypoint::{Ellipse, Keypoint, PairContext};
use crate::matches::Match;
use crate::model::{FundamentalMatrix, Homography};

/// Minimum transfer distance of any non-inlier pairing in planar scenes.
pub const MIN_SEPARATION: f64 = 25.0;

const MAX_ATTEMPTS: usize = 10_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scene {
    #[default]
    Planar,
    TwoView,
}

impl FromStr for Scene {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "planar" => Ok(Scene::Planar),
            "two_view" | "two-view" => Ok(Scene::TwoView),
            other => Err(Error::invalid(format!("unknown scene '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub scene: Scene,
    pub n_inliers: usize,
    pub n_outliers: usize,
    /// Half-width of the uniform per-coordinate noise, pixels.
    pub noise_px: f64,
    pub seed: u64,
    pub width: f64,
    pub height: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            scene: Scene::Planar,
            n_inliers: 200,
            n_outliers: 200,
            noise_px: 1.0,
            seed: 0,
            width: 1600.0,
            height: 1200.0,
        }
    }
}

/// One planted correspondence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedMatch {
    pub i: usize,
    pub j: usize,
    /// Generated from the scene geometry.
    pub inlier: bool,
    /// Label under method D of the generated ground truth.
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: SynthConfig,
    pub matches: Vec<PlantedMatch>,
}

impl Manifest {
    pub fn planted(&self) -> impl Iterator<Item = Match> + '_ {
        self.matches.iter().map(|p| Match::new(p.i, p.j, 0.0))
    }

    pub fn correct_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.matches.iter().filter(|p| p.correct).map(|p| (p.i, p.j))
    }
}

#[derive(Clone, Debug)]
pub struct SynthPair {
    pub ctx: PairContext,
    pub distances: DistanceMatrix,
    pub ground_truth: GroundTruth,
    pub manifest: Manifest,
}

pub fn synth(cfg: &SynthConfig) -> Result<SynthPair> {
    let n = cfg.n_inliers + cfg.n_outliers;
    if n == 0 {
        return Err(Error::invalid("need at least one planted match"));
    }
    if !(cfg.noise_px >= 0.0 && cfg.noise_px.is_finite()) {
        return Err(Error::invalid("noise must be non-negative"));
    }
    if !(cfg.width > 0.0 && cfg.height > 0.0 && cfg.width.is_finite() && cfg.height.is_finite()) {
        return Err(Error::invalid("image dimensions must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (kp1, kp2, gt) = match cfg.scene {
        Scene::Planar => planar(cfg, &mut rng)?,
        Scene::TwoView => two_view(cfg, &mut rng)?,
    };

    // image-2 order is shuffled so planted pairs are not the diagonal
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut keypoints2 = vec![Keypoint::new(0.0, 0.0); n];
    for (k, kp) in kp2.into_iter().enumerate() {
        keypoints2[perm[k]] = kp;
    }

    let mut values = vec![0.0; n * n];
    for v in values.iter_mut() {
        *v = rng.gen_range(0.8..1.0);
    }
    for i in 0..n {
        values[i * n + perm[i]] = if i < cfg.n_inliers {
            rng.gen_range(0.1..0.5)
        } else {
            rng.gen_range(0.3..0.7)
        };
    }
    let distances = DistanceMatrix::new(n, n, values)?;
    let ctx = PairContext::new(kp1, keypoints2, (cfg.width, cfg.height), (cfg.width, cfg.height))?;

    let tol = Tolerances::default();
    let matches = (0..n)
        .map(|i| {
            let m = Match::new(i, perm[i], 0.0);
            Ok(PlantedMatch {
                i,
                j: perm[i],
                inlier: i < cfg.n_inliers,
                correct: classify(&gt, &m, &ctx, Method::D, &tol)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthPair {
        ctx,
        distances,
        ground_truth: gt,
        manifest: Manifest {
            config: cfg.clone(),
            matches,
        },
    })
}

fn random_homography(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Homography> {
    let theta: f64 = rng.gen_range(-0.15..0.15);
    let s: f64 = rng.gen_range(0.85..1.15);
    let g = rng.gen_range(-4e-5..4e-5) * 1600.0 / cfg.width;
    let h = rng.gen_range(-4e-5..4e-5) * 1600.0 / cfg.width;
    let (cx, cy) = (cfg.width / 2.0, cfg.height / 2.0);
    let dx = rng.gen_range(-0.03..0.03) * cfg.width;
    let dy = rng.gen_range(-0.03..0.03) * cfg.height;
    let to_center = Matrix3::new(1.0, 0.0, -cx, 0.0, 1.0, -cy, 0.0, 0.0, 1.0);
    let back = Matrix3::new(1.0, 0.0, cx + dx, 0.0, 1.0, cy + dy, 0.0, 0.0, 1.0);
    let core = Matrix3::new(
        s * theta.cos(),
        -s * theta.sin(),
        0.0,
        s * theta.sin(),
        s * theta.cos(),
        0.0,
        g,
        h,
        1.0,
    );
    Homography::from_matrix(back * core * to_center)
}

fn uniform_point(rng: &mut ChaCha8Rng, w: f64, h: f64, margin: f64) -> Point {
    Point::new(rng.gen_range(margin..w - margin), rng.gen_range(margin..h - margin))
}

fn circle(rng: &mut ChaCha8Rng) -> Result<Ellipse> {
    Ellipse::circle(rng.gen_range(3.0..12.0))
}

fn noisy(rng: &mut ChaCha8Rng, p: Point, noise: f64) -> Point {
    if noise == 0.0 {
        return p;
    }
    Point::new(p.x + rng.gen_range(-noise..=noise), p.y + rng.gen_range(-noise..=noise))
}

fn far_from_all(p: Point, others: &[Point]) -> bool {
    others.iter().all(|q| q.distance(&p) >= MIN_SEPARATION)
}

type Generated = (Vec<Keypoint>, Vec<Keypoint>, GroundTruth);

fn planar(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Generated> {
    let h = random_homography(cfg, rng)?;
    let margin = 0.03 * cfg.width.min(cfg.height);
    let inside2 = |p: Point| p.x >= margin && p.x <= cfg.width - margin && p.y >= margin && p.y <= cfg.height - margin;
    // true transfers of image-1 keypoints and image-2 keypoints so far
    let mut projected: Vec<Point> = Vec::new();
    let mut placed: Vec<Point> = Vec::new();
    let mut kp1 = Vec::new();
    let mut kp2 = Vec::new();

    for k in 0..cfg.n_inliers + cfg.n_outliers {
        let inlier = k < cfg.n_inliers;
        let mut done = false;
        for _ in 0..MAX_ATTEMPTS {
            let p1 = uniform_point(rng, cfg.width, cfg.height, margin);
            let Some(t) = h.apply(p1) else { continue };
            let p2 = if inlier {
                if !inside2(t) {
                    continue;
                }
                noisy(rng, t, cfg.noise_px)
            } else {
                let p2 = uniform_point(rng, cfg.width, cfg.height, margin);
                if t.distance(&p2) < MIN_SEPARATION {
                    continue;
                }
                p2
            };
            if !far_from_all(t, &placed) || !far_from_all(p2, &projected) {
                continue;
            }
            let e1 = circle(rng)?;
            let e2 = if inlier {
                let j = h.jacobian(p1).ok_or_else(|| Error::degenerate("homography diverges"))?;
                e1.mapped(&j)?
            } else {
                circle(rng)?
            };
            projected.push(t);
            placed.push(p2);
            kp1.push(Keypoint::new(p1.x, p1.y).with_ellipse(e1));
            kp2.push(Keypoint::new(p2.x, p2.y).with_ellipse(e2));
            done = true;
            break;
        }
        if !done {
            return Err(Error::invalid(format!(
                "cannot place {} keypoints {} px apart in a {}x{} image",
                cfg.n_inliers + cfg.n_outliers,
                MIN_SEPARATION,
                cfg.width,
                cfg.height
            )));
        }
    }
    Ok((kp1, kp2, GroundTruth::Homography(h)))
}

fn two_view(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Generated> {
    let f = cfg.width.max(cfg.height);
    let k = [f, 0.0, cfg.width / 2.0, 0.0, f, cfg.height / 2.0, 0.0, 0.0, 1.0];
    let identity = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    let cam1 = Camera::new(k, identity, [0.0; 3])?;
    let yaw: f64 = rng.gen_range(0.05..0.2) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let rot = Rotation3::from_euler_angles(rng.gen_range(-0.03..0.03), yaw, rng.gen_range(-0.03..0.03));
    let mut r = [0.0; 9];
    for (idx, v) in r.iter_mut().enumerate() {
        *v = rot.matrix()[(idx / 3, idx % 3)];
    }
    let baseline = Vector3::new(-yaw.signum() * rng.gen_range(0.6..1.0), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
    let cam2 = Camera::new(k, r, [baseline.x, baseline.y, baseline.z])?;
    let fm = crate::eval::fundamental_from_cameras(&cam1, &cam2)?;

    let margin = 0.03 * cfg.width.min(cfg.height);
    let inside = |p: Point| p.x >= margin && p.x <= cfg.width - margin && p.y >= margin && p.y <= cfg.height - margin;
    let mut kp1 = Vec::new();
    let mut kp2 = Vec::new();
    for idx in 0..cfg.n_inliers + cfg.n_outliers {
        let inlier = idx < cfg.n_inliers;
        let mut done = false;
        for _ in 0..MAX_ATTEMPTS {
            let p1 = uniform_point(rng, cfg.width, cfg.height, margin);
            let p2 = if inlier {
                let depth = rng.gen_range(4.0..8.0);
                let world = cam1
                    .back_project(p1, depth)
                    .ok_or_else(|| Error::degenerate("camera is singular"))?;
                match cam2.project(&world) {
                    Some(q) if inside(q) => noisy(rng, q, cfg.noise_px),
                    _ => continue,
                }
            } else {
                uniform_point(rng, cfg.width, cfg.height, margin)
            };
            kp1.push(Keypoint::new(p1.x, p1.y).with_ellipse(circle(rng)?));
            kp2.push(Keypoint::new(p2.x, p2.y).with_ellipse(circle(rng)?));
            done = true;
            break;
        }
        if !done {
            return Err(Error::degenerate("cameras do not share a field of view"));
        }
    }
    Ok((kp1, kp2, GroundTruth::Fundamental { f: fm, masks: None }))
}

/// The exact fundamental matrix of a two-view scene, if any.
pub fn fundamental_of(gt: &GroundTruth) -> Option<&FundamentalMatrix> {
    match gt {
        GroundTruth::Fundamental { f, .. } => Some(f),
        _ => None,
    }
}

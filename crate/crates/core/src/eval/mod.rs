//! Ground-truth classification of matches and benchmark metrics.

mod metrics;

pub use metrics::{
    aggregate, all_pairs_correct_count, average_precision, average_precision_11pt, f_beta, mean_average_precision,
    normalized_correct_count, score_labels, score_pair, Aggregate, ApMode, EvalReport,
};

use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::keypoint::{Ellipse, PairContext};
use crate::matches::Match;
use crate::model::{overlap_error, FundamentalMatrix, Homography};

/// Patch magnification used by the overlap check of method C.
pub const METHOD_C_MAGNIFY: f64 = 2.0;

/// Match classification rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Epipolar (or transfer) distance within the tight method-A tolerance.
    A,
    /// Distance cap plus patch overlap error (homography only).
    C,
    /// Transfer or epipolar distance within 15 px, depth reprojection for
    /// depth ground truth.
    D,
    /// Depth-based reprojection with epipolar fallback.
    Depth,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Method::A),
            "c" => Ok(Method::C),
            "d" => Ok(Method::D),
            "depth" => Ok(Method::Depth),
            other => Err(Error::invalid(format!("unknown evaluation method '{other}'"))),
        }
    }
}

/// Distance and overlap limits of the classification rules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub reprojection_px: f64,
    pub epipolar_px: f64,
    pub method_a_px: f64,
    pub method_c_px: f64,
    pub method_c_overlap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            reprojection_px: 15.0,
            epipolar_px: 15.0,
            method_a_px: 7.0,
            method_c_px: 30.0,
            method_c_overlap: 0.5,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let px = [self.reprojection_px, self.epipolar_px, self.method_a_px, self.method_c_px];
        if px.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("pixel tolerances must be positive"));
        }
        if !(self.method_c_overlap > 0.0 && self.method_c_overlap < 1.0) {
            return Err(Error::invalid("overlap tolerance must be in (0, 1)"));
        }
        Ok(())
    }
}

/// Binary per-pixel region; nonzero pixels are admissible.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(Mask { width, height, data })
    }

    /// Whether the pixel under `p` is admissible; points off the mask are not.
    pub fn contains(&self, p: Point) -> bool {
        let (x, y) = (p.x.floor(), p.y.floor());
        if x < 0.0 || y < 0.0 || x >= self.width as f64 || y >= self.height as f64 {
            return false;
        }
        self.data[y as usize * self.width + x as usize]
    }
}

/// Per-pixel depth along the optical axis; zero marks missing depth.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("depth values must be finite and non-negative"));
        }
        Ok(DepthMap { width, height, values })
    }

    /// Depth at the pixel nearest to `p`, if present.
    pub fn sample(&self, p: Point) -> Option<f64> {
        let (x, y) = ((p.x + 0.5).floor(), (p.y + 0.5).floor());
        if x < 0.0 || y < 0.0 || x >= self.width as f64 || y >= self.height as f64 {
            return None;
        }
        let d = self.values[y as usize * self.width + x as usize];
        (d > 0.0).then_some(d)
    }
}

/// Pinhole camera, `x ~ K (R X + t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Camera {
    pub k: Matrix3<f64>,
    pub r: Matrix3<f64>,
    pub t: Vector3<f64>,
}

impl Camera {
    pub fn new(k: [f64; 9], r: [f64; 9], t: [f64; 3]) -> Result<Self> {
        let all = k.iter().chain(r.iter()).chain(t.iter());
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::invalid("camera parameters must be finite"));
        }
        let k = Matrix3::from_row_slice(&k);
        if k.determinant().abs() < 1e-12 {
            return Err(Error::invalid("camera intrinsics are singular"));
        }
        Ok(Camera {
            k,
            r: Matrix3::from_row_slice(&r),
            t: Vector3::new(t[0], t[1], t[2]),
        })
    }

    pub fn project(&self, world: &Vector3<f64>) -> Option<Point> {
        let c = self.k * (self.r * world + self.t);
        (c.z > 0.0).then(|| Point::new(c.x / c.z, c.y / c.z))
    }

    /// World point seen at pixel `p` with depth `depth`.
    pub fn back_project(&self, p: Point, depth: f64) -> Option<Vector3<f64>> {
        let ray = self.k.try_inverse()? * Vector3::new(p.x, p.y, 1.0);
        let cam = ray * (depth / ray.z);
        Some(self.r.transpose() * (cam - self.t))
    }
}

/// Fundamental matrix of two calibrated views.
pub fn fundamental_from_cameras(c1: &Camera, c2: &Camera) -> Result<FundamentalMatrix> {
    let r = c2.r * c1.r.transpose();
    let t = c2.t - r * c1.t;
    let tx = Matrix3::new(0.0, -t.z, t.y, t.z, 0.0, -t.x, -t.y, t.x, 0.0);
    let k1 = c1.k.try_inverse().ok_or_else(|| Error::invalid("singular intrinsics"))?;
    let k2 = c2.k.try_inverse().ok_or_else(|| Error::invalid("singular intrinsics"))?;
    let f = k2.transpose() * tx * r * k1;
    let mut values = [0.0; 9];
    for (k, v) in values.iter_mut().enumerate() {
        *v = f[(k / 3, k % 3)];
    }
    FundamentalMatrix::new(values)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DepthGroundTruth {
    pub depth1: DepthMap,
    pub depth2: DepthMap,
    pub camera1: Camera,
    pub camera2: Camera,
    /// Used when neither keypoint has depth; derived from the cameras if absent.
    pub fundamental: Option<FundamentalMatrix>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum GroundTruth {
    Homography(Homography),
    Fundamental {
        f: FundamentalMatrix,
        masks: Option<(Mask, Mask)>,
    },
    Depth(Box<DepthGroundTruth>),
}

/// Whether `m` is a correct match under `gt` and `method`.
pub fn classify(
    gt: &GroundTruth,
    m: &Match,
    ctx: &PairContext,
    method: Method,
    tol: &Tolerances,
) -> Result<bool> {
    let (p1, p2) = crate::model::match_points(m, ctx)?;
    match (gt, method) {
        (GroundTruth::Homography(h), Method::A) => {
            Ok(h.symmetric_transfer_error(p1, p2) <= tol.method_a_px)
        }
        (GroundTruth::Homography(h), Method::D) => {
            Ok(h.symmetric_transfer_error(p1, p2) <= tol.reprojection_px)
        }
        (GroundTruth::Homography(h), Method::C) => {
            if h.symmetric_transfer_error(p1, p2) > tol.method_c_px {
                return Ok(false);
            }
            let (e1, e2) = match (ctx.keypoints1[m.i].ellipse, ctx.keypoints2[m.j].ellipse) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(Error::invalid("method C requires elliptical patches")),
            };
            Ok(transferred_overlap(h, p1, &e1, p2, &e2)? <= tol.method_c_overlap)
        }
        (GroundTruth::Fundamental { f, .. }, Method::A) => {
            Ok(f.epipolar_distance(p1, p2) <= tol.method_a_px)
        }
        (GroundTruth::Fundamental { f, masks }, Method::D) => {
            if f.epipolar_distance(p1, p2) > tol.epipolar_px {
                return Ok(false);
            }
            Ok(masks
                .as_ref()
                .map_or(true, |(a, b)| a.contains(p1) && b.contains(p2)))
        }
        (GroundTruth::Depth(d), Method::Depth | Method::D) => depth_check(d, p1, p2, tol),
        (GroundTruth::Depth(d), Method::A) => Ok(depth_fundamental(d)?.epipolar_distance(p1, p2) <= tol.method_a_px),
        (GroundTruth::Homography(_), Method::Depth) | (GroundTruth::Fundamental { .. }, Method::Depth) => {
            Err(Error::Unsupported("depth method needs depth ground truth".into()))
        }
        (_, Method::C) => Err(Error::Unsupported(
            "method C is defined for homography ground truth only".into(),
        )),
    }
}

fn depth_fundamental(d: &DepthGroundTruth) -> Result<FundamentalMatrix> {
    match &d.fundamental {
        Some(f) => Ok(f.clone()),
        None => fundamental_from_cameras(&d.camera1, &d.camera2),
    }
}

fn depth_check(d: &DepthGroundTruth, p1: Point, p2: Point, tol: &Tolerances) -> Result<bool> {
    let forward = d
        .depth1
        .sample(p1)
        .and_then(|z| d.camera1.back_project(p1, z))
        .map(|x| d.camera2.project(&x).map_or(f64::INFINITY, |q| q.distance(&p2)));
    let backward = d
        .depth2
        .sample(p2)
        .and_then(|z| d.camera2.back_project(p2, z))
        .map(|x| d.camera1.project(&x).map_or(f64::INFINITY, |q| q.distance(&p1)));
    match (forward, backward) {
        (None, None) => Ok(depth_fundamental(d)?.epipolar_distance(p1, p2) <= tol.epipolar_px),
        (a, b) => Ok(a.is_some_and(|e| e < tol.reprojection_px) || b.is_some_and(|e| e < tol.reprojection_px)),
    }
}

/// Larger of the two overlap errors obtained by mapping each patch into
/// the other image with the local affine approximation of `h`.
fn transferred_overlap(h: &Homography, p1: Point, e1: &Ellipse, p2: Point, e2: &Ellipse) -> Result<f64> {
    let inv = h.inverse();
    let forward = match (h.apply(p1), h.jacobian(p1)) {
        (Some(c), Some(j)) => overlap_error(c, &e1.mapped(&j)?, p2, e2, METHOD_C_MAGNIFY)?,
        _ => 1.0,
    };
    let backward = match (inv.apply(p2), inv.jacobian(p2)) {
        (Some(c), Some(j)) => overlap_error(c, &e2.mapped(&j)?, p1, e1, METHOD_C_MAGNIFY)?,
        _ => 1.0,
    };
    Ok(forward.max(backward))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keypoint::Keypoint;
    use nalgebra::{Matrix2, Rotation3};

    fn pair(p1: (f64, f64), p2: (f64, f64)) -> PairContext {
        PairContext::new(
            vec![Keypoint::new(p1.0, p1.1)],
            vec![Keypoint::new(p2.0, p2.1)],
            (100.0, 100.0),
            (100.0, 100.0),
        )
        .unwrap()
    }

    #[test]
    fn identity_homography_method_d() {
        let gt = GroundTruth::Homography(Homography::identity());
        let tol = Tolerances::default();
        let m = Match::new(0, 0, 0.0);
        assert!(classify(&gt, &m, &pair((10.0, 10.0), (10.0, 10.0)), Method::D, &tol).unwrap());
        assert!(!classify(&gt, &m, &pair((10.0, 10.0), (30.0, 10.0)), Method::D, &tol).unwrap());
        // method A is tighter
        assert!(!classify(&gt, &m, &pair((10.0, 10.0), (20.0, 10.0)), Method::A, &tol).unwrap());
        assert!(classify(&gt, &m, &pair((10.0, 10.0), (20.0, 10.0)), Method::D, &tol).unwrap());
    }

    #[test]
    fn method_c_needs_overlap() {
        let gt = GroundTruth::Homography(Homography::identity());
        let tol = Tolerances::default();
        let m = Match::new(0, 0, 0.0);
        let c = Ellipse::circle(4.0).unwrap();
        let big = Ellipse::circle(12.0).unwrap();
        let ctx = |e2: Ellipse, dx: f64| {
            PairContext::new(
                vec![Keypoint::new(50.0, 50.0).with_ellipse(c)],
                vec![Keypoint::new(50.0 + dx, 50.0).with_ellipse(e2)],
                (100.0, 100.0),
                (100.0, 100.0),
            )
            .unwrap()
        };
        assert!(classify(&gt, &m, &ctx(c, 1.0), Method::C, &tol).unwrap());
        // concentric but 9x the area: overlap error 8/9
        assert!(!classify(&gt, &m, &ctx(big, 0.0), Method::C, &tol).unwrap());
        assert!(classify(&gt, &m, &pair((1.0, 1.0), (1.0, 1.0)), Method::C, &tol).is_err());
        let f = GroundTruth::Fundamental {
            f: FundamentalMatrix::new([0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0]).unwrap(),
            masks: None,
        };
        assert!(matches!(
            classify(&f, &m, &ctx(c, 0.0), Method::C, &tol),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn warp_of_scaling_scales_the_patch() {
        let e = Ellipse::circle(2.0).unwrap();
        let w = e.mapped(&Matrix2::new(3.0, 0.0, 0.0, 3.0)).unwrap();
        assert!((w.a - 1.0 / 36.0).abs() < 1e-12 && w.c.abs() < 1e-15);
    }

    #[test]
    fn fundamental_with_masks() {
        // pure horizontal translation: epipolar lines are rows
        let f = FundamentalMatrix::new([0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0]).unwrap();
        let mut data = vec![true; 100 * 100];
        for v in data.iter_mut().take(100 * 20) {
            *v = false;
        }
        let mask = Mask::new(100, 100, data).unwrap();
        let gt = GroundTruth::Fundamental {
            f,
            masks: Some((mask.clone(), mask)),
        };
        let tol = Tolerances::default();
        let m = Match::new(0, 0, 0.0);
        assert!(classify(&gt, &m, &pair((10.0, 50.0), (60.0, 55.0)), Method::D, &tol).unwrap());
        assert!(!classify(&gt, &m, &pair((10.0, 50.0), (60.0, 70.0)), Method::D, &tol).unwrap());
        assert!(!classify(&gt, &m, &pair((10.0, 5.0), (60.0, 5.0)), Method::D, &tol).unwrap());
    }

    fn stereo() -> DepthGroundTruth {
        let k = [500.0, 0.0, 160.0, 0.0, 500.0, 120.0, 0.0, 0.0, 1.0];
        let c1 = Camera::new(k, [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], [0.0; 3]).unwrap();
        let r = Rotation3::from_euler_angles(0.0, 0.1, 0.0);
        let mut rv = [0.0; 9];
        for (i, v) in rv.iter_mut().enumerate() {
            *v = r.matrix()[(i / 3, i % 3)];
        }
        let c2 = Camera::new(k, rv, [-0.5, 0.0, 0.05]).unwrap();
        // fronto-parallel plane at depth 4 for both views (approximately)
        let plane = |cam: &Camera| {
            let mut v = vec![0.0; 320 * 240];
            let n = Vector3::new(0.0, 0.0, 1.0);
            for y in 0..240 {
                for x in 0..320 {
                    let ray_cam = cam.k.try_inverse().unwrap() * Vector3::new(x as f64, y as f64, 1.0);
                    let center = -cam.r.transpose() * cam.t;
                    let dir = cam.r.transpose() * ray_cam;
                    let s = (4.0 - n.dot(&center)) / n.dot(&dir);
                    v[y * 320 + x] = s * ray_cam.z;
                }
            }
            DepthMap::new(320, 240, v).unwrap()
        };
        DepthGroundTruth {
            depth1: plane(&c1),
            depth2: plane(&c2),
            camera1: c1,
            camera2: c2,
            fundamental: None,
        }
    }

    #[test]
    fn depth_reprojection() {
        let d = stereo();
        let world = d.camera1.back_project(Point::new(100.0, 80.0), d.depth1.sample(Point::new(100.0, 80.0)).unwrap()).unwrap();
        let p2 = d.camera2.project(&world).unwrap();
        let gt = GroundTruth::Depth(Box::new(d));
        let tol = Tolerances::default();
        let m = Match::new(0, 0, 0.0);
        assert!(classify(&gt, &m, &pair((100.0, 80.0), (p2.x, p2.y)), Method::D, &tol).unwrap());
        assert!(!classify(&gt, &m, &pair((100.0, 80.0), (p2.x + 25.0, p2.y)), Method::Depth, &tol).unwrap());
        assert!(matches!(
            classify(&gt, &m, &pair((100.0, 80.0), (p2.x, p2.y)), Method::C, &tol),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn method_parsing() {
        assert_eq!("D".parse::<Method>().unwrap(), Method::D);
        assert_eq!("depth".parse::<Method>().unwrap(), Method::Depth);
        assert!("b".parse::<Method>().is_err());
    }
}

use nalgebra::{DMatrix, Matrix3, Vector3};

use super::{
    homogeneous, match_points, matrix_from_array, matrix_to_array, normalizing_transform,
    null_vector,
};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::keypoint::PairContext;
use crate::matches::Match;

// coplanar or otherwise under-determined configurations leave a second
// near-zero singular value
const RANK_TOLERANCE: f64 = 1e-8;

/// Rank-2 fundamental matrix with unit Frobenius norm, `x2^T F x1 = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct FundamentalMatrix {
    f: Matrix3<f64>,
}

impl FundamentalMatrix {
    /// Normalises `values` to unit norm and enforces rank 2.
    /// Values already in that form are kept verbatim, so `to_array` output
    /// reads back unchanged.
    pub fn new(values: [f64; 9]) -> Result<Self> {
        let m = matrix_from_array(&values)?;
        let peak = m.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
        if (m.norm() - 1.0).abs() < 1e-12 && m.determinant().abs() < 1e-12 && peak > 0.0 {
            let s = m.singular_values();
            if s.iter().filter(|v| **v > 1e-9).count() == 2 {
                return Ok(FundamentalMatrix { f: m });
            }
        }
        Self::from_matrix(m)
    }

    pub(crate) fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let svd = m.svd(true, true);
        let (u, v_t) = match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => (u, v_t),
            _ => return Err(Error::degenerate("singular value decomposition failed")),
        };
        let mut s = svd.singular_values;
        let smallest = s.imin();
        s[smallest] = 0.0;
        let f = u * Matrix3::from_diagonal(&s) * v_t;
        let norm = f.norm();
        if !(norm > 0.0 && norm.is_finite()) || s.iter().filter(|v| **v > 0.0).count() < 2 {
            return Err(Error::degenerate("fundamental matrix has rank below 2"));
        }
        let mut f = f / norm;
        // fix the sign so equal models compare equal
        let peak = f.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
        if peak < 0.0 {
            f = -f;
        }
        Ok(FundamentalMatrix { f })
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.f
    }

    pub fn to_array(&self) -> [f64; 9] {
        matrix_to_array(&self.f)
    }

    /// Larger of the two point-to-epipolar-line distances.
    pub fn epipolar_distance(&self, p1: Point, p2: Point) -> f64 {
        let x1 = Vector3::new(p1.x, p1.y, 1.0);
        let x2 = Vector3::new(p2.x, p2.y, 1.0);
        let l2 = self.f * x1;
        let l1 = self.f.transpose() * x2;
        line_distance(&l2, &x2).max(line_distance(&l1, &x1))
    }
}

fn line_distance(line: &Vector3<f64>, x: &Vector3<f64>) -> f64 {
    let n = line.x.hypot(line.y);
    if n == 0.0 {
        // a point at the epipole is consistent with every line
        return 0.0;
    }
    line.dot(x).abs() / n
}

/// Normalised eight-point estimate over all `pairs` (`p1 -> p2`).
pub fn fit_fundamental(pairs: &[(Point, Point)]) -> Result<FundamentalMatrix> {
    if pairs.len() < 8 {
        return Err(Error::degenerate(format!(
            "fundamental matrix needs at least 8 correspondences, got {}",
            pairs.len()
        )));
    }
    let src: Vec<Point> = pairs.iter().map(|p| p.0).collect();
    let dst: Vec<Point> = pairs.iter().map(|p| p.1).collect();
    let t1 = normalizing_transform(&src)?;
    let t2 = normalizing_transform(&dst)?;

    let mut a = DMatrix::zeros(pairs.len(), 9);
    for (k, (p, q)) in pairs.iter().enumerate() {
        let x = homogeneous(&t1, *p);
        let u = homogeneous(&t2, *q);
        a.row_mut(k).copy_from_slice(&[
            u.x * x.x,
            u.x * x.y,
            u.x,
            u.y * x.x,
            u.y * x.y,
            u.y,
            x.x,
            x.y,
            1.0,
        ]);
    }
    let (f, conditioning) = null_vector(a)?;
    if conditioning < RANK_TOLERANCE {
        return Err(Error::degenerate(
            "correspondences do not determine a fundamental matrix (coplanar scene?)",
        ));
    }
    let fn_rank2 = FundamentalMatrix::from_matrix(Matrix3::from_row_slice(&f))?;
    FundamentalMatrix::from_matrix(t2.transpose() * fn_rank2.f * t1)
}

/// Epipolar distance of `m` under `f`.
pub fn epipolar_distance(f: &FundamentalMatrix, m: &Match, ctx: &PairContext) -> Result<f64> {
    let (p1, p2) = match_points(m, ctx)?;
    Ok(f.epipolar_distance(p1, p2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Vector3};

    struct Rig {
        k: Matrix3<f64>,
        r: Matrix3<f64>,
        t: Vector3<f64>,
    }

    impl Rig {
        fn new() -> Self {
            Rig {
                k: Matrix3::new(800.0, 0.0, 320.0, 0.0, 800.0, 240.0, 0.0, 0.0, 1.0),
                r: *Rotation3::from_euler_angles(0.05, -0.2, 0.03).matrix(),
                t: Vector3::new(1.0, 0.1, 0.2),
            }
        }

        fn project(&self, x: Vector3<f64>) -> (Point, Point) {
            let a = self.k * x;
            let b = self.k * (self.r * x + self.t);
            (Point::new(a.x / a.z, a.y / a.z), Point::new(b.x / b.z, b.y / b.z))
        }

        fn truth(&self) -> FundamentalMatrix {
            let tx = Matrix3::new(
                0.0, -self.t.z, self.t.y, self.t.z, 0.0, -self.t.x, -self.t.y, self.t.x, 0.0,
            );
            let kinv = self.k.try_inverse().unwrap();
            FundamentalMatrix::from_matrix(kinv.transpose() * tx * self.r * kinv).unwrap()
        }
    }

    fn cloud() -> Vec<Vector3<f64>> {
        // deterministic, well spread, non-planar
        (0..20)
            .map(|k| {
                let a = k as f64;
                Vector3::new((a * 1.7).sin() * 2.0, (a * 0.9).cos() * 1.5, 6.0 + (a * 2.3).sin() * 2.0)
            })
            .collect()
    }

    #[test]
    fn recovers_two_view_geometry() {
        let rig = Rig::new();
        let pairs: Vec<_> = cloud().into_iter().map(|x| rig.project(x)).collect();
        let f = fit_fundamental(&pairs).unwrap();
        for (p, q) in &pairs {
            assert!(f.epipolar_distance(*p, *q) < 1e-6);
            assert!(rig.truth().epipolar_distance(*p, *q) < 1e-6);
        }
        let diff = (f.matrix() - rig.truth().matrix()).amax();
        assert!(diff < 1e-6, "{diff}");
        assert!((f.matrix().norm() - 1.0).abs() < 1e-12);
        let s = f.matrix().svd(false, false).singular_values;
        assert!(s.min() < 1e-12);
    }

    #[test]
    fn coplanar_points_are_degenerate() {
        let rig = Rig::new();
        let pairs: Vec<_> = (0..8)
            .map(|k| {
                let a = k as f64;
                rig.project(Vector3::new((a * 1.3).sin(), (a * 0.7).cos(), 5.0))
            })
            .collect();
        assert!(matches!(fit_fundamental(&pairs), Err(Error::Degenerate(_))));
        assert!(fit_fundamental(&pairs[..7]).is_err());
    }

    #[test]
    fn perpendicular_offset_grows_distance() {
        let rig = Rig::new();
        let f = rig.truth();
        let (p, q) = rig.project(Vector3::new(0.3, -0.2, 5.0));
        let line = f.matrix() * Vector3::new(p.x, p.y, 1.0);
        let n = line.x.hypot(line.y);
        let (nx, ny) = (line.x / n, line.y / n);
        let d = 2.5;
        let moved = Point::new(q.x + d * nx, q.y + d * ny);
        let x2 = Vector3::new(moved.x, moved.y, 1.0);
        let forward = line.dot(&x2).abs() / n;
        assert!((forward - d).abs() < 1e-6);
        assert!(f.epipolar_distance(p, moved) >= forward - 1e-9);
    }
}

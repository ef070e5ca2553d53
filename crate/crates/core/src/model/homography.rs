use nalgebra::{DMatrix, Matrix2, Matrix3, Vector3};

use super::{
    homogeneous, match_points, matrix_from_array, matrix_to_array, normalizing_transform,
    null_vector,
};
use crate::error::{Error, Result};
use crate::geometry::predicates::orient2d;
use crate::geometry::Point;
use crate::keypoint::PairContext;
use crate::matches::Match;

// second-smallest / largest singular value below this means a non-unique fit
const RANK_TOLERANCE: f64 = 1e-9;

/// Planar homography mapping image-1 points to image 2, scaled so its
/// largest-magnitude entry is 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Homography {
    h: Matrix3<f64>,
    inv: Matrix3<f64>,
}

impl Homography {
    pub fn new(values: [f64; 9]) -> Result<Self> {
        Self::from_matrix(matrix_from_array(&values)?)
    }

    pub fn identity() -> Self {
        Homography {
            h: Matrix3::identity(),
            inv: Matrix3::identity(),
        }
    }

    pub(crate) fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let peak = m.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if peak == 0.0 || !peak.is_finite() {
            return Err(Error::degenerate("homography is zero"));
        }
        let h = m / peak;
        let det = h.determinant();
        if !det.is_finite() || det.abs() < 1e-14 {
            return Err(Error::degenerate("homography is singular"));
        }
        let inv = h
            .try_inverse()
            .ok_or_else(|| Error::degenerate("homography is singular"))?;
        Ok(Homography { h, inv })
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.h
    }

    pub fn to_array(&self) -> [f64; 9] {
        matrix_to_array(&self.h)
    }

    pub fn inverse(&self) -> Homography {
        Homography::from_matrix(self.inv).expect("inverse of a valid homography")
    }

    /// Image of `p`; `None` when it maps to infinity.
    pub fn apply(&self, p: Point) -> Option<Point> {
        project(&self.h, p)
    }

    pub fn apply_inverse(&self, p: Point) -> Option<Point> {
        project(&self.inv, p)
    }

    /// Local affine approximation at `p`: the Jacobian of the mapping.
    pub fn jacobian(&self, p: Point) -> Option<Matrix2<f64>> {
        let h = &self.h;
        let w = h[(2, 0)] * p.x + h[(2, 1)] * p.y + h[(2, 2)];
        if w == 0.0 {
            return None;
        }
        let u = h[(0, 0)] * p.x + h[(0, 1)] * p.y + h[(0, 2)];
        let v = h[(1, 0)] * p.x + h[(1, 1)] * p.y + h[(1, 2)];
        let w2 = w * w;
        Some(Matrix2::new(
            (h[(0, 0)] * w - u * h[(2, 0)]) / w2,
            (h[(0, 1)] * w - u * h[(2, 1)]) / w2,
            (h[(1, 0)] * w - v * h[(2, 0)]) / w2,
            (h[(1, 1)] * w - v * h[(2, 1)]) / w2,
        ))
    }

    /// Larger of the forward and backward transfer distances.
    pub fn symmetric_transfer_error(&self, p1: Point, p2: Point) -> f64 {
        let forward = self.apply(p1).map_or(f64::INFINITY, |q| q.distance(&p2));
        let backward = self.apply_inverse(p2).map_or(f64::INFINITY, |q| q.distance(&p1));
        forward.max(backward)
    }
}

fn project(m: &Matrix3<f64>, p: Point) -> Option<Point> {
    let v = m * Vector3::new(p.x, p.y, 1.0);
    if v.z == 0.0 || !v.z.is_finite() {
        return None;
    }
    Some(Point::new(v.x / v.z, v.y / v.z))
}

/// Least-squares DLT homography over all `pairs` (`p1 -> p2`) with
/// isotropic normalisation.
pub fn fit_homography(pairs: &[(Point, Point)]) -> Result<Homography> {
    if pairs.len() < 4 {
        return Err(Error::degenerate(format!(
            "homography needs at least 4 correspondences, got {}",
            pairs.len()
        )));
    }
    let src: Vec<Point> = pairs.iter().map(|p| p.0).collect();
    let dst: Vec<Point> = pairs.iter().map(|p| p.1).collect();
    if pairs.len() == 4 && (has_collinear_triple(&src) || has_collinear_triple(&dst)) {
        return Err(Error::degenerate("three of four points are collinear"));
    }
    let t1 = normalizing_transform(&src)?;
    let t2 = normalizing_transform(&dst)?;

    let mut a = DMatrix::zeros(2 * pairs.len(), 9);
    for (k, (p, q)) in pairs.iter().enumerate() {
        let x = homogeneous(&t1, *p);
        let u = homogeneous(&t2, *q);
        let (x, y) = (x.x, x.y);
        let (u, v) = (u.x, u.y);
        let r = 2 * k;
        a.row_mut(r)
            .copy_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
        a.row_mut(r + 1)
            .copy_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u]);
    }
    let (h, conditioning) = null_vector(a)?;
    if conditioning < RANK_TOLERANCE {
        return Err(Error::degenerate("correspondences do not determine a homography"));
    }
    let hn = Matrix3::from_row_slice(&h);
    let t2_inv = t2
        .try_inverse()
        .ok_or_else(|| Error::degenerate("normalisation is singular"))?;
    Homography::from_matrix(t2_inv * hn * t1)
}

fn has_collinear_triple(p: &[Point]) -> bool {
    let n = p.len();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                if orient2d(p[a], p[b], p[c]) == 0.0 {
                    return true;
                }
            }
        }
    }
    false
}

/// Symmetric transfer error of `m` under `h`.
pub fn reprojection_error(h: &Homography, m: &Match, ctx: &PairContext) -> Result<f64> {
    let (p1, p2) = match_points(m, ctx)?;
    Ok(h.symmetric_transfer_error(p1, p2))
}

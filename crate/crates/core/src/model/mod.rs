//! Geometric models: homography and fundamental matrix estimation, their
//! residuals, patch overlap error and single-sample consensus filtering.

mod fundamental;
mod homography;
mod one_sac;
pub mod overlap;

pub use fundamental::{epipolar_distance, fit_fundamental, FundamentalMatrix};
pub use homography::{fit_homography, reprojection_error, Homography};
pub use one_sac::{one_sac, OneSacResult, DEFAULT_INLIER_THRESHOLD};
pub use overlap::{ellipse_overlap_error, overlap_error, OVERLAP_GRID};

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::keypoint::PairContext;
use crate::matches::Match;

/// Model family fitted by 1SAC.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Homography,
    Fundamental,
}

impl ModelKind {
    /// Minimal sample size.
    pub fn q(self) -> usize {
        match self {
            ModelKind::Homography => 4,
            ModelKind::Fundamental => 8,
        }
    }

    /// Normalised size of the single consensus sample, `3q`.
    pub fn sample_size(self) -> usize {
        3 * self.q()
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homography" | "h" => Ok(ModelKind::Homography),
            "fundamental" | "f" => Ok(ModelKind::Fundamental),
            other => Err(Error::invalid(format!("unknown model kind '{other}'"))),
        }
    }
}

/// A fitted model of either kind.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Homography(Homography),
    Fundamental(FundamentalMatrix),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Homography(_) => ModelKind::Homography,
            Model::Fundamental(_) => ModelKind::Fundamental,
        }
    }

    /// Symmetric transfer error (homography) or epipolar distance
    /// (fundamental) in pixels.
    pub fn residual(&self, p1: Point, p2: Point) -> f64 {
        match self {
            Model::Homography(h) => h.symmetric_transfer_error(p1, p2),
            Model::Fundamental(f) => f.epipolar_distance(p1, p2),
        }
    }

    /// Row-major entries.
    pub fn to_array(&self) -> [f64; 9] {
        match self {
            Model::Homography(h) => h.to_array(),
            Model::Fundamental(f) => f.to_array(),
        }
    }
}

/// Keypoint centres of a match, validated against the context.
pub(crate) fn match_points(m: &Match, ctx: &PairContext) -> Result<(Point, Point)> {
    let k1 = ctx.keypoints1.get(m.i).ok_or(Error::OutOfRange {
        index: m.i,
        len: ctx.keypoints1.len(),
    })?;
    let k2 = ctx.keypoints2.get(m.j).ok_or(Error::OutOfRange {
        index: m.j,
        len: ctx.keypoints2.len(),
    })?;
    Ok((Point::new(k1.x, k1.y), Point::new(k2.x, k2.y)))
}

pub(crate) fn matrix_from_array(values: &[f64; 9]) -> Result<Matrix3<f64>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix entries must be finite"));
    }
    Ok(Matrix3::from_row_slice(values))
}

pub(crate) fn matrix_to_array(m: &Matrix3<f64>) -> [f64; 9] {
    let mut out = [0.0; 9];
    for r in 0..3 {
        for c in 0..3 {
            out[3 * r + c] = m[(r, c)];
        }
    }
    out
}

/// Similarity moving the centroid to the origin with mean distance sqrt(2).
pub(crate) fn normalizing_transform(points: &[Point]) -> Result<Matrix3<f64>> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let mean = points.iter().map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / n;
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::degenerate("all points coincide"));
    }
    let s = std::f64::consts::SQRT_2 / mean;
    Ok(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

#[inline]
pub(crate) fn homogeneous(t: &Matrix3<f64>, p: Point) -> Vector3<f64> {
    t * Vector3::new(p.x, p.y, 1.0)
}

/// Null vector of the design matrix `a` (rows padded to at least 9) and the
/// ratio of its second-smallest to its largest singular value.
pub(crate) fn null_vector(a: DMatrix<f64>) -> Result<(Vec<f64>, f64)> {
    let cols = a.ncols();
    let a = if a.nrows() < cols {
        let mut padded = DMatrix::zeros(cols, cols);
        padded.rows_mut(0, a.nrows()).copy_from(&a);
        padded
    } else {
        a
    };
    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::degenerate("singular value decomposition failed"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
    let smallest = order[0];
    let second = svd.singular_values[order[1]];
    let largest = svd.singular_values[order[order.len() - 1]];
    if largest.is_nan() || largest <= 0.0 {
        return Err(Error::degenerate("design matrix is zero"));
    }
    Ok((v_t.row(smallest).iter().copied().collect(), second / largest))
}

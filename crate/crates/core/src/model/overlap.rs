//! Overlap error between elliptical patches.
//!
//! Areas are measured by sampling the centres of a fixed grid laid over the
//! joint bounding box of both patches. Each grid row is intersected with the
//! two ellipses analytically, so the count equals exhaustive per-cell
//! sampling at the cost of one interval test per row.

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::keypoint::{Ellipse, Keypoint};

/// Grid resolution per axis.
pub const OVERLAP_GRID: usize = 256;

/// `1 - |A ∩ B| / |A ∪ B|` for the patches of two keypoints, both scaled by
/// `magnify` about their centres. Requires ellipses on both keypoints.
pub fn ellipse_overlap_error(k1: &Keypoint, k2: &Keypoint, magnify: f64) -> Result<f64> {
    let (e1, e2) = match (k1.ellipse, k2.ellipse) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::invalid("overlap error requires elliptical patches")),
    };
    overlap_error(Point::new(k1.x, k1.y), &e1, Point::new(k2.x, k2.y), &e2, magnify)
}

/// Overlap error of two ellipses given by centre and shape.
pub fn overlap_error(c1: Point, e1: &Ellipse, c2: Point, e2: &Ellipse, magnify: f64) -> Result<f64> {
    if !(magnify > 0.0 && magnify.is_finite()) {
        return Err(Error::invalid("magnification must be positive"));
    }
    e1.validate()?;
    e2.validate()?;
    let (e1, e2) = (e1.magnified(magnify), e2.magnified(magnify));
    let b1 = bbox(c1, &e1);
    let b2 = bbox(c2, &e2);
    if disjoint(&b1, &b2) {
        return Ok(1.0);
    }
    let x0 = b1[0].min(b2[0]);
    let y0 = b1[1].min(b2[1]);
    let dx = (b1[2].max(b2[2]) - x0) / OVERLAP_GRID as f64;
    let dy = (b1[3].max(b2[3]) - y0) / OVERLAP_GRID as f64;

    let mut inter = 0u64;
    let mut union = 0u64;
    for row in 0..OVERLAP_GRID {
        let y = y0 + (row as f64 + 0.5) * dy;
        let r1 = cells(c1, &e1, y, x0, dx);
        let r2 = cells(c2, &e2, y, x0, dx);
        let n1 = span(r1);
        let n2 = span(r2);
        let both = match (r1, r2) {
            (Some((a0, a1)), Some((b0, b1))) => span(Some((a0.max(b0), a1.min(b1)))),
            _ => 0,
        };
        inter += both;
        union += n1 + n2 - both;
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(1.0 - inter as f64 / union as f64)
}

/// Whether the axis-aligned bounding boxes of the (magnified) patches are
/// disjoint, which implies an overlap error of 1. False if a patch is missing.
pub fn bounding_boxes_disjoint(k1: &Keypoint, k2: &Keypoint, magnify: f64) -> bool {
    match (k1.ellipse, k2.ellipse) {
        (Some(a), Some(b)) => disjoint(
            &bbox(Point::new(k1.x, k1.y), &a.magnified(magnify)),
            &bbox(Point::new(k2.x, k2.y), &b.magnified(magnify)),
        ),
        _ => false,
    }
}

fn bbox(c: Point, e: &Ellipse) -> [f64; 4] {
    let (hx, hy) = e.half_extent();
    [c.x - hx, c.y - hy, c.x + hx, c.y + hy]
}

fn disjoint(a: &[f64; 4], b: &[f64; 4]) -> bool {
    a[2] < b[0] || b[2] < a[0] || a[3] < b[1] || b[3] < a[1]
}

/// Inclusive range of grid columns whose centres fall inside the ellipse on
/// the horizontal line `y`.
fn cells(c: Point, e: &Ellipse, y: f64, x0: f64, dx: f64) -> Option<(i64, i64)> {
    let t = y - c.y;
    // a u^2 + 2 c t u + (b t^2 - 1) <= 0 with u = x - c.x
    let disc = (e.c * t) * (e.c * t) - e.a * (e.b * t * t - 1.0);
    if disc < 0.0 {
        return None;
    }
    let root = disc.sqrt();
    let lo = c.x + (-e.c * t - root) / e.a;
    let hi = c.x + (-e.c * t + root) / e.a;
    let first = (((lo - x0) / dx) - 0.5).ceil().max(0.0) as i64;
    let last = (((hi - x0) / dx) - 0.5).floor().min(OVERLAP_GRID as f64 - 1.0) as i64;
    (first <= last).then_some((first, last))
}

fn span(r: Option<(i64, i64)>) -> u64 {
    match r {
        Some((a, b)) if a <= b => (b - a + 1) as u64,
        _ => 0,
    }
}

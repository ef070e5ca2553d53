//! Planar geometry used by the spatial filter: Delaunay triangulation,
//! convex hull, alpha-shape boundaries and the synthetic border built around
//! a keypoint cloud.

mod alpha;
mod boundary;
mod delaunay;
mod hull;
pub mod predicates;

pub use alpha::{alpha_boundary, AlphaShape};
pub use boundary::{build_dtm_boundary, BoundaryMode, BoundarySet};
pub use delaunay::{delaunay, Triangulation};
pub use hull::convex_hull;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    #[inline]
    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point { x, y }
    }
}

/// Signed shoelace area of a closed polygon (positive when counter-clockwise).
pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut acc = 0.0;
    for k in 0..n {
        let (p, q) = (poly[k], poly[(k + 1) % n]);
        acc += p.x * q.y - q.x * p.y;
    }
    0.5 * acc
}

/// Even-odd point-in-polygon test. Points on the boundary are reported as
/// outside only when they are exactly on an edge (`strictly_inside` uses the
/// exact orientation predicate).
pub fn point_in_polygon(poly: &[Point], p: Point) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Inside the polygon and not on any of its edges.
pub fn strictly_inside_polygon(poly: &[Point], p: Point) -> bool {
    let n = poly.len();
    for k in 0..n {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        if predicates::orient2d(a, b, p) == 0.0 && predicates::on_closed_segment(a, b, p) {
            return false;
        }
    }
    point_in_polygon(poly, p)
}

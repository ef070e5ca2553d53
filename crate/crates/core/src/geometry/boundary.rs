use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::alpha::alpha_boundary;
use super::hull::convex_hull;
use super::Point;
use crate::error::{Error, Result};

const BOUNDARY_SHRINK: f64 = 0.5;

/// How the synthetic border around a keypoint cloud is built.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Fattened and split alpha-shape boundary.
    #[default]
    Alpha,
    /// Same construction over the convex hull.
    ConvexHull,
    /// No border points.
    None,
}

impl std::str::FromStr for BoundaryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(BoundaryMode::Alpha),
            "convex-hull" | "convex_hull" | "hull" => Ok(BoundaryMode::ConvexHull),
            "none" => Ok(BoundaryMode::None),
            other => Err(Error::invalid(format!("unknown boundary mode '{other}'"))),
        }
    }
}

/// Border points added around a keypoint cloud before triangulation.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySet {
    pub points: Vec<Point>,
    /// Fattening offset and split length in pixels.
    pub s: f64,
}

impl BoundarySet {
    pub fn empty(s: f64) -> Self {
        BoundarySet { points: Vec::new(), s }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Builds the border for `points` in a `width x height` image.
///
/// Every boundary edge of the cloud is offset by `s = min(width, height) / 10`
/// on both sides at both endpoints; the boundary of the cloud plus these
/// offset points is then split into pieces of length `s`, whose endpoints
/// form the border. Points coinciding with an input point are dropped.
pub fn build_dtm_boundary(
    points: &[Point],
    width: f64,
    height: f64,
    mode: BoundaryMode,
) -> Result<BoundarySet> {
    if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
        return Err(Error::invalid("image dimensions must be positive"));
    }
    let s = width.min(height) / 10.0;
    if mode == BoundaryMode::None {
        return Ok(BoundarySet::empty(s));
    }

    let cloud = distinct(points.iter().copied());
    let fattened: Vec<Point> = outline(&cloud, mode)?
        .into_iter()
        .flat_map(|(p, q)| offsets(p, q, s))
        .collect();
    let all = distinct(cloud.iter().copied().chain(fattened));

    let originals: HashSet<(u64, u64)> = cloud.iter().map(|p| key(*p)).collect();
    let mut seen = HashSet::new();
    let mut border = Vec::new();
    for (p, q) in outline(&all, mode)? {
        for b in split(p, q, s) {
            let k = key(b);
            if !originals.contains(&k) && seen.insert(k) {
                border.push(b);
            }
        }
    }
    Ok(BoundarySet { points: border, s })
}

/// Directed outline edges of the cloud as point pairs.
fn outline(points: &[Point], mode: BoundaryMode) -> Result<Vec<(Point, Point)>> {
    match mode {
        BoundaryMode::Alpha => {
            let shape = alpha_boundary(points, BOUNDARY_SHRINK)?;
            Ok(shape
                .loops()
                .iter()
                .flat_map(|l| {
                    (0..l.len()).map(move |k| (points[l[k]], points[l[(k + 1) % l.len()]]))
                })
                .collect())
        }
        BoundaryMode::ConvexHull => {
            let hull = convex_hull(points)?;
            Ok((0..hull.len())
                .map(|k| (points[hull[k]], points[hull[(k + 1) % hull.len()]]))
                .collect())
        }
        BoundaryMode::None => Ok(Vec::new()),
    }
}

/// The four points at distance `s` from segment `pq` on the perpendiculars
/// through its endpoints.
fn offsets(p: Point, q: Point, s: f64) -> [Point; 4] {
    let len = p.distance(&q);
    let (nx, ny) = (-(q.y - p.y) / len * s, (q.x - p.x) / len * s);
    [
        Point::new(p.x + nx, p.y + ny),
        Point::new(p.x - nx, p.y - ny),
        Point::new(q.x + nx, q.y + ny),
        Point::new(q.x - nx, q.y - ny),
    ]
}

/// Points at arc length `0, s, 2s, ...` along `pq` plus `q` itself.
fn split(p: Point, q: Point, s: f64) -> Vec<Point> {
    let len = p.distance(&q);
    let mut out = vec![p];
    let mut k = 1.0;
    while k * s < len {
        let t = k * s / len;
        out.push(Point::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)));
        k += 1.0;
    }
    out.push(q);
    out
}

fn key(p: Point) -> (u64, u64) {
    // fold -0.0 into 0.0 so equal coordinates hash equally
    ((p.x + 0.0).to_bits(), (p.y + 0.0).to_bits())
}

fn distinct(points: impl Iterator<Item = Point>) -> Vec<Point> {
    let mut seen = HashSet::new();
    points.filter(|p| seen.insert(key(*p))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{convex_hull, strictly_inside_polygon};

    fn hull_polygon(points: &[Point]) -> Vec<Point> {
        convex_hull(points).unwrap().iter().map(|&k| points[k]).collect()
    }

    fn grid(n: usize, step: f64, origin: f64) -> Vec<Point> {
        let mut p = Vec::new();
        for y in 0..n {
            for x in 0..n {
                p.push(Point::new(origin + x as f64 * step, origin + y as f64 * step));
            }
        }
        p
    }

    #[test]
    fn grid_border_offset_by_s() {
        let cloud = grid(6, 20.0, 100.0);
        let b = build_dtm_boundary(&cloud, 400.0, 300.0, BoundaryMode::Alpha).unwrap();
        assert_eq!(b.s, 30.0);
        let poly = hull_polygon(&b.points);
        for p in &cloud {
            assert!(strictly_inside_polygon(&poly, *p));
        }
        // every border point is at most s (up to the corner diagonal) from the grid box
        for q in &b.points {
            let dx = (100.0 - q.x).max(q.x - 200.0).max(0.0);
            let dy = (100.0 - q.y).max(q.y - 200.0).max(0.0);
            assert!(dx.hypot(dy) <= 30.0 * 2f64.sqrt() + 1e-9);
            assert!(dx.max(dy) > 0.0);
        }
    }

    #[test]
    fn triangle_border() {
        let cloud = vec![Point::new(0.0, 0.0), Point::new(40.0, 0.0), Point::new(10.0, 30.0)];
        let b = build_dtm_boundary(&cloud, 100.0, 100.0, BoundaryMode::Alpha).unwrap();
        assert!(b.len() >= 9);
        let tri = vec![cloud[0], cloud[1], cloud[2]];
        for q in &b.points {
            assert!(!strictly_inside_polygon(&tri, *q));
        }
        let poly = hull_polygon(&b.points);
        for p in &cloud {
            assert!(strictly_inside_polygon(&poly, *p));
        }
    }

    #[test]
    fn large_s_still_encloses() {
        let cloud = vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 3.0),
        ];
        for mode in [BoundaryMode::Alpha, BoundaryMode::ConvexHull] {
            let b = build_dtm_boundary(&cloud, 500.0, 500.0, mode).unwrap();
            let poly = hull_polygon(&b.points);
            for p in &cloud {
                assert!(strictly_inside_polygon(&poly, *p));
            }
        }
    }

    #[test]
    fn none_mode_is_empty() {
        let cloud = grid(3, 1.0, 0.0);
        let b = build_dtm_boundary(&cloud, 10.0, 10.0, BoundaryMode::None).unwrap();
        assert!(b.is_empty());
        assert_eq!(b.s, 1.0);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("convex-hull".parse::<BoundaryMode>().unwrap(), BoundaryMode::ConvexHull);
        assert!("square".parse::<BoundaryMode>().is_err());
        let json = serde_json::to_string(&BoundaryMode::ConvexHull).unwrap();
        assert_eq!(json, "\"convex_hull\"");
    }
}

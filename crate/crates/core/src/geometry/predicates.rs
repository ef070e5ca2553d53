//! Adaptive-precision orientation and in-circle predicates.

use super::Point;

#[inline]
fn coord(p: Point) -> robust::Coord<f64> {
    robust::Coord { x: p.x, y: p.y }
}

/// Positive when `a, b, c` are in counter-clockwise order, negative when
/// clockwise, zero when collinear. The sign is exact.
#[inline]
pub fn orient2d(a: Point, b: Point, c: Point) -> f64 {
    robust::orient2d(coord(a), coord(b), coord(c))
}

/// Positive when `d` lies strictly inside the circle through the
/// counter-clockwise triangle `a, b, c`. The sign is exact.
#[inline]
pub fn incircle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    robust::incircle(coord(a), coord(b), coord(c), coord(d))
}

/// For `p` collinear with `a, b`: whether it lies on the closed segment.
#[inline]
pub fn on_closed_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// For `p` collinear with `a, b`: whether it lies strictly between them.
#[inline]
pub fn on_open_segment(a: Point, b: Point, p: Point) -> bool {
    on_closed_segment(a, b, p) && p != a && p != b
}

/// Closed containment in the counter-clockwise triangle `a, b, c`.
#[inline]
pub fn in_triangle(a: Point, b: Point, c: Point, p: Point) -> bool {
    orient2d(a, b, p) >= 0.0 && orient2d(b, c, p) >= 0.0 && orient2d(c, a, p) >= 0.0
}

/// Closed containment in a non-degenerate triangle of either orientation.
pub fn in_triangle_any_orientation(a: Point, b: Point, c: Point, p: Point) -> bool {
    let o = orient2d(a, b, c);
    if o > 0.0 {
        in_triangle(a, b, c, p)
    } else if o < 0.0 {
        in_triangle(a, c, b, p)
    } else {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orientation_signs() {
        let (a, b) = (Point::new(0.0, 0.0), Point::new(1.0, 0.0));
        assert!(orient2d(a, b, Point::new(0.0, 1.0)) > 0.0);
        assert!(orient2d(a, b, Point::new(0.0, -1.0)) < 0.0);
        assert_eq!(orient2d(a, b, Point::new(7.0, 0.0)), 0.0);
    }

    #[test]
    fn near_degenerate_orientation_is_exact() {
        // classic failure case for naive floating point
        let a = Point::new(0.5, 0.5);
        let b = Point::new(12.0, 12.0);
        let c = Point::new(24.0, 24.0);
        assert_eq!(orient2d(a, b, c), 0.0);
        let c = Point::new(24.0, 24.0 + f64::EPSILON * 16.0);
        assert!(orient2d(a, b, c) > 0.0);
    }

    #[test]
    fn cocircular_grid_points() {
        let (a, b, c) = (Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0));
        assert_eq!(incircle(a, b, c, Point::new(0.0, 1.0)), 0.0);
        assert!(incircle(a, b, c, Point::new(0.5, 0.5)) > 0.0);
        assert!(incircle(a, b, c, Point::new(3.0, 3.0)) < 0.0);
    }

    #[test]
    fn triangle_containment() {
        let (a, b, c) = (Point::new(0.0, 0.0), Point::new(4.0, 0.0), Point::new(0.0, 4.0));
        assert!(in_triangle(a, b, c, Point::new(1.0, 1.0)));
        assert!(in_triangle(a, b, c, Point::new(2.0, 2.0)));
        assert!(!in_triangle(a, b, c, Point::new(3.0, 3.0)));
        assert!(in_triangle_any_orientation(a, c, b, Point::new(1.0, 1.0)));
        assert!(!in_triangle_any_orientation(a, b, Point::new(8.0, 0.0), Point::new(1.0, 0.0)));
    }
}

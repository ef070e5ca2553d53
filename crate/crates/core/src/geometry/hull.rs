use super::predicates::orient2d;
use super::Point;
use crate::error::{Error, Result};

/// Convex hull as counter-clockwise indices into `points`, starting from the
/// lowest-leftmost point. Collinear points along hull edges are excluded.
pub fn convex_hull(points: &[Point]) -> Result<Vec<usize>> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (p, q) = (points[a], points[b]);
        p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)).then(a.cmp(&b))
    });
    order.dedup_by(|a, b| points[*a] == points[*b]);
    if order.len() < 3 {
        return Err(Error::degenerate("convex hull needs at least 3 distinct points"));
    }

    let mut hull: Vec<usize> = Vec::with_capacity(2 * order.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &usize>> = if pass == 0 {
            Box::new(order.iter())
        } else {
            Box::new(order.iter().rev())
        };
        for &k in iter {
            while hull.len() >= start + 2
                && orient2d(
                    points[hull[hull.len() - 2]],
                    points[hull[hull.len() - 1]],
                    points[k],
                ) <= 0.0
            {
                hull.pop();
            }
            hull.push(k);
        }
        // last point of each chain is the first of the other
        hull.pop();
    }
    if hull.len() < 3 {
        return Err(Error::degenerate("points are collinear"));
    }
    Ok(hull)
}

//! Incremental Delaunay triangulation (Bowyer-Watson with ghost triangles).
//!
//! The outside of the convex hull is covered by "ghost" triangles sharing a
//! virtual vertex at infinity, so points falling outside the current hull are
//! inserted by the same cavity retriangulation as interior points. All
//! decisions go through the exact predicates in [`super::predicates`].

use std::collections::HashMap;

use super::predicates::{in_triangle, incircle, on_open_segment, orient2d};
use super::Point;
use crate::error::{Error, Result};

const GHOST: usize = usize::MAX;

/// A Delaunay triangulation of a planar point set.
///
/// Triangles are counter-clockwise vertex triples; `neighbors[t][k]` is the
/// triangle across the edge opposite vertex `k` (`None` on the hull).
#[derive(Clone, Debug)]
pub struct Triangulation {
    points: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    neighbors: Vec<[Option<usize>; 3]>,
    adj_offsets: Vec<usize>,
    adj: Vec<usize>,
    inc_offsets: Vec<usize>,
    inc: Vec<usize>,
}

/// Triangulates `points`. Fails when fewer than three points are given, when
/// all points are collinear, or when a point is repeated.
pub fn delaunay(points: &[Point]) -> Result<Triangulation> {
    if points.len() < 3 {
        return Err(Error::degenerate(format!(
            "need at least 3 points to triangulate, got {}",
            points.len()
        )));
    }
    if points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
        return Err(Error::invalid("point coordinates must be finite"));
    }
    let mut builder = Builder::new(points)?;
    builder.insert_all()?;
    Ok(builder.finish())
}

impl Triangulation {
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn neighbors(&self, t: usize) -> [Option<usize>; 3] {
        self.neighbors[t]
    }

    pub fn num_vertices(&self) -> usize {
        self.points.len()
    }

    /// Vertices sharing an edge with `v` (excluding `v`), sorted.
    pub fn vertex_neighbors(&self, v: usize) -> &[usize] {
        &self.adj[self.adj_offsets[v]..self.adj_offsets[v + 1]]
    }

    /// Triangles having `v` as a vertex, sorted.
    pub fn incident_triangles(&self, v: usize) -> &[usize] {
        &self.inc[self.inc_offsets[v]..self.inc_offsets[v + 1]]
    }

    /// Vertices sharing an edge with `v`, plus `v` itself, sorted.
    pub fn adjacency(&self, v: usize) -> Result<Vec<usize>> {
        if v >= self.points.len() {
            return Err(Error::OutOfRange {
                index: v,
                len: self.points.len(),
            });
        }
        let mut out = self.vertex_neighbors(v).to_vec();
        let pos = out.partition_point(|&u| u < v);
        out.insert(pos, v);
        Ok(out)
    }

    /// Undirected edges `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.adj.len() / 2);
        for v in 0..self.points.len() {
            for &u in self.vertex_neighbors(v) {
                if v < u {
                    out.push((v, u));
                }
            }
        }
        out
    }

    /// Hull edges, oriented counter-clockwise around the triangulation.
    pub fn hull_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                if self.neighbors[t][k].is_none() {
                    out.push((tri[(k + 1) % 3], tri[(k + 2) % 3]));
                }
            }
        }
        out
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.points[a], self.points[b], self.points[c]]
    }

    pub fn circumradius(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        circumradius(a, b, c)
    }

    /// Triangle containing `p` (boundary inclusive). Points on shared edges
    /// or vertices resolve to the lowest containing triangle index.
    pub fn locate_triangle(&self, p: Point) -> Option<usize> {
        self.locate_triangle_from(p, 0)
    }

    pub fn locate_triangle_from(&self, p: Point, hint: usize) -> Option<usize> {
        if self.triangles.is_empty() || !(p.x.is_finite() && p.y.is_finite()) {
            return None;
        }
        let mut t = hint.min(self.triangles.len() - 1);
        let limit = 4 * self.triangles.len() + 16;
        let mut steps = 0;
        let found = loop {
            if steps > limit {
                break (0..self.triangles.len()).find(|&s| self.contains(s, p))?;
            }
            steps += 1;
            let tri = self.triangles[t];
            let mut next = None;
            for kk in 0..3 {
                let k = (kk + steps) % 3;
                let (a, b) = (self.points[tri[(k + 1) % 3]], self.points[tri[(k + 2) % 3]]);
                if orient2d(a, b, p) < 0.0 {
                    next = Some(self.neighbors[t][k]?);
                    break;
                }
            }
            match next {
                Some(n) => t = n,
                None => break t,
            }
        };

        let [a, b, c] = self.triangle_points(found);
        let strictly = orient2d(a, b, p) > 0.0 && orient2d(b, c, p) > 0.0 && orient2d(c, a, p) > 0.0;
        if strictly {
            return Some(found);
        }
        self.triangles[found]
            .iter()
            .flat_map(|&v| self.incident_triangles(v).iter().copied())
            .filter(|&s| self.contains(s, p))
            .min()
    }

    fn contains(&self, t: usize, p: Point) -> bool {
        let [a, b, c] = self.triangle_points(t);
        in_triangle(a, b, c, p)
    }
}

pub(crate) fn circumradius(a: Point, b: Point, c: Point) -> f64 {
    let ab = a.distance(&b);
    let bc = b.distance(&c);
    let ca = c.distance(&a);
    let area2 = ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y)).abs();
    if area2 == 0.0 {
        return f64::INFINITY;
    }
    ab * bc * ca / (2.0 * area2)
}

struct Builder<'a> {
    pts: &'a [Point],
    tris: Vec<[usize; 3]>,
    nbrs: Vec<[usize; 3]>,
    alive: Vec<bool>,
    seed: [usize; 3],
    last: usize,
    // per-insertion cavity marks: (stamp, inside)
    marks: Vec<(u32, bool)>,
    stamp: u32,
}

impl<'a> Builder<'a> {
    fn new(pts: &'a [Point]) -> Result<Self> {
        let i0 = 0;
        let i1 = (1..pts.len())
            .find(|&k| pts[k] != pts[i0])
            .ok_or_else(|| Error::degenerate("all points coincide"))?;
        let i2 = (1..pts.len())
            .find(|&k| orient2d(pts[i0], pts[i1], pts[k]) != 0.0)
            .ok_or_else(|| Error::degenerate("all points are collinear"))?;
        let (a, b, c) = if orient2d(pts[i0], pts[i1], pts[i2]) > 0.0 {
            (i0, i1, i2)
        } else {
            (i0, i2, i1)
        };

        let mut builder = Builder {
            pts,
            tris: Vec::with_capacity(2 * pts.len() + 8),
            nbrs: Vec::with_capacity(2 * pts.len() + 8),
            alive: Vec::with_capacity(2 * pts.len() + 8),
            seed: [i0, i1, i2],
            last: 0,
            marks: Vec::new(),
            stamp: 0,
        };
        // seed triangle 0 and its three ghosts; see `ghost_neighbors`
        builder.push([a, b, c], [1, 2, 3]);
        builder.push([c, b, GHOST], [3, 2, 0]);
        builder.push([a, c, GHOST], [1, 3, 0]);
        builder.push([b, a, GHOST], [2, 1, 0]);
        Ok(builder)
    }

    fn push(&mut self, tri: [usize; 3], nbr: [usize; 3]) -> usize {
        self.tris.push(tri);
        self.nbrs.push(nbr);
        self.alive.push(true);
        self.marks.push((0, false));
        self.tris.len() - 1
    }

    #[inline]
    fn is_ghost(&self, t: usize) -> bool {
        self.tris[t].contains(&GHOST)
    }

    fn conflicts(&self, t: usize, q: Point) -> bool {
        let tri = self.tris[t];
        if let Some(k) = tri.iter().position(|&v| v == GHOST) {
            let a = self.pts[tri[(k + 1) % 3]];
            let b = self.pts[tri[(k + 2) % 3]];
            let o = orient2d(a, b, q);
            o > 0.0 || (o == 0.0 && on_open_segment(a, b, q))
        } else {
            let [a, b, c] = tri.map(|v| self.pts[v]);
            incircle(a, b, c, q) > 0.0
        }
    }

    fn insert_all(&mut self) -> Result<()> {
        for idx in 0..self.pts.len() {
            if self.seed.contains(&idx) {
                continue;
            }
            self.insert(idx)?;
        }
        Ok(())
    }

    /// A live triangle in conflict with `q`; `None` when `q` repeats a vertex.
    fn locate_conflict(&self, q: Point) -> Option<usize> {
        let mut t = self.last;
        let limit = 4 * self.tris.len() + 16;
        for step in 0..limit {
            let tri = self.tris[t];
            let mut next = None;
            for kk in 0..3 {
                let k = (kk + step) % 3;
                let (a, b) = (self.pts[tri[(k + 1) % 3]], self.pts[tri[(k + 2) % 3]]);
                if orient2d(a, b, q) < 0.0 {
                    next = Some(self.nbrs[t][k]);
                    break;
                }
            }
            match next {
                Some(n) if self.is_ghost(n) => return Some(n),
                Some(n) => t = n,
                None => {
                    if tri.iter().any(|&v| self.pts[v] == q) {
                        return None;
                    }
                    return Some(t);
                }
            }
        }
        (0..self.tris.len()).find(|&s| self.alive[s] && self.conflicts(s, q))
    }

    fn insert(&mut self, idx: usize) -> Result<()> {
        let q = self.pts[idx];
        let seed = self
            .locate_conflict(q)
            .ok_or_else(|| Error::invalid(format!("duplicate point at index {idx}")))?;

        self.stamp = self.stamp.wrapping_add(1);
        let stamp = self.stamp;
        self.marks[seed] = (stamp, true);
        let mut stack = vec![seed];
        let mut cavity = Vec::new();
        // (cavity triangle, edge index, outer neighbour)
        let mut boundary: Vec<(usize, usize, usize)> = Vec::new();
        while let Some(t) = stack.pop() {
            cavity.push(t);
            for k in 0..3 {
                let n = self.nbrs[t][k];
                let (s, inside) = self.marks[n];
                let inside = if s == stamp {
                    inside
                } else {
                    let c = self.conflicts(n, q);
                    self.marks[n] = (stamp, c);
                    if c {
                        stack.push(n);
                    }
                    c
                };
                if !inside {
                    boundary.push((t, k, n));
                }
            }
        }

        let mut starts: HashMap<usize, usize> = HashMap::with_capacity(boundary.len());
        let mut ends: HashMap<usize, usize> = HashMap::with_capacity(boundary.len());
        let mut created = Vec::with_capacity(boundary.len());
        for &(t, k, outer) in &boundary {
            let u = self.tris[t][(k + 1) % 3];
            let v = self.tris[t][(k + 2) % 3];
            let nt = self.push([u, v, idx], [usize::MAX, usize::MAX, outer]);
            let slot = self.nbrs[outer]
                .iter()
                .position(|&x| x == t)
                .expect("outer triangle must reference the cavity");
            self.nbrs[outer][slot] = nt;
            if starts.insert(u, nt).is_some() || ends.insert(v, nt).is_some() {
                return Err(Error::degenerate("non star-shaped insertion cavity"));
            }
            created.push(nt);
        }
        for &nt in &created {
            let [u, v, _] = self.tris[nt];
            let after = *starts.get(&v).ok_or_else(|| Error::degenerate("open cavity"))?;
            let before = *ends.get(&u).ok_or_else(|| Error::degenerate("open cavity"))?;
            self.nbrs[nt][0] = after;
            self.nbrs[nt][1] = before;
        }
        for t in cavity {
            self.alive[t] = false;
        }
        if let Some(&real) = created.iter().find(|&&t| !self.is_ghost(t)) {
            self.last = real;
        }
        Ok(())
    }

    fn finish(self) -> Triangulation {
        let mut remap = vec![usize::MAX; self.tris.len()];
        let mut triangles = Vec::new();
        for (t, slot) in remap.iter_mut().enumerate() {
            if self.alive[t] && !self.is_ghost(t) {
                *slot = triangles.len();
                triangles.push(self.tris[t]);
            }
        }
        let neighbors: Vec<[Option<usize>; 3]> = (0..self.tris.len())
            .filter(|&t| remap[t] != usize::MAX)
            .map(|t| {
                self.nbrs[t].map(|n| {
                    let r = remap[n];
                    (r != usize::MAX).then_some(r)
                })
            })
            .collect();

        let nv = self.pts.len();
        let mut adj_sets: Vec<Vec<usize>> = vec![Vec::new(); nv];
        let mut inc_sets: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (u, v) = (tri[k], tri[(k + 1) % 3]);
                adj_sets[u].push(v);
                adj_sets[v].push(u);
                inc_sets[tri[k]].push(t);
            }
        }
        let (adj_offsets, adj) = flatten(adj_sets);
        let (inc_offsets, inc) = flatten(inc_sets);
        Triangulation {
            points: self.pts.to_vec(),
            triangles,
            neighbors,
            adj_offsets,
            adj,
            inc_offsets,
            inc,
        }
    }
}

fn flatten(mut sets: Vec<Vec<usize>>) -> (Vec<usize>, Vec<usize>) {
    let mut offsets = Vec::with_capacity(sets.len() + 1);
    let mut flat = Vec::new();
    offsets.push(0);
    for s in &mut sets {
        s.sort_unstable();
        s.dedup();
        flat.extend_from_slice(s);
        offsets.push(flat.len());
    }
    (offsets, flat)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(coords: &[(f64, f64)]) -> Vec<Point> {
        coords.iter().map(|&c| c.into()).collect()
    }

    #[test]
    fn unit_square() {
        let t = delaunay(&pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])).unwrap();
        assert_eq!(t.triangles().len(), 2);
        assert_eq!(t.edges().len(), 5);
        assert_eq!(t.hull_edges().len(), 4);
    }

    #[test]
    fn three_points_make_one_triangle() {
        let t = delaunay(&pts(&[(0.0, 0.0), (0.0, 3.0), (2.0, 0.0)])).unwrap();
        assert_eq!(t.triangles().len(), 1);
        let [a, b, c] = t.triangle_points(0);
        assert!(orient2d(a, b, c) > 0.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            delaunay(&pts(&[(0.0, 0.0), (1.0, 1.0)])),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            delaunay(&pts(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (5.0, 5.0)])),
            Err(Error::Degenerate(_))
        ));
        assert!(delaunay(&pts(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 0.0)])).is_err());
    }

    #[test]
    fn collinear_prefix_then_apex() {
        let t = delaunay(&pts(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0), (1.5, 2.0)]))
            .unwrap();
        assert_eq!(t.triangles().len(), 3);
    }

    #[test]
    fn hexagon_fan_adjacency() {
        let mut p = vec![Point::new(0.0, 0.0)];
        for k in 0..6 {
            let a = std::f64::consts::PI / 3.0 * k as f64;
            p.push(Point::new(10.0 * a.cos(), 10.0 * a.sin()));
        }
        let t = delaunay(&p).unwrap();
        assert_eq!(t.adjacency(0).unwrap(), (0..7).collect::<Vec<_>>());
        assert!(t.adjacency(7).is_err());
    }

    #[test]
    fn square_diagonal_endpoint_sees_everything() {
        let t = delaunay(&pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])).unwrap();
        let (u, v) = t
            .edges()
            .into_iter()
            .find(|&(u, v)| t.points()[u].distance(&t.points()[v]) > 1.1)
            .unwrap();
        assert_eq!(t.adjacency(u).unwrap().len(), 4);
        assert_eq!(t.adjacency(v).unwrap().len(), 4);
    }

    #[test]
    fn locate_centroids_and_outside() {
        let t = delaunay(&pts(&[
            (0.0, 0.0),
            (10.0, 0.0),
            (10.0, 10.0),
            (0.0, 10.0),
            (4.0, 6.0),
        ]))
        .unwrap();
        for s in 0..t.triangles().len() {
            let [a, b, c] = t.triangle_points(s);
            let g = Point::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0);
            assert_eq!(t.locate_triangle(g), Some(s));
        }
        assert_eq!(t.locate_triangle(Point::new(-1.0, 5.0)), None);
        assert_eq!(t.locate_triangle(Point::new(50.0, 50.0)), None);
        // a shared vertex resolves to its lowest incident triangle
        let v = Point::new(4.0, 6.0);
        assert_eq!(t.locate_triangle(v), t.incident_triangles(4).iter().copied().min());
    }

    #[test]
    fn integer_grid_is_valid() {
        let mut p = Vec::new();
        for y in 0..12 {
            for x in 0..12 {
                p.push(Point::new(x as f64, y as f64));
            }
        }
        let t = delaunay(&p).unwrap();
        // a 12x12 grid always has 2 * 11 * 11 triangles
        assert_eq!(t.triangles().len(), 242);
        for s in 0..t.triangles().len() {
            let [a, b, c] = t.triangle_points(s);
            assert!(orient2d(a, b, c) > 0.0);
            for q in &p {
                assert!(incircle(a, b, c, *q) <= 0.0);
            }
        }
    }
}

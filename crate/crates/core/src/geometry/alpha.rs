use std::collections::BTreeMap;

use super::delaunay::{delaunay, Triangulation};
use super::{polygon_area, Point};
use crate::error::{Error, Result};

/// Alpha complex of a point set: the Delaunay triangles with circumradius
/// at most `alpha`, with its boundary as directed edges (interior on the
/// left) and closed vertex loops.
#[derive(Clone, Debug)]
pub struct AlphaShape {
    alpha: f64,
    critical_alpha: f64,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<(usize, usize)>,
    loops: Vec<Vec<usize>>,
}

/// Alpha-shape boundary of distinct, non-collinear `points`.
///
/// `shrink` in `[0, 1]` interpolates over the sorted unique circumradii
/// between the convex hull (`0`) and the critical radius (`1`), the
/// smallest one for which the complex covers every point and is connected.
pub fn alpha_boundary(points: &[Point], shrink: f64) -> Result<AlphaShape> {
    let tri = delaunay(points)?;
    AlphaShape::from_triangulation(&tri, shrink)
}

impl AlphaShape {
    pub fn from_triangulation(tri: &Triangulation, shrink: f64) -> Result<AlphaShape> {
        if !(0.0..=1.0).contains(&shrink) {
            return Err(Error::invalid(format!("shrink must be in [0, 1], got {shrink}")));
        }
        let nt = tri.triangles().len();
        let radii: Vec<f64> = (0..nt).map(|t| tri.circumradius(t)).collect();
        let mut order: Vec<usize> = (0..nt).collect();
        order.sort_by(|&a, &b| radii[a].total_cmp(&radii[b]).then(a.cmp(&b)));

        let mut unique: Vec<f64> = order.iter().map(|&t| radii[t]).collect();
        unique.dedup();
        let critical = critical_index(tri, &order, &radii, &unique);
        let top = unique.len() - 1;
        let pick = critical + ((1.0 - shrink) * (top - critical) as f64).round() as usize;
        let alpha = unique[pick.min(top)];

        let included: Vec<bool> = radii.iter().map(|&r| r <= alpha).collect();
        let mut triangles = Vec::new();
        let mut boundary_edges = Vec::new();
        for t in 0..nt {
            if !included[t] {
                continue;
            }
            let v = tri.triangles()[t];
            triangles.push(v);
            for k in 0..3 {
                let outside = tri.neighbors(t)[k].map_or(true, |n| !included[n]);
                if outside {
                    boundary_edges.push((v[(k + 1) % 3], v[(k + 2) % 3]));
                }
            }
        }
        boundary_edges.sort_unstable();
        let loops = trace_loops(tri.points(), &boundary_edges);
        Ok(AlphaShape {
            alpha,
            critical_alpha: unique[critical],
            triangles,
            boundary_edges,
            loops,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn critical_alpha(&self) -> f64 {
        self.critical_alpha
    }

    /// Counter-clockwise triangles of the complex.
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Directed boundary edges, interior on the left, sorted.
    pub fn boundary_edges(&self) -> &[(usize, usize)] {
        &self.boundary_edges
    }

    /// Boundary loops as vertex cycles. Outer loops run counter-clockwise,
    /// loops around holes clockwise.
    pub fn loops(&self) -> &[Vec<usize>] {
        &self.loops
    }

    /// Area enclosed by the boundary (holes subtract).
    pub fn area(&self, points: &[Point]) -> f64 {
        self.loops
            .iter()
            .map(|l| polygon_area(&l.iter().map(|&v| points[v]).collect::<Vec<_>>()))
            .sum()
    }
}

/// Index into `unique` of the smallest radius at which all vertices are
/// covered and the included triangles form one edge-connected component.
fn critical_index(tri: &Triangulation, order: &[usize], radii: &[f64], unique: &[f64]) -> usize {
    let nt = order.len();
    let nv = tri.num_vertices();
    let mut parent: Vec<usize> = (0..nt).collect();
    let mut included = vec![false; nt];
    let mut covered = vec![false; nv];
    let mut covered_count = 0;
    let mut components = 0usize;
    let mut cursor = 0;

    for (u, &r) in unique.iter().enumerate() {
        while cursor < nt && radii[order[cursor]] <= r {
            let t = order[cursor];
            cursor += 1;
            included[t] = true;
            components += 1;
            for &v in &tri.triangles()[t] {
                if !covered[v] {
                    covered[v] = true;
                    covered_count += 1;
                }
            }
            for n in tri.neighbors(t).into_iter().flatten() {
                if included[n] && union(&mut parent, t, n) {
                    components -= 1;
                }
            }
        }
        if covered_count == nv && components == 1 {
            return u;
        }
    }
    unique.len() - 1
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn union(parent: &mut [usize], a: usize, b: usize) -> bool {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra == rb {
        return false;
    }
    parent[ra.max(rb)] = ra.min(rb);
    true
}

/// Chains directed edges into closed loops. At a vertex with several
/// outgoing edges the one first reached turning clockwise from the incoming
/// edge is taken, which keeps pinched loops separate.
fn trace_loops(points: &[Point], edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut outgoing: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, &(u, _)) in edges.iter().enumerate() {
        outgoing.entry(u).or_default().push(k);
    }
    let mut used = vec![false; edges.len()];
    let mut loops = Vec::new();
    for first in 0..edges.len() {
        if used[first] {
            continue;
        }
        let start = edges[first].0;
        let mut cycle = vec![start];
        let mut current = first;
        used[first] = true;
        loop {
            let (a, v) = edges[current];
            if v == start {
                break;
            }
            cycle.push(v);
            let back = angle(points[v], points[a]);
            let next = outgoing
                .get(&v)
                .into_iter()
                .flatten()
                .copied()
                .filter(|&e| !used[e])
                .min_by(|&e1, &e2| {
                    let c1 = clockwise_from(back, angle(points[v], points[edges[e1].1]));
                    let c2 = clockwise_from(back, angle(points[v], points[edges[e2].1]));
                    c1.total_cmp(&c2).then(e1.cmp(&e2))
                });
            match next {
                Some(e) => {
                    used[e] = true;
                    current = e;
                }
                None => break,
            }
        }
        loops.push(cycle);
    }
    loops
}

fn angle(from: Point, to: Point) -> f64 {
    (to.y - from.y).atan2(to.x - from.x)
}

/// Clockwise rotation in `(0, 2pi]` taking direction `from` to `to`.
fn clockwise_from(from: f64, to: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let d = (from - to).rem_euclid(tau);
    if d == 0.0 {
        tau
    } else {
        d
    }
}

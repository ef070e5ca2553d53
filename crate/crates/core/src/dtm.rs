//! Delaunay triangulation matching.
//!
//! The first stage alternates contraction and expansion: matches are
//! ranked, and each selected match removes every match that is a Delaunay
//! neighbour in only one of the two images; the survivors for the next
//! round are the matches that are neighbours in both images of some selected
//! match. The second stage walks back through the rounds and re-admits
//! discarded matches that fall inside corresponding triangles of the
//! retained matches in both images.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::predicates::in_triangle_any_orientation;
use crate::geometry::{build_dtm_boundary, convex_hull, delaunay, BoundaryMode, BoundarySet, Point, Triangulation};
use crate::keypoint::PairContext;
use crate::matches::{Match, MatchSet};

/// Which stages of the filter to run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Dtm1Only,
    #[default]
    Full,
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dtm1" | "dtm1_only" | "dtm1-only" => Ok(Stage::Dtm1Only),
            "full" | "dtm" | "dtm2" => Ok(Stage::Full),
            other => Err(Error::invalid(format!("unknown DTM stage '{other}'"))),
        }
    }
}

/// When the border points are computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    /// Once, from the input matches, and reused afterwards.
    #[default]
    FirstIteration,
    /// Recomputed from the survivors of every round.
    PerIteration,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DtmConfig {
    pub boundary_mode: BoundaryMode,
    pub stage: Stage,
    pub boundary_policy: BoundaryPolicy,
}

/// Keypoints of a match set rounded to integer vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct Collapse {
    pub vertices1: Vec<Point>,
    pub vertices2: Vec<Point>,
    /// `(v1, v2)` vertex pair of every match, in match order.
    pub pairs: Vec<(usize, usize)>,
}

/// Rounds keypoint coordinates half-up and merges coincident keypoints.
/// Vertices are numbered in ascending `(x, y)` order.
pub fn collapse(matches: &MatchSet, ctx: &PairContext) -> Result<Collapse> {
    check_indices(matches, ctx)?;
    let entries: Vec<&Match> = matches.iter().collect();
    Ok(collapse_entries(&entries, ctx))
}

fn collapse_entries(entries: &[&Match], ctx: &PairContext) -> Collapse {
    let side = |coords: Vec<(i64, i64)>| {
        let distinct: BTreeSet<(i64, i64)> = coords.iter().copied().collect();
        let index: BTreeMap<(i64, i64), usize> =
            distinct.into_iter().enumerate().map(|(k, c)| (c, k)).collect();
        let vertices: Vec<Point> = index.keys().map(|&(x, y)| Point::new(x as f64, y as f64)).collect();
        let ids: Vec<usize> = coords.iter().map(|c| index[c]).collect();
        (vertices, ids)
    };
    let (vertices1, ids1) = side(
        entries
            .iter()
            .map(|m| round(ctx.keypoints1[m.i].x, ctx.keypoints1[m.i].y))
            .collect(),
    );
    let (vertices2, ids2) = side(
        entries
            .iter()
            .map(|m| round(ctx.keypoints2[m.j].x, ctx.keypoints2[m.j].y))
            .collect(),
    );
    Collapse {
        vertices1,
        vertices2,
        pairs: ids1.into_iter().zip(ids2).collect(),
    }
}

#[inline]
fn round(x: f64, y: f64) -> (i64, i64) {
    ((x + 0.5).floor() as i64, (y + 0.5).floor() as i64)
}

fn check_indices(matches: &MatchSet, ctx: &PairContext) -> Result<()> {
    for m in matches {
        if m.i >= ctx.keypoints1.len() {
            return Err(Error::OutOfRange {
                index: m.i,
                len: ctx.keypoints1.len(),
            });
        }
        if m.j >= ctx.keypoints2.len() {
            return Err(Error::OutOfRange {
                index: m.j,
                len: ctx.keypoints2.len(),
            });
        }
    }
    Ok(())
}

/// Rounds of the first stage.
#[derive(Clone, Debug)]
pub struct DtmState {
    input: MatchSet,
    /// Surviving input positions per round, `rounds[0]` being every input.
    /// The last two rounds are equal.
    rounds: Vec<Vec<usize>>,
    pub boundary1: BoundarySet,
    pub boundary2: BoundarySet,
    config: DtmConfig,
}

impl DtmState {
    pub fn input(&self) -> &MatchSet {
        &self.input
    }

    /// Number of recorded sets `M^0 .. M^last`.
    pub fn num_rounds(&self) -> usize {
        self.rounds.len()
    }

    /// Input positions surviving round `k`, ascending.
    pub fn survivors(&self, k: usize) -> &[usize] {
        &self.rounds[k]
    }

    /// The set `M^k`, in input order.
    pub fn round(&self, k: usize) -> MatchSet {
        self.rounds[k].iter().map(|&p| self.input.entries()[p]).collect()
    }

    /// Cardinalities `|M^0|, |M^1|, ...`.
    pub fn sizes(&self) -> Vec<usize> {
        self.rounds.iter().map(Vec::len).collect()
    }

    /// Output of the first stage.
    pub fn output(&self) -> MatchSet {
        self.round(self.rounds.len() - 1)
    }
}

/// Per-round neighbourhood structure over the survivors.
struct Round<'a> {
    /// Survivor input positions.
    members: &'a [usize],
    pairs: Vec<(usize, usize)>,
    tri1: Triangulation,
    tri2: Triangulation,
    nv1: usize,
    nv2: usize,
    at1: Vec<Vec<usize>>,
    at2: Vec<Vec<usize>>,
}

impl Round<'_> {
    /// Real vertices adjacent to `v` (including `v`).
    fn neighbourhood(tri: &Triangulation, nv: usize, v: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(v).chain(tri.vertex_neighbors(v).iter().copied().filter(move |&u| u < nv))
    }

    /// `(intersection, symmetric difference)` of the neighbourhood match
    /// sets of a vertex pair, as local survivor positions.
    fn support(&self, (vl, vr): (usize, usize), marks: &mut Marks) -> (Vec<usize>, Vec<usize>) {
        marks.stamp += 1;
        let stamp = marks.stamp;
        for u in Self::neighbourhood(&self.tri1, self.nv1, vl) {
            marks.first[u] = stamp;
        }
        for u in Self::neighbourhood(&self.tri2, self.nv2, vr) {
            marks.second[u] = stamp;
        }
        let mut inside = Vec::new();
        let mut outside = Vec::new();
        for u in Self::neighbourhood(&self.tri1, self.nv1, vl) {
            for &k in &self.at1[u] {
                if marks.second[self.pairs[k].1] == stamp {
                    inside.push(k);
                } else {
                    outside.push(k);
                }
            }
        }
        for u in Self::neighbourhood(&self.tri2, self.nv2, vr) {
            for &k in &self.at2[u] {
                if marks.first[self.pairs[k].0] != stamp {
                    outside.push(k);
                }
            }
        }
        inside.sort_unstable();
        (inside, outside)
    }
}

/// Per-vertex visit stamps for both images.
struct Marks {
    first: Vec<u32>,
    second: Vec<u32>,
    stamp: u32,
}

/// Runs the contraction/expansion rounds to a fixed point.
pub fn dtm1(matches: &MatchSet, ctx: &PairContext, config: &DtmConfig) -> Result<DtmState> {
    check_indices(matches, ctx)?;
    let mut rounds: Vec<Vec<usize>> = vec![(0..matches.len()).collect()];
    let mut boundaries: Option<(BoundarySet, BoundarySet)> = None;
    loop {
        let current = rounds.last().expect("at least one round");
        let next = contract_expand(matches, ctx, config, current, &mut boundaries)?;
        let done = &next == current;
        rounds.push(next);
        if done {
            break;
        }
    }
    let (boundary1, boundary2) = boundaries.unwrap_or_else(|| {
        (
            BoundarySet::empty(ctx.width1.min(ctx.height1) / 10.0),
            BoundarySet::empty(ctx.width2.min(ctx.height2) / 10.0),
        )
    });
    Ok(DtmState {
        input: matches.clone(),
        rounds,
        boundary1,
        boundary2,
        config: *config,
    })
}

/// Whether the points admit a triangulation on their own.
fn triangulable(points: &[Point]) -> bool {
    points.len() >= 3 && convex_hull(points).is_ok()
}

fn with_boundary(v: &[Point], b: &BoundarySet) -> Vec<Point> {
    v.iter().chain(b.points.iter()).copied().collect()
}

fn triangulate_pair(p1: Vec<Point>, p2: Vec<Point>) -> Result<Option<(Triangulation, Triangulation)>> {
    let (t1, t2) = rayon::join(|| delaunay(&p1), || delaunay(&p2));
    match (t1, t2) {
        (Ok(a), Ok(b)) => Ok(Some((a, b))),
        (Err(Error::Degenerate(_)), _) | (_, Err(Error::Degenerate(_))) => Ok(None),
        (Err(e), _) | (_, Err(e)) => Err(e),
    }
}

fn contract_expand(
    matches: &MatchSet,
    ctx: &PairContext,
    config: &DtmConfig,
    members: &[usize],
    boundaries: &mut Option<(BoundarySet, BoundarySet)>,
) -> Result<Vec<usize>> {
    if members.is_empty() {
        return Ok(Vec::new());
    }
    let entries: Vec<&Match> = members.iter().map(|&p| &matches.entries()[p]).collect();
    let c = collapse_entries(&entries, ctx);
    if !triangulable(&c.vertices1) || !triangulable(&c.vertices2) {
        return Ok(Vec::new());
    }
    if boundaries.is_none() || config.boundary_policy == BoundaryPolicy::PerIteration {
        let b1 = build_dtm_boundary(&c.vertices1, ctx.width1, ctx.height1, config.boundary_mode)?;
        let b2 = build_dtm_boundary(&c.vertices2, ctx.width2, ctx.height2, config.boundary_mode)?;
        *boundaries = Some((b1, b2));
    }
    let (b1, b2) = boundaries.as_ref().expect("boundaries set above");
    let Some((tri1, tri2)) =
        triangulate_pair(with_boundary(&c.vertices1, b1), with_boundary(&c.vertices2, b2))?
    else {
        return Ok(Vec::new());
    };

    let (nv1, nv2) = (c.vertices1.len(), c.vertices2.len());
    let mut at1 = vec![Vec::new(); nv1];
    let mut at2 = vec![Vec::new(); nv2];
    for (k, &(a, b)) in c.pairs.iter().enumerate() {
        at1[a].push(k);
        at2[b].push(k);
    }
    let round = Round {
        members,
        pairs: c.pairs,
        tri1,
        tri2,
        nv1,
        nv2,
        at1,
        at2,
    };

    // neighbourhood support per distinct vertex pair
    let mut pair_ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut supports: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    let mut marks = Marks {
        first: vec![0; nv1],
        second: vec![0; nv2],
        stamp: 0,
    };
    let mut of_match = Vec::with_capacity(members.len());
    for &pair in &round.pairs {
        let id = *pair_ids.entry(pair).or_insert_with(|| {
            supports.push(round.support(pair, &mut marks));
            supports.len() - 1
        });
        of_match.push(id);
    }

    let mut ranked: Vec<usize> = (0..members.len()).collect();
    ranked.sort_by(|&a, &b| {
        let (ma, mb) = (entries[a], entries[b]);
        ma.score
            .total_cmp(&mb.score)
            .then(supports[of_match[b]].0.len().cmp(&supports[of_match[a]].0.len()))
            .then(ma.i.cmp(&mb.i))
            .then(ma.j.cmp(&mb.j))
            .then(a.cmp(&b))
    });

    let mut alive = vec![true; members.len()];
    let mut selected = Vec::new();
    for &k in &ranked {
        if !alive[k] {
            continue;
        }
        alive[k] = false;
        selected.push(k);
        for &other in &supports[of_match[k]].1 {
            alive[other] = false;
        }
    }

    let mut keep = vec![false; members.len()];
    for &k in &selected {
        for &other in &supports[of_match[k]].0 {
            keep[other] = true;
        }
    }
    Ok((0..members.len())
        .filter(|&k| keep[k])
        .map(|k| round.members[k])
        .collect())
}

/// Re-admits matches discarded by the first stage, walking the rounds
/// backwards. Returns the enhanced set in input order.
pub fn dtm2(state: &DtmState, ctx: &PairContext) -> Result<MatchSet> {
    check_indices(&state.input, ctx)?;
    let last = state.rounds.len() - 1;
    let mut accepted = vec![false; state.input.len()];
    for &p in &state.rounds[last] {
        accepted[p] = true;
    }
    if state.rounds[last].is_empty() {
        return Ok(MatchSet::new());
    }
    let (b1, b2) = (&state.boundary1, &state.boundary2);
    let to2 = nearest_map(&b1.points, &b2.points, ctx.width2 / ctx.width1, ctx.height2 / ctx.height1);
    let to1 = nearest_map(&b2.points, &b1.points, ctx.width1 / ctx.width2, ctx.height1 / ctx.height2);

    for j in (1..=last).rev() {
        let prev = &state.rounds[j - 1];
        let cur = &state.rounds[j];
        let candidates: Vec<usize> = prev.iter().copied().filter(|p| cur.binary_search(p).is_err()).collect();
        if candidates.is_empty() {
            continue;
        }
        let members: Vec<usize> = (0..state.input.len()).filter(|&p| accepted[p]).collect();
        let entries: Vec<&Match> = members.iter().map(|&p| &state.input.entries()[p]).collect();
        let c = collapse_entries(&entries, ctx);
        let Some((tri1, tri2)) =
            triangulate_pair(with_boundary(&c.vertices1, b1), with_boundary(&c.vertices2, b2))?
        else {
            continue;
        };
        let (nv1, nv2) = (c.vertices1.len(), c.vertices2.len());
        // vertex correspondences, as vertex indices of the other triangulation
        let mut corr1: Vec<Vec<usize>> = vec![Vec::new(); tri1.num_vertices()];
        let mut corr2: Vec<Vec<usize>> = vec![Vec::new(); tri2.num_vertices()];
        for &(a, b) in &c.pairs {
            corr1[a].push(b);
            corr2[b].push(a);
        }
        for (k, &t) in to2.iter().enumerate() {
            corr1[nv1 + k].extend(t.map(|t| nv2 + t));
        }
        for (k, &t) in to1.iter().enumerate() {
            corr2[nv2 + k].extend(t.map(|t| nv1 + t));
        }
        for list in corr1.iter_mut().chain(corr2.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }

        let mut admitted = Vec::new();
        for &p in &candidates {
            let m = &state.input.entries()[p];
            let k1 = &ctx.keypoints1[m.i];
            let k2 = &ctx.keypoints2[m.j];
            let p1 = Point::new(k1.x, k1.y);
            let p2 = Point::new(k2.x, k2.y);
            if transfers(&tri1, &corr1, &tri2, p1, p2) && transfers(&tri2, &corr2, &tri1, p2, p1) {
                admitted.push(p);
            }
        }
        for p in admitted {
            accepted[p] = true;
        }
    }
    Ok((0..state.input.len())
        .filter(|&p| accepted[p])
        .map(|p| state.input.entries()[p])
        .collect())
}

/// Whether `q` lies in a triangle of `dst` spanned by correspondences of
/// the vertices of the `src` triangle containing `p`.
fn transfers(src: &Triangulation, corr: &[Vec<usize>], dst: &Triangulation, p: Point, q: Point) -> bool {
    let Some(t) = src.locate_triangle(p) else {
        return false;
    };
    let [a, b, c] = src.triangles()[t];
    let pts = dst.points();
    for &x in &corr[a] {
        for &y in &corr[b] {
            for &z in &corr[c] {
                if in_triangle_any_orientation(pts[x], pts[y], pts[z], q) {
                    return true;
                }
            }
        }
    }
    false
}

/// For every point of `from`, the index of the nearest point of `to` after
/// scaling by `(sx, sy)`; ties go to the lowest index.
fn nearest_map(from: &[Point], to: &[Point], sx: f64, sy: f64) -> Vec<Option<usize>> {
    from.iter()
        .map(|p| {
            let q = Point::new(p.x * sx, p.y * sy);
            to.iter()
                .enumerate()
                .min_by(|(ka, a), (kb, b)| a.distance(&q).total_cmp(&b.distance(&q)).then(ka.cmp(kb)))
                .map(|(k, _)| k)
        })
        .collect()
}

/// The full filter: first stage, then regrowth unless `config.stage` stops
/// after the first stage.
pub fn dtm(matches: &MatchSet, ctx: &PairContext, config: &DtmConfig) -> Result<MatchSet> {
    let state = dtm1(matches, ctx, config)?;
    match config.stage {
        Stage::Dtm1Only => Ok(state.output()),
        Stage::Full => dtm2(&state, ctx),
    }
}

impl DtmState {
    pub fn config(&self) -> &DtmConfig {
        &self.config
    }
}

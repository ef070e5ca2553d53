//! Blob matching: rank pre-filtering, greedy many-to-many selection,
//! NNR-like scoring with FGINN, and symmetric score combination.
//!
//! The stages compose as
//!
//! 1. [`prefilter`] keeps `(i, j)` when `D[i][j]` is among the `f` best of its
//!    row and/or column,
//! 2. [`greedy_select`] walks the survivors by increasing distance and keeps a
//!    pair while neither keypoint exceeds `f_prime` associations,
//! 3. [`nnr_score`] rescores every kept pair with each image as reference,
//! 4. [`combine`] merges the two scores; [`blob_match`] sorts (and optionally
//!    thresholds) by the merged score.

use std::fmt;
use std::num::NonZeroUsize;

use rayon::prelude::*;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::distance::{Axis, DistanceMatrix};
use crate::error::{Error, Result};
use crate::keypoint::{Keypoint, PairContext};
use crate::matches::{Match, MatchSet};
use crate::model::overlap::{bounding_boxes_disjoint, ellipse_overlap_error};

/// Pre-filter rank `f`. `Omega` stands for `max(n, m)`, which keeps every
/// entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrefilterRank {
    Rank(NonZeroUsize),
    Omega,
}

impl PrefilterRank {
    pub fn rank(f: usize) -> Result<Self> {
        NonZeroUsize::new(f)
            .map(PrefilterRank::Rank)
            .ok_or_else(|| Error::invalid("pre-filter rank must be >= 1"))
    }

    fn resolve(self, d: &DistanceMatrix) -> usize {
        match self {
            PrefilterRank::Rank(f) => f.get(),
            PrefilterRank::Omega => d.rows().max(d.cols()),
        }
    }
}

impl Serialize for PrefilterRank {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PrefilterRank::Rank(f) => s.serialize_u64(f.get() as u64),
            PrefilterRank::Omega => s.serialize_str("omega"),
        }
    }
}

impl<'de> Deserialize<'de> for PrefilterRank {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct RankVisitor;

        impl Visitor<'_> for RankVisitor {
            type Value = PrefilterRank;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a positive integer or \"omega\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Self::Value, E> {
                NonZeroUsize::new(v as usize)
                    .map(PrefilterRank::Rank)
                    .ok_or_else(|| E::custom("pre-filter rank must be >= 1"))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Self::Value, E> {
                if v < 1 {
                    return Err(E::custom("pre-filter rank must be >= 1"));
                }
                self.visit_u64(v as u64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
                if v.eq_ignore_ascii_case("omega") {
                    Ok(PrefilterRank::Omega)
                } else {
                    Err(E::custom(format!("unknown pre-filter rank {v:?}")))
                }
            }
        }

        d.deserialize_any(RankVisitor)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefilterMode {
    /// Among the `f` best of both its row and its column.
    Intersection,
    /// Among the `f` best of its row or its column.
    Union,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreVariant {
    /// `D_ij / D_2nd>=`, second value restricted to entries `>= D_ij`.
    DGe,
    /// `D_ij / (D_ij + D_2nd>=)`.
    DPlusGe,
    /// `D_ij / (D_ij + D_2nd)` over the whole line.
    DPlus,
}

impl ScoreVariant {
    fn degenerate_score(self) -> f64 {
        match self {
            ScoreVariant::DGe => 1.0,
            ScoreVariant::DPlusGe | ScoreVariant::DPlus => 0.5,
        }
    }
}

/// Geometric restriction on the second-best candidate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fginn {
    None,
    /// Candidate centers must be at least this many pixels away.
    Pixels(f64),
    /// Candidate patches must have at least this overlap error.
    Overlap(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combiner {
    First,
    Second,
    Min,
    Max,
    Harmonic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reference {
    FirstImage,
    SecondImage,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobConfig {
    pub f: PrefilterRank,
    pub f_mode: PrefilterMode,
    pub f_prime: NonZeroUsize,
    pub score_variant: ScoreVariant,
    pub fginn: Fginn,
    pub combiner: Combiner,
    #[serde(default)]
    pub threshold: Option<f64>,
}

impl BlobConfig {
    /// One-to-one greedy NNR: `f = Omega`, `f' = 1`, `D>=`, no FGINN, first
    /// image as reference.
    pub fn baseline() -> Self {
        BlobConfig {
            f: PrefilterRank::Omega,
            f_mode: PrefilterMode::Union,
            f_prime: NonZeroUsize::MIN,
            score_variant: ScoreVariant::DGe,
            fginn: Fginn::None,
            combiner: Combiner::First,
            threshold: None,
        }
    }

    /// `f = 10 (union)`, `f' = 5`, `D+`, overlap FGINN at 0.75, harmonic mean.
    pub fn best() -> Self {
        BlobConfig {
            f: PrefilterRank::Rank(NonZeroUsize::new(10).unwrap()),
            f_mode: PrefilterMode::Union,
            f_prime: NonZeroUsize::new(5).unwrap(),
            score_variant: ScoreVariant::DPlus,
            fginn: Fginn::Overlap(0.75),
            combiner: Combiner::Harmonic,
            threshold: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.fginn {
            Fginn::Pixels(t) if !(t > 0.0 && t.is_finite()) => {
                return Err(Error::invalid("FGINN pixel threshold must be > 0"));
            }
            Fginn::Overlap(t) if !(0.0..=1.0).contains(&t) => {
                return Err(Error::invalid("FGINN overlap threshold must be in [0, 1]"));
            }
            _ => {}
        }
        if let Some(t) = self.threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::invalid("score threshold must be in [0, 1]"));
            }
        }
        Ok(())
    }
}

impl Default for BlobConfig {
    fn default() -> Self {
        Self::best()
    }
}

/// Boolean `n x m` mask of pairs surviving the pre-filter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateMask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl CandidateMask {
    pub fn full(rows: usize, cols: usize) -> Self {
        CandidateMask {
            rows,
            cols,
            bits: vec![true; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Surviving pairs in row-major order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.rows {
            for j in 0..self.cols {
                if self.get(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

pub fn prefilter(d: &DistanceMatrix, f: PrefilterRank, mode: PrefilterMode) -> CandidateMask {
    let (n, m) = (d.rows(), d.cols());
    let rank = f.resolve(d);
    if rank >= n.max(m) {
        return CandidateMask::full(n, m);
    }
    let row_bound = d.kth_best_all(Axis::Row, rank);
    let col_bound = d.kth_best_all(Axis::Column, rank);
    let mut bits = Vec::with_capacity(n * m);
    for (i, bound) in row_bound.iter().enumerate() {
        for (j, v) in d.row(i).iter().enumerate() {
            let by_row = v <= bound;
            let by_col = *v <= col_bound[j];
            bits.push(match mode {
                PrefilterMode::Intersection => by_row && by_col,
                PrefilterMode::Union => by_row || by_col,
            });
        }
    }
    CandidateMask {
        rows: n,
        cols: m,
        bits,
    }
}

/// Greedy selection over masked entries in ascending distance (ties by row,
/// then column), keeping at most `f_prime` matches per keypoint. Scores are
/// the raw distances.
pub fn greedy_select(d: &DistanceMatrix, mask: &CandidateMask, f_prime: usize) -> Result<MatchSet> {
    if mask.shape() != (d.rows(), d.cols()) {
        return Err(Error::invalid("mask shape does not match the distance matrix"));
    }
    if f_prime == 0 {
        return Err(Error::invalid("f_prime must be >= 1"));
    }
    let mut candidates: Vec<(f64, u32, u32)> = Vec::with_capacity(mask.count());
    for i in 0..d.rows() {
        for (j, v) in d.row(i).iter().enumerate() {
            if mask.get(i, j) {
                candidates.push((*v, i as u32, j as u32));
            }
        }
    }
    candidates.sort_unstable_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut row_used = vec![0usize; d.rows()];
    let mut col_used = vec![0usize; d.cols()];
    let mut out = MatchSet::new();
    for (v, i, j) in candidates {
        let (i, j) = (i as usize, j as usize);
        if row_used[i] < f_prime && col_used[j] < f_prime {
            row_used[i] += 1;
            col_used[j] += 1;
            out.push(Match::new(i, j, v));
        }
    }
    Ok(out)
}

/// NNR-like score of `m` with the first or second image as reference.
pub fn nnr_score(
    d: &DistanceMatrix,
    m: &Match,
    variant: ScoreVariant,
    fginn: Fginn,
    ctx: &PairContext,
    reference: Reference,
) -> Result<f64> {
    if m.i >= d.rows() || m.j >= d.cols() {
        return Err(Error::OutOfRange {
            index: m.i.max(m.j),
            len: d.rows().max(d.cols()),
        });
    }
    ctx.check_shape(d.rows(), d.cols())?;
    match reference {
        Reference::FirstImage => line_score(d.row(m.i), m.j, variant, fginn, &ctx.keypoints2),
        Reference::SecondImage => {
            let column: Vec<f64> = (0..d.rows()).map(|i| d.get(i, m.j)).collect();
            line_score(&column, m.i, variant, fginn, &ctx.keypoints1)
        }
    }
}

pub fn combine(a: f64, b: f64, combiner: Combiner) -> f64 {
    match combiner {
        Combiner::First => a,
        Combiner::Second => b,
        Combiner::Min => a.min(b),
        Combiner::Max => a.max(b),
        Combiner::Harmonic => {
            if a + b == 0.0 {
                0.0
            } else {
                2.0 * a * b / (a + b)
            }
        }
    }
}

/// Full blob matching. The result is sorted by the combined score
/// (ascending, stable with respect to greedy insertion order).
pub fn blob_match(d: &DistanceMatrix, ctx: &PairContext, cfg: &BlobConfig) -> Result<MatchSet> {
    cfg.validate()?;
    ctx.check_shape(d.rows(), d.cols())?;

    let mask = prefilter(d, cfg.f, cfg.f_mode);
    let selected = greedy_select(d, &mask, cfg.f_prime.get())?;
    let dt = d.transpose();

    let scores: Vec<f64> = selected
        .entries()
        .par_iter()
        .map(|m| {
            let a = line_score(d.row(m.i), m.j, cfg.score_variant, cfg.fginn, &ctx.keypoints2)?;
            let b = line_score(dt.row(m.j), m.i, cfg.score_variant, cfg.fginn, &ctx.keypoints1)?;
            Ok(combine(a, b, cfg.combiner))
        })
        .collect::<Result<_>>()?;

    let mut out: MatchSet = selected
        .iter()
        .zip(scores)
        .map(|(m, s)| Match::new(m.i, m.j, s))
        .collect();
    out.sort_by_score();
    if let Some(t) = cfg.threshold {
        out = out.filtered(|_, m| m.score <= t);
    }
    Ok(out)
}

/// Scores entry `own` of one row (or column, via the transpose) of D.
/// `keypoints` are the keypoints indexed along the line.
fn line_score(
    line: &[f64],
    own: usize,
    variant: ScoreVariant,
    fginn: Fginn,
    keypoints: &[Keypoint],
) -> Result<f64> {
    let value = line[own];
    let admissible = Admissibility::new(fginn, keypoints, own)?;
    let score = match variant {
        ScoreVariant::DGe | ScoreVariant::DPlusGe => {
            let Some(next) = smallest_admissible(line, own, Some(value), &admissible)?.0 else {
                return Ok(variant.degenerate_score());
            };
            let denom = if variant == ScoreVariant::DGe {
                next
            } else {
                value + next
            };
            if denom == 0.0 {
                return Ok(variant.degenerate_score());
            }
            value / denom
        }
        ScoreVariant::DPlus => {
            let (a1, a2) = smallest_admissible(line, own, None, &admissible)?;
            let mut pool: Vec<f64> = [Some(value), a1, a2].into_iter().flatten().collect();
            if pool.len() < 2 {
                return Ok(variant.degenerate_score());
            }
            pool.sort_by(f64::total_cmp);
            let denom = value + pool[1];
            if denom == 0.0 {
                return Ok(variant.degenerate_score());
            }
            value / denom
        }
    };
    Ok(score)
}

/// FGINN admissibility of candidates relative to the line's own keypoint.
enum Admissibility<'a> {
    All,
    Pixels {
        keypoints: &'a [Keypoint],
        own: &'a Keypoint,
        min_distance: f64,
    },
    Overlap {
        keypoints: &'a [Keypoint],
        own: &'a Keypoint,
        min_error: f64,
    },
}

impl<'a> Admissibility<'a> {
    fn new(fginn: Fginn, keypoints: &'a [Keypoint], own: usize) -> Result<Self> {
        Ok(match fginn {
            Fginn::None => Admissibility::All,
            Fginn::Pixels(t) => Admissibility::Pixels {
                keypoints,
                own: &keypoints[own],
                min_distance: t,
            },
            Fginn::Overlap(t) => {
                if keypoints.iter().any(|k| k.ellipse.is_none()) {
                    return Err(Error::invalid(
                        "overlap FGINN requires elliptical patches on every keypoint",
                    ));
                }
                Admissibility::Overlap {
                    keypoints,
                    own: &keypoints[own],
                    min_error: t,
                }
            }
        })
    }

    /// `Some(answer)` when decidable without sampling patches.
    fn cheap(&self, k: usize) -> Option<bool> {
        match self {
            Admissibility::All => Some(true),
            Admissibility::Pixels {
                keypoints,
                own,
                min_distance,
            } => Some(keypoints[k].distance_to(own) >= *min_distance),
            Admissibility::Overlap {
                keypoints,
                own,
                min_error,
            } => {
                if *min_error <= 0.0 {
                    Some(true)
                } else if bounding_boxes_disjoint(&keypoints[k], own, 1.0) {
                    // disjoint patches have overlap error 1
                    Some(true)
                } else {
                    None
                }
            }
        }
    }

    fn exact(&self, k: usize) -> bool {
        match self {
            Admissibility::Overlap {
                keypoints,
                own,
                min_error,
            } => {
                let (a, b) = (&keypoints[k], *own);
                let err = ellipse_overlap_error(a, b, 1.0)
                    .expect("ellipses validated with the pair context");
                err >= *min_error
            }
            _ => self.cheap(k).unwrap_or(true),
        }
    }
}

/// The two smallest admissible values among entries other than `own`,
/// optionally restricted to values `>= lower`.
fn smallest_admissible(
    line: &[f64],
    own: usize,
    lower: Option<f64>,
    adm: &Admissibility<'_>,
) -> Result<(Option<f64>, Option<f64>)> {
    let mut best: [Option<f64>; 2] = [None, None];
    let mut deferred: Vec<(f64, usize)> = Vec::new();

    let insert = |best: &mut [Option<f64>; 2], v: f64| {
        if best[0].map_or(true, |b| v < b) {
            best[1] = best[0];
            best[0] = Some(v);
        } else if best[1].map_or(true, |b| v < b) {
            best[1] = Some(v);
        }
    };

    for (k, &v) in line.iter().enumerate() {
        if k == own || lower.is_some_and(|lo| v < lo) {
            continue;
        }
        if best[1].is_some_and(|b| v >= b) {
            continue;
        }
        match adm.cheap(k) {
            Some(true) => insert(&mut best, v),
            Some(false) => {}
            None => deferred.push((v, k)),
        }
    }

    deferred.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (v, k) in deferred {
        if best[1].is_some_and(|b| v >= b) {
            break;
        }
        if adm.exact(k) {
            insert(&mut best, v);
        }
    }
    Ok((best[0], best[1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_matrix() -> DistanceMatrix {
        DistanceMatrix::from_rows(&[
            vec![1.6, 2.5, 1.0, 4.0, 2.3],
            vec![4.2, 0.5, 1.7, 3.0, 1.1],
            vec![5.1, 3.5, 3.1, 1.2, 2.0],
            vec![2.8, 0.6, 2.1, 4.1, 5.0],
            vec![4.4, 3.4, 2.4, 4.3, 4.5],
            vec![3.2, 5.5, 5.8, 6.1, 3.6],
            vec![1.3, 6.0, 3.7, 2.7, 1.4],
        ])
        .unwrap()
    }

    fn grid_ctx(n: usize, m: usize) -> PairContext {
        let kps = |count: usize| {
            (0..count)
                .map(|k| Keypoint::new(10.0 * k as f64, 0.0))
                .collect::<Vec<_>>()
        };
        PairContext::new(kps(n), kps(m), (100.0, 100.0), (100.0, 100.0)).unwrap()
    }

    fn one_based(set: &MatchSet) -> Vec<(usize, usize)> {
        set.pairs().into_iter().map(|(i, j)| (i + 1, j + 1)).collect()
    }

    fn rank(f: usize) -> PrefilterRank {
        PrefilterRank::rank(f).unwrap()
    }

    #[test]
    fn prefilter_f1_intersection_is_mutual_nn() {
        let d = example_matrix();
        let mask = prefilter(&d, rank(1), PrefilterMode::Intersection);
        let mut pairs: Vec<_> = mask.pairs().into_iter().map(|(i, j)| (i + 1, j + 1)).collect();
        pairs.sort();
        assert_eq!(pairs, vec![(1, 3), (2, 2), (3, 4), (7, 1)]);
    }

    #[test]
    fn prefilter_omega_keeps_everything() {
        let d = example_matrix();
        assert_eq!(prefilter(&d, PrefilterRank::Omega, PrefilterMode::Intersection).count(), 35);
        assert_eq!(prefilter(&d, rank(7), PrefilterMode::Intersection).count(), 35);
    }

    #[test]
    fn prefilter_f1_union_is_row_nn_or_column_nn() {
        let d = example_matrix();
        let mut pairs: Vec<_> = prefilter(&d, rank(1), PrefilterMode::Union)
            .pairs()
            .into_iter()
            .map(|(i, j)| (i + 1, j + 1))
            .collect();
        pairs.sort();
        let mut expected = vec![(1, 3), (2, 2), (3, 4), (4, 2), (5, 3), (6, 1), (7, 1), (2, 5)];
        expected.sort();
        assert_eq!(pairs, expected);
    }

    #[test]
    fn greedy_matches_listed_orders() {
        let d = example_matrix();
        let g = |f: PrefilterRank, mode, fp| {
            one_based(&greedy_select(&d, &prefilter(&d, f, mode), fp).unwrap())
        };
        assert_eq!(
            g(PrefilterRank::Omega, PrefilterMode::Union, 1),
            vec![(2, 2), (1, 3), (3, 4), (7, 1), (6, 5)]
        );
        assert_eq!(
            g(rank(1), PrefilterMode::Union, 2),
            vec![(2, 2), (4, 2), (1, 3), (2, 5), (3, 4), (7, 1), (5, 3), (6, 1)]
        );
        let omega2 = g(PrefilterRank::Omega, PrefilterMode::Union, 2);
        assert_eq!(omega2.len(), 10);
        assert_eq!(&omega2[8..], &[(4, 3), (5, 4)]);
    }

    #[test]
    fn greedy_rejects_bad_arguments() {
        let d = example_matrix();
        assert!(greedy_select(&d, &CandidateMask::full(2, 2), 1).is_err());
        assert!(greedy_select(&d, &CandidateMask::full(7, 5), 0).is_err());
    }

    #[test]
    fn nnr_scores_on_example_row() {
        let d = example_matrix();
        let ctx = grid_ctx(7, 5);
        let m = Match::new(0, 2, 1.0);
        let ge = nnr_score(&d, &m, ScoreVariant::DGe, Fginn::None, &ctx, Reference::FirstImage)
            .unwrap();
        assert!((ge - 0.625).abs() < 1e-12);
        let plus = nnr_score(&d, &m, ScoreVariant::DPlus, Fginn::None, &ctx, Reference::FirstImage)
            .unwrap();
        assert!((plus - 1.0 / 2.6).abs() < 1e-12);
        let plus_ge =
            nnr_score(&d, &m, ScoreVariant::DPlusGe, Fginn::None, &ctx, Reference::FirstImage)
                .unwrap();
        assert!((plus_ge - 1.0 / 2.6).abs() < 1e-12);
        // column 3 (1-based) = {1, 1.7, 3.1, 2.1, 2.4, 5.8, 3.7}
        let col = nnr_score(&d, &m, ScoreVariant::DGe, Fginn::None, &ctx, Reference::SecondImage)
            .unwrap();
        assert!((col - 1.0 / 1.7).abs() < 1e-12);
    }

    #[test]
    fn ge_variant_uses_values_above_the_match() {
        // the match is not the row minimum; D>= looks only upward
        let d = DistanceMatrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let ctx = grid_ctx(1, 3);
        let m = Match::new(0, 1, 2.0);
        let ge = nnr_score(&d, &m, ScoreVariant::DGe, Fginn::None, &ctx, Reference::FirstImage)
            .unwrap();
        assert!((ge - 2.0 / 3.0).abs() < 1e-12);
        let plus = nnr_score(&d, &m, ScoreVariant::DPlus, Fginn::None, &ctx, Reference::FirstImage)
            .unwrap();
        assert!((plus - 2.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn constant_row_scores_one() {
        let d = DistanceMatrix::from_rows(&[vec![3.0, 3.0, 3.0]]).unwrap();
        let ctx = grid_ctx(1, 3);
        let s = nnr_score(&d, &Match::new(0, 1, 3.0), ScoreVariant::DGe, Fginn::None, &ctx, Reference::FirstImage)
            .unwrap();
        assert_eq!(s, 1.0);
    }

    #[test]
    fn degenerate_denominators() {
        let d = DistanceMatrix::from_rows(&[vec![5.0]]).unwrap();
        let ctx = grid_ctx(1, 1);
        let m = Match::new(0, 0, 5.0);
        for (variant, expected) in [
            (ScoreVariant::DGe, 1.0),
            (ScoreVariant::DPlusGe, 0.5),
            (ScoreVariant::DPlus, 0.5),
        ] {
            let s = nnr_score(&d, &m, variant, Fginn::None, &ctx, Reference::FirstImage).unwrap();
            assert_eq!(s, expected);
        }
        // all candidates geometrically excluded
        let d = DistanceMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let kps1 = vec![Keypoint::new(0.0, 0.0)];
        let kps2 = vec![Keypoint::new(0.0, 0.0), Keypoint::new(1.0, 0.0)];
        let ctx = PairContext::new(kps1, kps2, (10.0, 10.0), (10.0, 10.0)).unwrap();
        let s = nnr_score(&d, &Match::new(0, 0, 1.0), ScoreVariant::DGe, Fginn::Pixels(5.0), &ctx, Reference::FirstImage)
            .unwrap();
        assert_eq!(s, 1.0);
    }

    #[test]
    fn fginn_pixels_skips_nearby_candidates() {
        // row: own=1.0 at x=0, 1.2 at x=3 (too close), 2.0 at x=50
        let d = DistanceMatrix::from_rows(&[vec![1.0, 1.2, 2.0]]).unwrap();
        let kps1 = vec![Keypoint::new(0.0, 0.0)];
        let kps2 = vec![
            Keypoint::new(0.0, 0.0),
            Keypoint::new(3.0, 0.0),
            Keypoint::new(50.0, 0.0),
        ];
        let ctx = PairContext::new(kps1, kps2, (100.0, 100.0), (100.0, 100.0)).unwrap();
        let m = Match::new(0, 0, 1.0);
        let plain = nnr_score(&d, &m, ScoreVariant::DGe, Fginn::None, &ctx, Reference::FirstImage)
            .unwrap();
        let fg = nnr_score(&d, &m, ScoreVariant::DGe, Fginn::Pixels(10.0), &ctx, Reference::FirstImage)
            .unwrap();
        assert!((plain - 1.0 / 1.2).abs() < 1e-12);
        assert!((fg - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fginn_overlap_skips_overlapping_patches() {
        let circle = |r| crate::keypoint::Ellipse::circle(r).unwrap();
        let d = DistanceMatrix::from_rows(&[vec![1.0, 1.2, 2.0]]).unwrap();
        let kps1 = vec![Keypoint::new(0.0, 0.0).with_ellipse(circle(5.0))];
        let kps2 = vec![
            Keypoint::new(0.0, 0.0).with_ellipse(circle(5.0)),
            Keypoint::new(1.0, 0.0).with_ellipse(circle(5.0)),
            Keypoint::new(50.0, 0.0).with_ellipse(circle(5.0)),
        ];
        let ctx = PairContext::new(kps1, kps2, (100.0, 100.0), (100.0, 100.0)).unwrap();
        let m = Match::new(0, 0, 1.0);
        let fg = nnr_score(&d, &m, ScoreVariant::DGe, Fginn::Overlap(0.75), &ctx, Reference::FirstImage)
            .unwrap();
        assert!((fg - 0.5).abs() < 1e-12);
        // without ellipses the overlap mode is an error
        let bare = grid_ctx(1, 3);
        assert!(nnr_score(&d, &m, ScoreVariant::DGe, Fginn::Overlap(0.75), &bare, Reference::FirstImage).is_err());
    }

    #[test]
    fn combiners() {
        assert!((combine(0.4, 0.4, Combiner::Harmonic) - 0.4).abs() < 1e-15);
        assert!((combine(0.2, 0.6, Combiner::Harmonic) - 0.3).abs() < 1e-15);
        assert_eq!(combine(0.2, 0.6, Combiner::Min), 0.2);
        assert_eq!(combine(0.2, 0.6, Combiner::Max), 0.6);
        assert_eq!(combine(0.2, 0.6, Combiner::First), 0.2);
        assert_eq!(combine(0.2, 0.6, Combiner::Second), 0.6);
        assert_eq!(combine(0.0, 0.0, Combiner::Harmonic), 0.0);
    }

    #[test]
    fn blob_match_f1_intersection_gives_mutual_nn() {
        let d = example_matrix();
        let ctx = grid_ctx(7, 5);
        let cfg = BlobConfig {
            f: rank(1),
            f_mode: PrefilterMode::Intersection,
            ..BlobConfig::baseline()
        };
        let mut pairs = one_based(&blob_match(&d, &ctx, &cfg).unwrap());
        pairs.sort();
        assert_eq!(pairs, vec![(1, 3), (2, 2), (3, 4), (7, 1)]);
    }

    #[test]
    fn blob_match_baseline_threshold() {
        let d = example_matrix();
        let ctx = grid_ctx(7, 5);
        let cfg = BlobConfig {
            threshold: Some(0.8),
            ..BlobConfig::baseline()
        };
        let out = blob_match(&d, &ctx, &cfg).unwrap();
        let all = blob_match(&d, &ctx, &BlobConfig::baseline()).unwrap();
        assert_eq!(all.len(), 5);
        for m in all.iter() {
            let expected = d.get(m.i, m.j)
                / d.row(m.i)
                    .iter()
                    .enumerate()
                    .filter(|(k, v)| *k != m.j && **v >= d.get(m.i, m.j))
                    .map(|(_, v)| *v)
                    .fold(f64::INFINITY, f64::min);
            assert!((m.score - expected).abs() < 1e-12);
            assert_eq!(out.contains_pair(m.i, m.j), m.score <= 0.8);
        }
        assert!(out.iter().zip(out.iter().skip(1)).all(|(a, b)| a.score <= b.score));
    }

    #[test]
    fn single_entry_matrix() {
        let d = DistanceMatrix::from_rows(&[vec![5.0]]).unwrap();
        let ctx = grid_ctx(1, 1);
        let out = blob_match(&d, &ctx, &BlobConfig::baseline()).unwrap();
        assert_eq!(out.pairs(), vec![(0, 0)]);
        assert_eq!(out.entries()[0].score, 1.0);
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = BlobConfig::best();
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"f\":10"));
        assert!(text.contains("\"overlap\":0.75"));
        let back: BlobConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let omega: BlobConfig = serde_json::from_str(
            r#"{"f":"omega","f_mode":"union","f_prime":1,"score_variant":"d_ge","fginn":"none","combiner":"first"}"#,
        )
        .unwrap();
        assert_eq!(omega, BlobConfig::baseline());
        assert!(serde_json::from_str::<BlobConfig>(r#"{"f":0,"f_mode":"union","f_prime":1,"score_variant":"d_ge","fginn":"none","combiner":"first"}"#).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = BlobConfig::best();
        cfg.fginn = Fginn::Overlap(1.5);
        assert!(cfg.validate().is_err());
        cfg.fginn = Fginn::Pixels(0.0);
        assert!(cfg.validate().is_err());
        cfg.fginn = Fginn::Pixels(10.0);
        assert!(cfg.validate().is_ok());
    }
}

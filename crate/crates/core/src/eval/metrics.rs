use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{classify, GroundTruth, Method, Tolerances};
use crate::error::{Error, Result};
use crate::keypoint::PairContext;
use crate::matches::{Match, MatchSet};

/// Correct matches counted once per keypoint: `min(distinct i, distinct j)`.
pub fn normalized_correct_count<'a>(correct: impl IntoIterator<Item = &'a Match>) -> usize {
    let mut rows = HashSet::new();
    let mut cols = HashSet::new();
    for m in correct {
        rows.insert(m.i);
        cols.insert(m.j);
    }
    rows.len().min(cols.len())
}

/// How average precision is computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApMode {
    /// Mean of precision at the rank of every correct match.
    #[default]
    Rank,
    /// Interpolated precision at recall 0, 0.1, ..., 1.
    ElevenPoint,
}

/// Rank-based AP of labels listed best first. Zero without correct matches.
pub fn average_precision(labels: &[bool]) -> f64 {
    let mut hits = 0usize;
    let mut acc = 0.0;
    for (k, &correct) in labels.iter().enumerate() {
        if correct {
            hits += 1;
            acc += hits as f64 / (k + 1) as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        acc / hits as f64
    }
}

/// Eleven-point interpolated AP, recall relative to the correct matches in
/// the list.
pub fn average_precision_11pt(labels: &[bool]) -> f64 {
    let total = labels.iter().filter(|&&c| c).count();
    if total == 0 {
        return 0.0;
    }
    let mut curve = Vec::with_capacity(labels.len());
    let mut hits = 0usize;
    for (k, &correct) in labels.iter().enumerate() {
        hits += correct as usize;
        curve.push((hits as f64 / total as f64, hits as f64 / (k + 1) as f64));
    }
    (0..=10)
        .map(|t| {
            let level = t as f64 / 10.0;
            curve
                .iter()
                .filter(|(r, _)| *r >= level - 1e-12)
                .map(|(_, p)| *p)
                .fold(0.0, f64::max)
        })
        .sum::<f64>()
        / 11.0
}

/// Arithmetic mean, `None` for no values.
pub fn mean_average_precision(aps: &[f64]) -> Option<f64> {
    (!aps.is_empty()).then(|| aps.iter().sum::<f64>() / aps.len() as f64)
}

/// `(1 + b^2) p r / (b^2 p + r)`, zero when both are zero.
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let den = b2 * precision + recall;
    if den == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / den
    }
}

/// Metrics of one image pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Raw correct matches over output size; `None` for empty output.
    pub precision: Option<f64>,
    /// Normalised correct count over that of the reference universe.
    pub recall: Option<f64>,
    /// Same against the full candidate universe.
    pub recall_star: Option<f64>,
    /// Normalised correct count of the output.
    pub correct_count: usize,
    pub raw_correct_count: usize,
    pub output_count: usize,
    pub average_precision: f64,
    /// No correct match in the output.
    pub failed: bool,
    /// Per-match labels in output order.
    pub labels: Vec<bool>,
}

/// Builds a report from precomputed labels. `universe_correct` and
/// `star_correct` are normalised correct counts of the reference pools.
pub fn score_labels(
    output: &MatchSet,
    labels: &[bool],
    universe_correct: Option<usize>,
    star_correct: Option<usize>,
    ap_mode: ApMode,
) -> Result<EvalReport> {
    if labels.len() != output.len() {
        return Err(Error::DimensionMismatch {
            expected: output.len(),
            actual: labels.len(),
        });
    }
    let correct: Vec<&Match> = output
        .iter()
        .zip(labels)
        .filter(|(_, &c)| c)
        .map(|(m, _)| m)
        .collect();
    let raw = correct.len();
    let normalized = normalized_correct_count(correct);
    let ratio = |den: Option<usize>| den.filter(|&d| d > 0).map(|d| normalized as f64 / d as f64);

    let mut ranked: Vec<usize> = (0..output.len()).collect();
    ranked.sort_by(|&a, &b| output.entries()[a].score.total_cmp(&output.entries()[b].score).then(a.cmp(&b)));
    let ranked_labels: Vec<bool> = ranked.iter().map(|&k| labels[k]).collect();
    let ap = match ap_mode {
        ApMode::Rank => average_precision(&ranked_labels),
        ApMode::ElevenPoint => average_precision_11pt(&ranked_labels),
    };
    Ok(EvalReport {
        precision: (!output.is_empty()).then(|| raw as f64 / output.len() as f64),
        recall: ratio(universe_correct),
        recall_star: ratio(star_correct),
        correct_count: normalized,
        raw_correct_count: raw,
        output_count: output.len(),
        average_precision: ap,
        failed: normalized == 0,
        labels: labels.to_vec(),
    })
}

fn correct_in(set: &MatchSet, gt: &GroundTruth, ctx: &PairContext, method: Method, tol: &Tolerances) -> Result<usize> {
    let labels = set
        .iter()
        .map(|m| classify(gt, m, ctx, method, tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(normalized_correct_count(
        set.iter().zip(&labels).filter(|(_, &c)| c).map(|(m, _)| m),
    ))
}

/// Normalised correct count over every `(i, j)` keypoint pair, without
/// materialising the pool.
pub fn all_pairs_correct_count(gt: &GroundTruth, ctx: &PairContext, method: Method, tol: &Tolerances) -> Result<usize> {
    use rayon::prelude::*;
    let m = ctx.keypoints2.len();
    let rows: Vec<Vec<bool>> = (0..ctx.keypoints1.len())
        .into_par_iter()
        .map(|i| {
            (0..m)
                .map(|j| classify(gt, &Match::new(i, j, 0.0), ctx, method, tol))
                .collect::<Result<Vec<bool>>>()
        })
        .collect::<Result<_>>()?;
    let hit_rows = rows.iter().filter(|r| r.iter().any(|&c| c)).count();
    let hit_cols = (0..m).filter(|&j| rows.iter().any(|r| r[j])).count();
    Ok(hit_rows.min(hit_cols))
}

/// Classifies `output` and scores it. Recall is measured against the
/// correct matches of `universe` (the blob matching output) and recall*
/// against `universe_star` (all candidates), when given.
#[allow(clippy::too_many_arguments)]
pub fn score_pair(
    output: &MatchSet,
    gt: &GroundTruth,
    ctx: &PairContext,
    method: Method,
    tol: &Tolerances,
    universe: Option<&MatchSet>,
    universe_star: Option<&MatchSet>,
    ap_mode: ApMode,
) -> Result<EvalReport> {
    tol.validate()?;
    let labels = output
        .iter()
        .map(|m| classify(gt, m, ctx, method, tol))
        .collect::<Result<Vec<_>>>()?;
    let u = universe.map(|s| correct_in(s, gt, ctx, method, tol)).transpose()?;
    let s = universe_star.map(|s| correct_in(s, gt, ctx, method, tol)).transpose()?;
    score_labels(output, &labels, u, s, ap_mode)
}

/// Mean metrics over pairs. Undefined per-pair values are skipped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub pairs: usize,
    pub mean_precision: Option<f64>,
    pub mean_recall: Option<f64>,
    pub mean_recall_star: Option<f64>,
    pub mean_average_precision: Option<f64>,
    pub f1: Option<f64>,
    pub f05: Option<f64>,
    pub failures: usize,
    pub mean_output_count: Option<f64>,
}

pub fn aggregate(reports: &[EvalReport]) -> Aggregate {
    fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
        let v: Vec<f64> = values.flatten().collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
    let p = mean(reports.iter().map(|r| r.precision));
    let r = mean(reports.iter().map(|r| r.recall));
    let both = p.zip(r);
    Aggregate {
        pairs: reports.len(),
        mean_precision: p,
        mean_recall: r,
        mean_recall_star: mean(reports.iter().map(|r| r.recall_star)),
        mean_average_precision: mean(reports.iter().map(|r| Some(r.average_precision))),
        f1: both.map(|(p, r)| f_beta(p, r, 1.0)),
        f05: both.map(|(p, r)| f_beta(p, r, 0.5)),
        failures: reports.iter().filter(|r| r.failed).count(),
        mean_output_count: mean(reports.iter().map(|r| Some(r.output_count as f64))),
    }
}

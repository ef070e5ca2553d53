use std::collections::HashSet;

use super::{fit_fundamental, fit_homography, match_points, Model, ModelKind};
use crate::error::{Error, Result};
use crate::keypoint::PairContext;
use crate::matches::MatchSet;

/// Default residual threshold in pixels.
pub const DEFAULT_INLIER_THRESHOLD: f64 = 15.0;

/// Outcome of [`one_sac`].
#[derive(Clone, Debug)]
pub struct OneSacResult {
    /// `None` when the sample could not be formed or was degenerate.
    pub model: Option<Model>,
    /// Matches within the threshold, in input order. Empty on failure.
    pub matches: MatchSet,
    /// Input positions of the matches used for the fit.
    pub sample: Vec<usize>,
    pub failed: bool,
}

/// Fits `kind` once on the top-ranked matches and keeps the matches whose
/// residual is at most `threshold` pixels.
///
/// Matches are ranked by ascending score (ties keep input order). The
/// sample grows along the ranking until it holds `3q` matches counted once
/// per keypoint, that is until `min(distinct i, distinct j) = 3q`.
pub fn one_sac(
    matches: &MatchSet,
    kind: ModelKind,
    ctx: &PairContext,
    threshold: f64,
) -> Result<OneSacResult> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(Error::invalid("inlier threshold must be positive"));
    }
    let points = matches
        .iter()
        .map(|m| match_points(m, ctx))
        .collect::<Result<Vec<_>>>()?;

    let mut ranked: Vec<usize> = (0..matches.len()).collect();
    ranked.sort_by(|&a, &b| {
        let (ma, mb) = (&matches.entries()[a], &matches.entries()[b]);
        ma.score.total_cmp(&mb.score).then(a.cmp(&b))
    });

    let target = kind.sample_size();
    let mut rows = HashSet::new();
    let mut cols = HashSet::new();
    let mut sample = Vec::new();
    for &k in &ranked {
        if rows.len().min(cols.len()) >= target {
            break;
        }
        let m = &matches.entries()[k];
        rows.insert(m.i);
        cols.insert(m.j);
        sample.push(k);
    }
    let failure = |sample: Vec<usize>| OneSacResult {
        model: None,
        matches: MatchSet::new(),
        sample,
        failed: true,
    };
    if rows.len().min(cols.len()) < target {
        return Ok(failure(sample));
    }

    let pairs: Vec<_> = sample.iter().map(|&k| points[k]).collect();
    let fitted = match kind {
        ModelKind::Homography => fit_homography(&pairs).map(Model::Homography),
        ModelKind::Fundamental => fit_fundamental(&pairs).map(Model::Fundamental),
    };
    let model = match fitted {
        Ok(m) => m,
        Err(Error::Degenerate(_)) => return Ok(failure(sample)),
        Err(e) => return Err(e),
    };
    let kept = matches.filtered(|k, _| model.residual(points[k].0, points[k].1) <= threshold);
    Ok(OneSacResult {
        model: Some(model),
        matches: kept,
        sample,
        failed: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::keypoint::Keypoint;
    use crate::matches::Match;
    use crate::model::Homography;

    fn scene(n_in: usize, n_out: usize) -> (PairContext, MatchSet, Homography) {
        let h = Homography::new([1.1, 0.05, 30.0, -0.04, 0.95, 12.0, 1e-4, 5e-5, 1.0]).unwrap();
        let mut k1 = Vec::new();
        let mut k2 = Vec::new();
        let mut set = MatchSet::new();
        for k in 0..n_in {
            let p = Point::new(20.0 + (k * 37 % 500) as f64, 15.0 + (k * 53 % 400) as f64);
            let q = h.apply(p).unwrap();
            k1.push(Keypoint::new(p.x, p.y));
            k2.push(Keypoint::new(q.x, q.y));
            set.push(Match::new(k, k, 0.1 + k as f64 * 1e-3));
        }
        for k in 0..n_out {
            let p = Point::new(50.0 + (k * 71 % 450) as f64, 40.0 + (k * 29 % 350) as f64);
            // far from the true image of p
            let q = h.apply(p).unwrap();
            k1.push(Keypoint::new(p.x, p.y));
            k2.push(Keypoint::new(q.x + 80.0 + k as f64, q.y - 60.0));
            set.push(Match::new(n_in + k, n_in + k, 0.5 + k as f64 * 1e-3));
        }
        let ctx = PairContext::new(k1, k2, (640.0, 480.0), (700.0, 520.0)).unwrap();
        (ctx, set, h)
    }

    #[test]
    fn sample_sizes() {
        assert_eq!(ModelKind::Homography.sample_size(), 12);
        assert_eq!(ModelKind::Fundamental.sample_size(), 24);
        let (ctx, set, _) = scene(30, 30);
        let r = one_sac(&set, ModelKind::Homography, &ctx, 15.0).unwrap();
        assert_eq!(r.sample.len(), 12);
        assert_eq!(r.sample, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn keeps_inliers_drops_far_outliers() {
        let (ctx, set, h) = scene(30, 30);
        let r = one_sac(&set, ModelKind::Homography, &ctx, 15.0).unwrap();
        assert!(!r.failed);
        for (k, m) in set.iter().enumerate() {
            let p1 = Point::new(ctx.keypoints1[m.i].x, ctx.keypoints1[m.i].y);
            let p2 = Point::new(ctx.keypoints2[m.j].x, ctx.keypoints2[m.j].y);
            let truth = h.symmetric_transfer_error(p1, p2) <= 15.0;
            assert_eq!(r.matches.contains_pair(m.i, m.j), truth, "match {k}");
        }
        // idempotent
        let again = one_sac(&r.matches, ModelKind::Homography, &ctx, 15.0).unwrap();
        assert_eq!(again.matches, r.matches);
    }

    #[test]
    fn many_to_many_counts_once() {
        let (ctx, set, _) = scene(20, 0);
        // duplicate the best match's first keypoint against another column
        let mut entries: Vec<Match> = vec![Match::new(0, 1, 0.0)];
        entries.extend(set.iter().copied());
        let set: MatchSet = entries.into_iter().collect();
        let r = one_sac(&set, ModelKind::Homography, &ctx, 15.0).unwrap();
        assert_eq!(r.sample.len(), 13);
    }

    #[test]
    fn too_few_matches_fail() {
        let (ctx, set, _) = scene(11, 0);
        let r = one_sac(&set, ModelKind::Homography, &ctx, 15.0).unwrap();
        assert!(r.failed && r.matches.is_empty() && r.model.is_none());
        let (ctx, set, _) = scene(20, 0);
        assert!(one_sac(&set, ModelKind::Fundamental, &ctx, 15.0).unwrap().failed);
        assert!(one_sac(&set, ModelKind::Homography, &ctx, 0.0).is_err());
    }
}

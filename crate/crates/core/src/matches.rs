use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// A correspondence between keypoint `i` of the first image and keypoint `j`
/// of the second. Lower scores are better.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub i: usize,
    pub j: usize,
    pub score: f64,
}

impl Match {
    pub fn new(i: usize, j: usize, score: f64) -> Self {
        Match { i, j, score }
    }

    #[inline]
    pub fn pair(&self) -> (usize, usize) {
        (self.i, self.j)
    }
}

/// Ordered multiset of matches with per-keypoint multiplicity counters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatchSet {
    entries: Vec<Match>,
    rows: HashMap<usize, usize>,
    cols: HashMap<usize, usize>,
}

impl MatchSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, m: Match) {
        *self.rows.entry(m.i).or_default() += 1;
        *self.cols.entry(m.j).or_default() += 1;
        self.entries.push(m);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Match] {
        &self.entries
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Match> {
        self.entries.iter()
    }

    pub fn get(&self, idx: usize) -> Option<&Match> {
        self.entries.get(idx)
    }

    /// Number of entries whose first index is `i`.
    pub fn row_count(&self, i: usize) -> usize {
        self.rows.get(&i).copied().unwrap_or(0)
    }

    /// Number of entries whose second index is `j`.
    pub fn col_count(&self, j: usize) -> usize {
        self.cols.get(&j).copied().unwrap_or(0)
    }

    pub fn distinct_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn distinct_cols(&self) -> usize {
        self.cols.len()
    }

    /// Index pairs in stored order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.entries.iter().map(Match::pair).collect()
    }

    pub fn contains_pair(&self, i: usize, j: usize) -> bool {
        self.entries.iter().any(|m| m.i == i && m.j == j)
    }

    /// Stable sort by ascending score; equal scores keep insertion order.
    pub fn sort_by_score(&mut self) {
        self.entries.sort_by(|a, b| a.score.total_cmp(&b.score));
    }

    /// Keeps the entries for which `keep` returns true, preserving order.
    pub fn filtered(&self, mut keep: impl FnMut(usize, &Match) -> bool) -> MatchSet {
        self.entries
            .iter()
            .enumerate()
            .filter(|(k, m)| keep(*k, m))
            .map(|(_, m)| *m)
            .collect()
    }

    /// Largest index referenced on each side, if any.
    pub fn max_indices(&self) -> Option<(usize, usize)> {
        let i = self.entries.iter().map(|m| m.i).max()?;
        let j = self.entries.iter().map(|m| m.j).max()?;
        Some((i, j))
    }
}

impl FromIterator<Match> for MatchSet {
    fn from_iter<T: IntoIterator<Item = Match>>(iter: T) -> Self {
        let mut set = MatchSet::new();
        for m in iter {
            set.push(m);
        }
        set
    }
}

impl<'a> IntoIterator for &'a MatchSet {
    type Item = &'a Match;
    type IntoIter = std::slice::Iter<'a, Match>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}

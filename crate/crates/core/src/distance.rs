//! Descriptor distance matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Selects a row or a column of a [`DistanceMatrix`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Row,
    Column,
}

/// Metric used to turn descriptor vectors into distances.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    /// L1-normalise, take the element-wise square root, then Euclidean.
    Hellinger,
}

/// Dense `n x m` matrix of non-negative descriptor distances, row-major.
///
/// Row `i` holds the distances from keypoint `i` of the first image to every
/// keypoint of the second image.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("distance matrix must be at least 1x1"));
        }
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid(format!(
                "distances must be finite and non-negative, found {bad}"
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(n * m);
        for row in rows {
            if row.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    actual: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(n, m, values)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn transpose(&self) -> DistanceMatrix {
        const TILE: usize = 64;
        let mut values = vec![0.0; self.values.len()];
        for i0 in (0..self.rows).step_by(TILE) {
            for j0 in (0..self.cols).step_by(TILE) {
                for i in i0..(i0 + TILE).min(self.rows) {
                    for j in j0..(j0 + TILE).min(self.cols) {
                        values[j * self.rows + i] = self.values[i * self.cols + j];
                    }
                }
            }
        }
        DistanceMatrix {
            rows: self.cols,
            cols: self.rows,
            values,
        }
    }

    /// Multiplies every entry by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Result<DistanceMatrix> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::invalid("scale factor must be positive"));
        }
        Self::new(
            self.rows,
            self.cols,
            self.values.iter().map(|v| v * factor).collect(),
        )
    }

    /// The `k`-th smallest value (1-based) along row or column `index`.
    pub fn kth_best(&self, axis: Axis, index: usize, k: usize) -> Result<f64> {
        let (len, count) = match axis {
            Axis::Row => (self.cols, self.rows),
            Axis::Column => (self.rows, self.cols),
        };
        if index >= count {
            return Err(Error::OutOfRange { index, len: count });
        }
        if k == 0 || k > len {
            return Err(Error::OutOfRange { index: k, len });
        }
        let mut line: Vec<f64> = match axis {
            Axis::Row => self.row(index).to_vec(),
            Axis::Column => (0..self.rows).map(|i| self.get(i, index)).collect(),
        };
        Ok(kth_smallest(&mut line, k))
    }

    /// `kth_best` for every row (`Axis::Row`) or column, with `k` clamped to
    /// the line length.
    pub(crate) fn kth_best_all(&self, axis: Axis, k: usize) -> Vec<f64> {
        let len = match axis {
            Axis::Row => self.cols,
            Axis::Column => self.rows,
        };
        let k = k.clamp(1, len.max(1));
        if k > SMALL_K {
            return match axis {
                Axis::Row => {
                    let mut buf = Vec::with_capacity(self.cols);
                    (0..self.rows)
                        .map(|i| {
                            buf.clear();
                            buf.extend_from_slice(self.row(i));
                            kth_smallest(&mut buf, k)
                        })
                        .collect()
                }
                Axis::Column => self.transpose().kth_best_all(Axis::Row, k),
            };
        }
        // running k smallest per line, kept sorted, filled in row-major order
        let lines = self.values.len() / len.max(1);
        let mut best = vec![f64::INFINITY; lines * k];
        for i in 0..self.rows {
            for (j, &v) in self.row(i).iter().enumerate() {
                let line = match axis {
                    Axis::Row => i,
                    Axis::Column => j,
                };
                let slot = &mut best[line * k..(line + 1) * k];
                if v.total_cmp(&slot[k - 1]).is_lt() {
                    let mut p = k - 1;
                    while p > 0 && v.total_cmp(&slot[p - 1]).is_lt() {
                        slot[p] = slot[p - 1];
                        p -= 1;
                    }
                    slot[p] = v;
                }
            }
        }
        (0..lines).map(|l| best[l * k + k - 1]).collect()
    }
}

/// Largest rank handled by the streaming path of `kth_best_all`.
const SMALL_K: usize = 32;

fn kth_smallest(line: &mut [f64], k: usize) -> f64 {
    let (_, v, _) = line.select_nth_unstable_by(k - 1, f64::total_cmp);
    *v
}

/// Exhaustive pairwise distances between two descriptor sets.
pub fn compute_distance_matrix(
    desc1: &[Vec<f64>],
    desc2: &[Vec<f64>],
    metric: Metric,
) -> Result<DistanceMatrix> {
    if desc1.is_empty() || desc2.is_empty() {
        return Err(Error::invalid("descriptor sets must be non-empty"));
    }
    let dim = desc1[0].len();
    if dim == 0 {
        return Err(Error::invalid("descriptors must have at least one entry"));
    }
    for d in desc1.iter().chain(desc2) {
        if d.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: d.len(),
            });
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("descriptor entries must be finite"));
        }
    }

    let prepare = |set: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        match metric {
            Metric::Euclidean => Ok(set.to_vec()),
            Metric::Hellinger => set.iter().map(|d| root_normalize(d)).collect(),
        }
    };
    let a = prepare(desc1)?;
    let b = prepare(desc2)?;

    let mut values = Vec::with_capacity(a.len() * b.len());
    for u in &a {
        for v in &b {
            let sq: f64 = u.iter().zip(v).map(|(x, y)| (x - y) * (x - y)).sum();
            values.push(sq.sqrt());
        }
    }
    DistanceMatrix::new(a.len(), b.len(), values)
}

fn root_normalize(d: &[f64]) -> Result<Vec<f64>> {
    if d.iter().any(|v| *v < 0.0) {
        return Err(Error::invalid(
            "hellinger distance requires non-negative descriptors",
        ));
    }
    let l1: f64 = d.iter().sum();
    if l1 == 0.0 {
        return Ok(d.to_vec());
    }
    Ok(d.iter().map(|v| (v / l1).sqrt()).collect())
}

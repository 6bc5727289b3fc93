//! Symmetric dissimilarity matrices stored as a packed strict lower triangle.

use crate::error::{Error, Result};
use crate::features::FeatureTable;

/// Symmetric `N x N` dissimilarities with a zero diagonal.
///
/// Only the `N (N - 1) / 2` off-diagonal entries below the diagonal are
/// stored; [`DistanceMatrix::get`] presents the full symmetric view.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    packed: Vec<f64>,
}

#[inline]
fn packed_index(i: usize, j: usize) -> usize {
    debug_assert!(i > j);
    i * (i - 1) / 2 + j
}

impl DistanceMatrix {
    /// Wraps a packed strict lower triangle, row by row: `d(1,0), d(2,0), d(2,1), ...`.
    pub fn from_packed(n: usize, packed: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if packed.len() != n * (n - 1) / 2 {
            return Err(Error::DimensionMismatch(format!(
                "{} packed entries for n={n}",
                packed.len()
            )));
        }
        if let Some(v) = packed.iter().find(|v| **v < 0.0) {
            return Err(Error::InvalidMatrix(format!("negative distance {v}")));
        }
        Ok(Self { n, packed })
    }

    /// Accepts a user-supplied full square matrix.
    ///
    /// The diagonal must be zero and the matrix exactly symmetric. Non-finite
    /// entries are accepted here and rejected by the solver.
    pub fn from_full(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("matrix is not square".into()));
        }
        let mut packed = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            if rows[i][i] != 0.0 {
                return Err(Error::InvalidMatrix(format!("d({i},{i}) is not zero")));
            }
            for j in 0..i {
                let (a, b) = (rows[i][j], rows[j][i]);
                if a.to_bits() != b.to_bits() && a != b {
                    return Err(Error::InvalidMatrix(format!("d({i},{j}) != d({j},{i})")));
                }
                packed.push(a);
            }
        }
        Self::from_packed(n, packed)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Greater => self.packed[packed_index(i, j)],
            std::cmp::Ordering::Less => self.packed[packed_index(j, i)],
        }
    }

    /// Copies row `i` of the full symmetric matrix into `out`.
    pub fn row_into(&self, i: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n);
        let start = if i == 0 { 0 } else { packed_index(i, 0) };
        out[..i].copy_from_slice(&self.packed[start..start + i]);
        out[i] = 0.0;
        for (j, slot) in out.iter_mut().enumerate().skip(i + 1) {
            *slot = self.packed[packed_index(j, i)];
        }
    }

    /// Packed strict lower triangle.
    pub fn packed(&self) -> &[f64] {
        &self.packed
    }

    /// Applies `f` to every off-diagonal entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_packed(self.n, self.packed.iter().map(|&d| f(d)).collect())
    }

    pub(crate) fn first_non_finite(&self) -> Option<(usize, usize)> {
        let pos = self.packed.iter().position(|d| !d.is_finite())?;
        // invert packed_index
        let mut i = 1;
        while packed_index(i, 0) + i <= pos {
            i += 1;
        }
        Some((i, pos - packed_index(i, 0)))
    }
}

/// Pairwise Euclidean distances between the rows of `features`.
pub fn euclidean_distance_matrix(features: &FeatureTable) -> Result<DistanceMatrix> {
    let n = features.n_rows();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut packed = Vec::with_capacity(n * (n - 1) / 2);
    for i in 1..n {
        let xi = features.row(i);
        for j in 0..i {
            let ss: f64 = xi
                .iter()
                .zip(features.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            packed.push(ss.sqrt());
        }
    }
    DistanceMatrix::from_packed(n, packed)
}

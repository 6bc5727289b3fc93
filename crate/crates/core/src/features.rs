//! Row-major feature tables: the numeric input to distance computation.

use crate::error::{Error, Result};

/// An `N x p` table of finite values with named columns and row identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    values: Vec<f64>,
    n_rows: usize,
    column_names: Vec<String>,
    row_ids: Vec<u64>,
}

impl FeatureTable {
    /// Builds a table from row-major `values`.
    ///
    /// Fails when the table is empty, when the shape disagrees with the
    /// names and ids, or when any entry is NaN or infinite.
    pub fn new(values: Vec<f64>, column_names: Vec<String>, row_ids: Vec<u64>) -> Result<Self> {
        let p = column_names.len();
        let n = row_ids.len();
        if n == 0 || p == 0 {
            return Err(Error::EmptyInput);
        }
        if values.len() != n * p {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {n}x{p} table",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "non-finite entry at row {}, column '{}'",
                pos / p,
                column_names[pos % p]
            )));
        }
        Ok(Self {
            values,
            n_rows: n,
            column_names,
            row_ids,
        })
    }

    /// Builds a table from rows, numbering rows `0..N`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let names = (0..p).map(|c| format!("x{}", c + 1)).collect();
        let ids = (0..rows.len() as u64).collect();
        Self::new(rows.concat(), names, ids)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn row_ids(&self) -> &[u64] {
        &self.row_ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn get(&self, i: usize, c: usize) -> f64 {
        self.values[i * self.n_cols() + c]
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = f64> + Clone + '_ {
        self.values.iter().skip(c).step_by(self.n_cols()).copied()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Sample mean and standard deviation (denominator `n - 1`).
pub(crate) fn mean_and_sd(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.clone().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Centers every column to mean 0 and scales it to sample standard deviation 1.
pub fn standardize_columns(features: &FeatureTable) -> Result<FeatureTable> {
    let p = features.n_cols();
    let mut stats = Vec::with_capacity(p);
    for c in 0..p {
        let (mean, sd) = mean_and_sd(features.column(c));
        if !(sd > 0.0) {
            return Err(Error::ConstantColumn {
                column: features.column_names[c].clone(),
            });
        }
        stats.push((mean, sd));
    }
    let values = features
        .values
        .chunks_exact(p)
        .flat_map(|row| row.iter().zip(&stats).map(|(x, (m, s))| (x - m) / s))
        .collect();
    FeatureTable::new(
        values,
        features.column_names.clone(),
        features.row_ids.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single_column(xs: &[f64]) -> FeatureTable {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        FeatureTable::from_rows(&rows).unwrap()
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(matches!(
            FeatureTable::from_rows(&[]),
            Err(Error::EmptyInput)
        ));
        assert!(FeatureTable::from_rows(&[vec![1.0, f64::NAN]]).is_err());
        assert!(FeatureTable::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn symmetric_column_standardizes_to_unit_steps() {
        let z = standardize_columns(&single_column(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(z.values(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn matches_direct_formula() {
        let xs = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        // mean 5, sum of squares 32, sample variance 32/7
        let sd = (32.0f64 / 7.0).sqrt();
        let z = standardize_columns(&single_column(&xs)).unwrap();
        for (got, x) in z.values().iter().zip(xs) {
            assert!((got - (x - 5.0) / sd).abs() < 1e-12);
        }
    }

    #[test]
    fn standardization_is_idempotent() {
        let once = standardize_columns(&single_column(&[0.3, -1.2, 4.4, 2.0, 0.0])).unwrap();
        let twice = standardize_columns(&once).unwrap();
        for (a, b) in once.values().iter().zip(twice.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_column_is_named_in_error() {
        let t = FeatureTable::new(
            vec![1.0, 5.0, 2.0, 5.0],
            vec!["a".into(), "flat".into()],
            vec![10, 11],
        )
        .unwrap();
        match standardize_columns(&t) {
            Err(Error::ConstantColumn { column }) => assert_eq!(column, "flat"),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn standardized_columns_have_zero_mean_unit_sd(
            rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 3..40)
        ) {
            let t = FeatureTable::from_rows(&rows).unwrap();
            if let Ok(z) = standardize_columns(&t) {
                for c in 0..z.n_cols() {
                    let (m, s) = mean_and_sd(z.column(c));
                    prop_assert!(m.abs() < 1e-12);
                    prop_assert!((s - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}

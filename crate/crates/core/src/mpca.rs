//! Principal components of a membership matrix.
//!
//! Memberships sum to one across clusters, so after centering the `K`
//! columns are linearly dependent and at most `K - 1` components carry
//! variance. The `K x K` covariance matrix is diagonalized with cyclic Jacobi
//! rotations.

use crate::error::{Error, Result};
use crate::fanny::MembershipMatrix;
use crate::features::mean_and_sd;
use crate::validity::HardPartition;

/// Eigenvalues at or below this fraction of the largest are treated as zero.
pub const DEGENERATE_RATIO: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// `a` is row-major `n x n` and is destroyed. Returns the eigenvalues
/// (unsorted) and the eigenvectors as the columns of a row-major matrix.
pub fn symmetric_eigen(a: &mut [f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n, "matrix must be square");
    let mut v = vec![0.0; n * n];
    for p in 0..n {
        v[p * n + p] = 1.0;
    }
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| a[p * n + q] * a[p * n + q])
            .sum();
        let diag: f64 = (0..n).map(|p| a[p * n + p] * a[p * n + p]).sum();
        if off <= f64::EPSILON * f64::EPSILON * diag || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    a[r * n + p] = c * arp - s * arq;
                    a[r * n + q] = s * arp + c * arq;
                }
                for r in 0..n {
                    let apr = a[p * n + r];
                    let aqr = a[q * n + r];
                    a[p * n + r] = c * apr - s * aqr;
                    a[q * n + r] = s * apr + c * aqr;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = c * vrp - s * vrq;
                    v[r * n + q] = s * vrp + c * vrq;
                }
            }
        }
    }
    ((0..n).map(|p| a[p * n + p]).collect(), v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    n: usize,
    k: usize,
    /// `N x K` row-major component scores.
    pub scores: Vec<f64>,
    /// Non-increasing, floored at zero.
    pub eigenvalues: Vec<f64>,
    /// `K x K` row-major; column `c` is the direction of component `c`.
    pub directions: Vec<f64>,
    /// Share of total variance per component, over all `K` eigenvalues.
    pub explained_fraction: Vec<f64>,
    /// Share of variance over the non-degenerate components only (zero for
    /// degenerate ones).
    pub explained_fraction_nondegenerate: Vec<f64>,
    pub n_nondegenerate: usize,
    /// Whether the columns were scaled to unit standard deviation.
    pub standardized: bool,
    /// Set when standardization was requested but a constant column forced
    /// centering only.
    pub fell_back_to_centering: bool,
}

impl PcaResult {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn score(&self, i: usize, c: usize) -> f64 {
        self.scores[i * self.k + c]
    }

    pub fn direction(&self, c: usize) -> Vec<f64> {
        (0..self.k).map(|r| self.directions[r * self.k + c]).collect()
    }
}

/// PCA of the membership columns, optionally standardized to unit sample
/// standard deviation. A constant column is an error when standardizing.
pub fn membership_pca(m: &MembershipMatrix, standardize: bool) -> Result<PcaResult> {
    pca(m, standardize, false)
}

/// Like [`membership_pca`] with standardization, falling back to centering
/// only (and flagging it) when some column is constant.
pub fn membership_pca_or_center(m: &MembershipMatrix) -> Result<PcaResult> {
    pca(m, true, true)
}

fn pca(m: &MembershipMatrix, standardize: bool, allow_fallback: bool) -> Result<PcaResult> {
    let (n, k) = (m.n(), m.k());
    if k < 2 {
        return Err(Error::SingleCluster);
    }
    let stats: Vec<(f64, f64)> = (0..k).map(|v| mean_and_sd(m.column(v))).collect();
    let constant = stats.iter().position(|&(_, sd)| !(sd > 0.0));
    if stats.iter().all(|&(_, sd)| !(sd > 0.0)) {
        return Err(Error::ConstantColumn {
            column: "all membership columns".into(),
        });
    }
    let mut fell_back = false;
    let scale = match (standardize, constant) {
        (false, _) => false,
        (true, None) => true,
        (true, Some(_)) if allow_fallback => {
            fell_back = true;
            false
        }
        (true, Some(c)) => {
            return Err(Error::ConstantColumn {
                column: format!("cluster {}", c + 1),
            })
        }
    };

    let mut z = Vec::with_capacity(n * k);
    for row in m.rows() {
        z.extend(row.iter().zip(&stats).map(|(x, &(mean, sd))| {
            if scale {
                (x - mean) / sd
            } else {
                x - mean
            }
        }));
    }

    let denom = n.saturating_sub(1).max(1) as f64;
    let mut cov = vec![0.0; k * k];
    for row in z.chunks_exact(k) {
        for p in 0..k {
            for q in p..k {
                cov[p * k + q] += row[p] * row[q];
            }
        }
    }
    for p in 0..k {
        for q in p..k {
            cov[p * k + q] /= denom;
            cov[q * k + p] = cov[p * k + q];
        }
    }

    let (values, vectors) = symmetric_eigen(&mut cov, k);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

    let eigenvalues: Vec<f64> = order.iter().map(|&c| values[c].max(0.0)).collect();
    let mut directions = vec![0.0; k * k];
    for (dst, &src) in order.iter().enumerate() {
        let col: Vec<f64> = (0..k).map(|r| vectors[r * k + src]).collect();
        // largest-magnitude coordinate positive (first one on ties)
        let lead = col
            .iter()
            .enumerate()
            .fold(0, |best, (r, x)| if x.abs() > col[best].abs() { r } else { best });
        let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..k {
            directions[r * k + dst] = sign * col[r];
        }
    }

    let mut scores = vec![0.0; n * k];
    for (i, row) in z.chunks_exact(k).enumerate() {
        for c in 0..k {
            scores[i * k + c] = (0..k).map(|r| row[r] * directions[r * k + c]).sum();
        }
    }

    let largest = eigenvalues[0];
    let total: f64 = eigenvalues.iter().sum();
    let nondegenerate: Vec<bool> = eigenvalues
        .iter()
        .map(|&e| e > DEGENERATE_RATIO * largest)
        .collect();
    let total_nondeg: f64 = eigenvalues
        .iter()
        .zip(&nondegenerate)
        .filter(|(_, &keep)| keep)
        .map(|(e, _)| e)
        .sum();

    Ok(PcaResult {
        n,
        k,
        scores,
        explained_fraction: eigenvalues.iter().map(|e| e / total).collect(),
        explained_fraction_nondegenerate: eigenvalues
            .iter()
            .zip(&nondegenerate)
            .map(|(e, &keep)| if keep { e / total_nondeg } else { 0.0 })
            .collect(),
        n_nondegenerate: nondegenerate.iter().filter(|&&keep| keep).count(),
        eigenvalues,
        directions,
        standardized: scale,
        fell_back_to_centering: fell_back,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcScatterRow {
    pub pc1: f64,
    pub pc2: f64,
    pub label: usize,
}

/// First two component scores of every object with its hard label.
pub fn emit_pc_scatter(p: &PcaResult, labels: &HardPartition) -> Result<Vec<PcScatterRow>> {
    if p.n_nondegenerate < 2 {
        return Err(Error::DegenerateComponents {
            found: p.n_nondegenerate,
            needed: 2,
        });
    }
    if labels.len() != p.n {
        return Err(Error::DimensionMismatch(format!(
            "{} scores but {} labels",
            p.n,
            labels.len()
        )));
    }
    Ok(labels
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &label)| PcScatterRow {
            pc1: p.score(i, 0),
            pc2: p.score(i, 1),
            label,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hard(labels: &[usize], k: usize) -> (MembershipMatrix, HardPartition) {
        let p = HardPartition::new(labels.to_vec(), k).unwrap();
        (MembershipMatrix::from_partition(&p), p)
    }

    #[test]
    fn jacobi_diagonalizes_known_matrix() {
        // eigenvalues of [[2,1],[1,2]] are 1 and 3
        let mut a = vec![2.0, 1.0, 1.0, 2.0];
        let (mut vals, _) = symmetric_eigen(&mut a, 2);
        vals.sort_by(f64::total_cmp);
        assert!((vals[0] - 1.0).abs() < 1e-14);
        assert!((vals[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn hard_clusters_collapse_to_three_points() {
        let (m, p) = hard(&[1, 1, 2, 2, 3, 3], 3);
        let res = membership_pca(&m, true).unwrap();
        assert_eq!(res.n_nondegenerate, 2);
        let rows = emit_pc_scatter(&res, &p).unwrap();
        assert_eq!(rows.len(), 6);
        for pair in rows.chunks(2) {
            assert!((pair[0].pc1 - pair[1].pc1).abs() < 1e-12);
            assert!((pair[0].pc2 - pair[1].pc2).abs() < 1e-12);
        }
        let dist = |a: &PcScatterRow, b: &PcScatterRow| (a.pc1 - b.pc1).hypot(a.pc2 - b.pc2);
        assert!(dist(&rows[0], &rows[2]) > 1.0);
        assert!(dist(&rows[0], &rows[4]) > 1.0);
        assert!(dist(&rows[2], &rows[4]) > 1.0);
    }

    #[test]
    fn uniform_memberships_are_rejected() {
        let m = MembershipMatrix::uniform(5, 3);
        assert!(matches!(membership_pca(&m, true), Err(Error::ConstantColumn { .. })));
        assert!(membership_pca(&m, false).is_err());
        assert!(membership_pca_or_center(&m).is_err());
    }

    #[test]
    fn constant_column_falls_back_to_centering() {
        // third cluster never used
        let m = MembershipMatrix::from_rows(&[
            vec![0.9, 0.1, 0.0],
            vec![0.2, 0.8, 0.0],
            vec![0.6, 0.4, 0.0],
        ])
        .unwrap();
        assert!(membership_pca(&m, true).is_err());
        let res = membership_pca_or_center(&m).unwrap();
        assert!(res.fell_back_to_centering);
        assert!(!res.standardized);
        assert_eq!(res.n_nondegenerate, 1);
        let p = HardPartition::new(vec![1, 2, 1], 3).unwrap();
        assert!(matches!(
            emit_pc_scatter(&res, &p),
            Err(Error::DegenerateComponents { found: 1, needed: 2 })
        ));
    }

    #[test]
    fn single_cluster_is_an_error() {
        let m = MembershipMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        assert!(matches!(membership_pca(&m, true), Err(Error::SingleCluster)));
    }

    fn stochastic_rows(k: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(0.01f64..1.0, k), 5..40).prop_map(|rows| {
            rows.into_iter()
                .map(|r| {
                    let s: f64 = r.iter().sum();
                    r.iter().map(|x| x / s).collect()
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn pca_invariants(rows in (2usize..6).prop_flat_map(stochastic_rows), standardize in any::<bool>()) {
            let m = MembershipMatrix::from_rows(&rows).unwrap();
            let k = m.k();
            let res = membership_pca(&m, standardize).unwrap();

            prop_assert!((res.explained_fraction.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            for w in res.eigenvalues.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            prop_assert!(res.eigenvalues[k - 1] <= DEGENERATE_RATIO * res.eigenvalues[0]);

            for a in 0..k {
                for b in 0..k {
                    let dot: f64 = (0..k).map(|r| res.directions[r * k + a] * res.directions[r * k + b]).sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    prop_assert!((dot - want).abs() < 1e-10);
                }
            }

            let stats: Vec<(f64, f64)> = (0..k).map(|v| mean_and_sd(m.column(v))).collect();
            for i in 0..m.n() {
                for r in 0..k {
                    let (mean, sd) = stats[r];
                    let input = if standardize { (m.get(i, r) - mean) / sd } else { m.get(i, r) - mean };
                    let rebuilt: f64 = (0..k).map(|c| res.score(i, c) * res.directions[r * k + c]).sum();
                    prop_assert!((rebuilt - input).abs() < 1e-8);
                }
            }
            for c in 0..k {
                let mean: f64 = (0..m.n()).map(|i| res.score(i, c)).sum::<f64>() / m.n() as f64;
                prop_assert!(mean.abs() < 1e-10);
            }
        }
    }
}

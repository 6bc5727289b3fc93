//! Hard-partition validity indices and partition comparison.

use std::cmp::Ordering;

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};
use crate::fanny::MembershipMatrix;

/// Default neighbor count for [`connectivity_index`].
pub const DEFAULT_CONNECTIVITY_L: usize = 10;

/// Crisp cluster labels in `1..=k`. Clusters may be empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HardPartition {
    labels: Vec<usize>,
    k: usize,
}

impl HardPartition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l == 0 || l > k) {
            return Err(Error::InvalidConfig(format!(
                "label {l} of object {i} outside 1..={k}"
            )));
        }
        Ok(Self { labels, k })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Size of each cluster, index `c - 1` for cluster `c`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l - 1] += 1;
        }
        sizes
    }
}

fn check_len(partition: &HardPartition, d: &DistanceMatrix) -> Result<()> {
    if partition.len() != d.len() {
        return Err(Error::DimensionMismatch(format!(
            "partition has {} objects, distance matrix has {}",
            partition.len(),
            d.len()
        )));
    }
    Ok(())
}

/// Connectivity of a hard partition over the `l` nearest neighbors of every
/// object: the `j`-th neighbor adds `1/j` when it sits in another cluster.
///
/// Neighbors are ranked by distance, ties going to the lower object index.
pub fn connectivity_index(partition: &HardPartition, d: &DistanceMatrix, l: usize) -> Result<f64> {
    check_len(partition, d)?;
    let n = d.len();
    if l == 0 || l >= n {
        return Err(Error::NeighborCountOutOfRange {
            l,
            max: n.saturating_sub(1),
        });
    }
    let labels = partition.labels();
    let mut row = vec![0.0; n];
    let mut order: Vec<usize> = Vec::with_capacity(n - 1);
    let by_distance = |row: &[f64], a: &usize, b: &usize| -> Ordering {
        row[*a].total_cmp(&row[*b]).then(a.cmp(b))
    };
    let mut total = 0.0;
    for i in 0..n {
        d.row_into(i, &mut row);
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        if l < order.len() {
            order.select_nth_unstable_by(l - 1, |a, b| by_distance(&row, a, b));
        }
        let nearest = &mut order[..l];
        nearest.sort_unstable_by(|a, b| by_distance(&row, a, b));
        for (rank, &j) in nearest.iter().enumerate() {
            if labels[j] != labels[i] {
                total += 1.0 / (rank + 1) as f64;
            }
        }
    }
    Ok(total)
}

/// Smallest distance between objects of different clusters divided by the
/// largest within-cluster distance.
///
/// Returns `f64::INFINITY` when every cluster has zero diameter.
pub fn dunn_index(partition: &HardPartition, d: &DistanceMatrix) -> Result<f64> {
    check_len(partition, d)?;
    if partition.k() < 2 {
        return Err(Error::SingleCluster);
    }
    if let Some(c) = partition.sizes().iter().position(|&s| s == 0) {
        return Err(Error::EmptyCluster { cluster: c + 1 });
    }
    let labels = partition.labels();
    let mut separation = f64::INFINITY;
    let mut diameter: f64 = 0.0;
    for i in 1..d.len() {
        for j in 0..i {
            let dij = d.get(i, j);
            if labels[i] == labels[j] {
                diameter = diameter.max(dij);
            } else {
                separation = separation.min(dij);
            }
        }
    }
    if diameter == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(separation / diameter)
}

/// Contingency table of two partitions over the same objects; rows follow
/// the first partition.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossTab {
    pub counts: Vec<Vec<usize>>,
    /// Row-wise percentages; an empty row is all zeros.
    pub row_percentages: Vec<Vec<f64>>,
}

impl CrossTab {
    pub fn row_totals(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn total(&self) -> usize {
        self.row_totals().iter().sum()
    }
}

pub fn cross_tabulate(a: &HardPartition, b: &HardPartition) -> Result<CrossTab> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "partitions cover {} and {} objects",
            a.len(),
            b.len()
        )));
    }
    let mut counts = vec![vec![0usize; b.k()]; a.k()];
    for (&x, &y) in a.labels().iter().zip(b.labels()) {
        counts[x - 1][y - 1] += 1;
    }
    let row_percentages = counts
        .iter()
        .map(|row| {
            let total: usize = row.iter().sum();
            row.iter()
                .map(|&c| if total == 0 { 0.0 } else { 100.0 * c as f64 / total as f64 })
                .collect()
        })
        .collect();
    Ok(CrossTab {
        counts,
        row_percentages,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMembershipStats {
    pub cluster: usize,
    pub size: usize,
    /// Mean of the assigned objects' own-cluster memberships; `None` when empty.
    pub mean: Option<f64>,
    pub median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipReport {
    pub clusters: Vec<ClusterMembershipStats>,
    /// Objects whose membership in their assigned cluster is below one half.
    pub below_half: usize,
    pub below_half_percent: f64,
}

pub(crate) fn median(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2]),
        _ => Some(0.5 * (sorted[n / 2 - 1] + sorted[n / 2])),
    }
}

/// Per-cluster statistics of each object's membership in the cluster it is
/// assigned to.
pub fn membership_report(m: &MembershipMatrix, labels: &HardPartition) -> Result<MembershipReport> {
    if m.n() != labels.len() || m.k() != labels.k() {
        return Err(Error::DimensionMismatch(format!(
            "memberships are {}x{}, partition has {} objects in {} clusters",
            m.n(),
            m.k(),
            labels.len(),
            labels.k()
        )));
    }
    let mut per_cluster: Vec<Vec<f64>> = vec![Vec::new(); m.k()];
    for (i, &l) in labels.labels().iter().enumerate() {
        per_cluster[l - 1].push(m.get(i, l - 1));
    }
    let below_half = per_cluster.iter().flatten().filter(|&&x| x < 0.5).count();
    let clusters = per_cluster
        .into_iter()
        .enumerate()
        .map(|(c, mut xs)| {
            xs.sort_by(f64::total_cmp);
            let size = xs.len();
            ClusterMembershipStats {
                cluster: c + 1,
                size,
                mean: (size > 0).then(|| xs.iter().sum::<f64>() / size as f64),
                median: median(&xs),
            }
        })
        .collect();
    Ok(MembershipReport {
        clusters,
        below_half,
        below_half_percent: 100.0 * below_half as f64 / m.n() as f64,
    })
}

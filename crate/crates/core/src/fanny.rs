//! FANNY: fuzzy partitioning of a dissimilarity matrix.
//!
//! The solver minimizes
//!
//! ```text
//! F(M) = sum_v [ sum_i sum_j m_iv^r m_jv^r d(i,j) ] / [ 2 sum_j m_jv^r ]
//! ```
//!
//! over row-stochastic membership matrices `M`. Each sweep visits the objects
//! in order and moves object `i` toward the stationary point of the
//! Lagrangian, `m_iv ∝ a_iv^(-1/(r-1))`, where
//!
//! ```text
//! a_iv = sum_j w_jv d(i,j) / S_v  -  A_v / (2 S_v^2),   w = m^r, S_v = sum_j w_jv
//! ```
//!
//! and `A_v` is the numerator of cluster `v`'s term. The effect of the move on
//! `F` is known in closed form, so a move that would raise the objective is
//! shortened by halving until it does not; the objective is therefore
//! non-increasing from sweep to sweep.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};
use crate::validity::HardPartition;

pub const DEFAULT_R: f64 = 1.3;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 500;
pub const DEFAULT_SEED: u64 = 20_200_101;
pub const DEFAULT_MEDOID_STARTS: usize = 10;

/// Tolerance on row sums accepted from callers.
const ROW_SUM_TOL: f64 = 1e-9;
/// Step halvings tried before a proposed row is rejected.
const MAX_HALVINGS: usize = 40;

/// `N x K` row-stochastic fuzzy memberships.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMatrix {
    values: Vec<f64>,
    n: usize,
    k: usize,
}

impl MembershipMatrix {
    /// Row-major `values`; entries must be finite and nonnegative and every
    /// row must sum to one.
    pub fn new(n: usize, k: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::EmptyInput);
        }
        if values.len() != n * k {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {n}x{k} membership matrix",
                values.len()
            )));
        }
        for (i, row) in values.chunks_exact(k).enumerate() {
            if row.iter().any(|m| !m.is_finite() || *m < 0.0) {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} has a negative or non-finite membership"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidMatrix(format!("row {i} sums to {sum}")));
            }
        }
        Ok(Self { values, n, k })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::new(rows.len(), k, rows.concat())
    }

    /// Crisp memberships: object `i` belongs wholly to `partition.labels()[i]`.
    pub fn from_partition(partition: &HardPartition) -> Self {
        let k = partition.k();
        let mut values = vec![0.0; partition.len() * k];
        for (i, &label) in partition.labels().iter().enumerate() {
            values[i * k + label - 1] = 1.0;
        }
        Self {
            values,
            n: partition.len(),
            k,
        }
    }

    /// Every membership equal to `1/K`.
    pub fn uniform(n: usize, k: usize) -> Self {
        Self {
            values: vec![1.0 / k as f64; n * k],
            n,
            k,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, v: usize) -> f64 {
        self.values[i * self.k + v]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.k)
    }

    pub fn column(&self, v: usize) -> impl Iterator<Item = f64> + Clone + '_ {
        self.values.iter().skip(v).step_by(self.k).copied()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Reorders clusters: column `v` of the result is column `perm[v]` of `self`.
    pub fn permute_clusters(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.k];
        if perm.len() != self.k || perm.iter().any(|&p| p >= self.k || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidConfig("not a permutation of the clusters".into()));
        }
        let values = self
            .rows()
            .flat_map(|row| perm.iter().map(move |&p| row[p]))
            .collect();
        Ok(Self {
            values,
            n: self.n,
            k: self.k,
        })
    }
}

/// Starting memberships for [`fanny_solve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Init {
    /// Each row drawn uniformly from the simplex (normalized Exp(1) draws).
    #[default]
    SeededRandom,
    /// Object `i` gets 0.9 in cluster `i mod K`, the remaining 0.1 spread evenly.
    DeterministicStripes,
}

impl fmt::Display for Init {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Init::SeededRandom => "seeded-random",
            Init::DeterministicStripes => "deterministic-stripes",
        })
    }
}

impl FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seeded-random" => Ok(Init::SeededRandom),
            "deterministic-stripes" => Ok(Init::DeterministicStripes),
            other => Err(Error::InvalidConfig(format!("unknown init mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FannyConfig {
    pub k: usize,
    /// Fuzzifier; must exceed 1.
    pub r: f64,
    pub max_iter: usize,
    /// Relative objective change below which the solve stops.
    pub tol: f64,
    pub init: Init,
    pub seed: u64,
    /// Extra crisp starts built by assigning every object to its nearest
    /// medoid. When at most this many medoid sets exist, all of them are
    /// tried. Zero disables the extra starts.
    pub medoid_starts: usize,
}

impl FannyConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            r: DEFAULT_R,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            init: Init::default(),
            seed: DEFAULT_SEED,
            medoid_starts: DEFAULT_MEDOID_STARTS,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.r > 1.0 && self.r.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "fuzzifier r={} must be a finite value greater than 1",
                self.r
            )));
        }
        if self.k < 2 {
            return Err(Error::InvalidConfig(format!("k={} must be at least 2", self.k)));
        }
        if self.k >= n {
            return Err(Error::InvalidConfig(format!(
                "k={} must be smaller than the number of objects ({n})",
                self.k
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be positive".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidConfig(format!("tol={} must be positive", self.tol)));
        }
        Ok(())
    }

    /// Initial memberships for `n` objects.
    pub fn initial_memberships(&self, n: usize) -> MembershipMatrix {
        let k = self.k;
        let mut values = Vec::with_capacity(n * k);
        match self.init {
            Init::SeededRandom => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                for _ in 0..n {
                    let start = values.len();
                    // 1 - U lies in (0, 1], so the logarithm stays finite
                    values.extend((0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()));
                    let row = &mut values[start..];
                    let sum: f64 = row.iter().sum();
                    row.iter_mut().for_each(|x| *x /= sum);
                }
            }
            Init::DeterministicStripes => {
                let rest = 0.1 / (k - 1) as f64;
                for i in 0..n {
                    values.extend((0..k).map(|v| if v == i % k { 0.9 } else { rest }));
                }
            }
        }
        MembershipMatrix { values, n, k }
    }
}

#[derive(Debug, Clone)]
pub struct FannyResult {
    pub memberships: MembershipMatrix,
    /// Objective at the initialization followed by one value per sweep.
    pub objective_trace: Vec<f64>,
    pub hard_labels: HardPartition,
    pub n_iter: usize,
    pub converged: bool,
    pub n_dpc: f64,
}

impl FannyResult {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial objective")
    }
}

fn check_dims(m: &MembershipMatrix, d: &DistanceMatrix) -> Result<()> {
    if m.n() != d.len() {
        return Err(Error::DimensionMismatch(format!(
            "membership matrix has {} rows, distance matrix has {} objects",
            m.n(),
            d.len()
        )));
    }
    Ok(())
}

fn check_r(r: f64) -> Result<()> {
    if r > 1.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("fuzzifier r={r} must be greater than 1")))
    }
}

/// Per-cluster weights `w = m^r`, their column sums `S_v`, and the numerators
/// `A_v = sum_i sum_j w_iv w_jv d(i,j)`.
struct ClusterSums {
    w: Vec<f64>,
    s: Vec<f64>,
    a: Vec<f64>,
}

impl ClusterSums {
    fn compute(m: &[f64], k: usize, d: &DistanceMatrix, r: f64) -> Self {
        let n = d.len();
        let w: Vec<f64> = m.iter().map(|x| x.powf(r)).collect();
        let mut s = vec![0.0; k];
        for row in w.chunks_exact(k) {
            for (sv, wv) in s.iter_mut().zip(row) {
                *sv += wv;
            }
        }
        let mut a = vec![0.0; k];
        let packed = d.packed();
        let mut idx = 0;
        for i in 1..n {
            let wi = &w[i * k..(i + 1) * k];
            for j in 0..i {
                let dij = packed[idx];
                idx += 1;
                let wj = &w[j * k..(j + 1) * k];
                for v in 0..k {
                    a[v] += wi[v] * wj[v] * dij;
                }
            }
        }
        a.iter_mut().for_each(|x| *x *= 2.0);
        Self { w, s, a }
    }

    fn objective(&self) -> f64 {
        objective_from_sums(&self.s, &self.a)
    }
}

fn objective_from_sums(s: &[f64], a: &[f64]) -> f64 {
    s.iter()
        .zip(a)
        .map(|(&s, &a)| if s > 0.0 { a / (2.0 * s) } else { 0.0 })
        .sum()
}

/// Value of the FANNY objective for memberships `m`.
pub fn fanny_objective(m: &MembershipMatrix, d: &DistanceMatrix, r: f64) -> Result<f64> {
    check_dims(m, d)?;
    check_r(r)?;
    Ok(ClusterSums::compute(&m.values, m.k, d, r).objective())
}

/// Stationary row for coefficients `a`: crisp over the clusters with
/// `a_v <= 0` if there are any, otherwise `a_v^(-1/(r-1))` normalized.
fn stationary_row(a: &[f64], r: f64, out: &mut [f64]) {
    let crisp = a.iter().filter(|&&x| x <= 0.0).count();
    if crisp > 0 {
        let share = 1.0 / crisp as f64;
        for (o, &x) in out.iter_mut().zip(a) {
            *o = if x <= 0.0 { share } else { 0.0 };
        }
        return;
    }
    let inv = 1.0 / (r - 1.0);
    let mut max = f64::NEG_INFINITY;
    for (o, &x) in out.iter_mut().zip(a) {
        *o = -x.ln() * inv;
        max = max.max(*o);
    }
    let mut sum = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
}

/// One in-place sweep over all objects. Returns the objective before the
/// sweep and the objective of the updated memberships, both computed from
/// scratch.
fn sweep(m: &mut [f64], k: usize, d: &DistanceMatrix, r: f64) -> (f64, f64) {
    let n = d.len();
    let ClusterSums { mut w, mut s, mut a } = ClusterSums::compute(m, k, d, r);
    let f_before = objective_from_sums(&s, &a);

    let mut drow = vec![0.0; n];
    let mut b = vec![0.0; k];
    let mut coef = vec![0.0; k];
    let mut target = vec![0.0; k];
    let mut cand = vec![0.0; k];
    let mut cand_w = vec![0.0; k];
    let mut f_cur = f_before;

    // Objective after replacing row i's weights by `new_w`, all else fixed.
    let eval = |old_w: &[f64], new_w: &[f64], s: &[f64], a: &[f64], b: &[f64]| -> f64 {
        (0..k)
            .map(|v| {
                let s_new = s[v] - old_w[v] + new_w[v];
                let a_new = a[v] + 2.0 * (new_w[v] - old_w[v]) * b[v];
                if s_new > 0.0 {
                    a_new / (2.0 * s_new)
                } else {
                    0.0
                }
            })
            .sum()
    };

    for i in 0..n {
        d.row_into(i, &mut drow);
        b.iter_mut().for_each(|x| *x = 0.0);
        for (j, &dij) in drow.iter().enumerate() {
            if dij == 0.0 {
                continue;
            }
            let wj = &w[j * k..(j + 1) * k];
            for v in 0..k {
                b[v] += wj[v] * dij;
            }
        }
        for v in 0..k {
            coef[v] = if s[v] > 0.0 {
                b[v] / s[v] - a[v] / (2.0 * s[v] * s[v])
            } else {
                0.0
            };
        }
        stationary_row(&coef, r, &mut target);

        let old_m = &m[i * k..(i + 1) * k];
        let old_w = &w[i * k..(i + 1) * k];
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            for v in 0..k {
                cand[v] = if step == 1.0 {
                    target[v]
                } else {
                    (1.0 - step) * old_m[v] + step * target[v]
                };
            }
            let sum: f64 = cand.iter().sum();
            cand.iter_mut().for_each(|x| *x /= sum);
            for v in 0..k {
                cand_w[v] = cand[v].powf(r);
            }
            let f_new = eval(old_w, &cand_w, &s, &a, &b);
            if f_new <= f_cur {
                accepted = Some(f_new);
                break;
            }
            step *= 0.5;
        }
        if let Some(f_new) = accepted {
            for v in 0..k {
                s[v] += cand_w[v] - w[i * k + v];
                a[v] += 2.0 * (cand_w[v] - w[i * k + v]) * b[v];
            }
            m[i * k..(i + 1) * k].copy_from_slice(&cand);
            w[i * k..(i + 1) * k].copy_from_slice(&cand_w);
            f_cur = f_new;
        }
    }

    let f_after = ClusterSums::compute(m, k, d, r).objective();
    (f_before, f_after)
}

/// One descent sweep from `m`.
///
/// The returned matrix never has a larger objective than `m`; if rounding in
/// the incremental bookkeeping would make it so, `m` is returned unchanged.
pub fn fanny_iterate(m: &MembershipMatrix, d: &DistanceMatrix, r: f64) -> Result<MembershipMatrix> {
    check_dims(m, d)?;
    check_r(r)?;
    let mut values = m.values.clone();
    let (before, after) = sweep(&mut values, m.k, d, r);
    if after > before {
        return Ok(m.clone());
    }
    Ok(MembershipMatrix {
        values,
        n: m.n,
        k: m.k,
    })
}

/// Runs FANNY from the configured initialization and from the medoid starts,
/// keeping the solution with the lowest objective (earliest start on ties).
pub fn fanny_solve(d: &DistanceMatrix, config: &FannyConfig) -> Result<FannyResult> {
    config.validate(d.len())?;
    let mut best = fanny_solve_from(d, config, config.initial_memberships(d.len()))?;
    for start in medoid_starts(d, config) {
        let res = fanny_solve_from(d, config, start)?;
        if res.objective() < best.objective() {
            best = res;
        }
    }
    Ok(best)
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    let mut c: usize = 1;
    for i in 0..k {
        c = c.checked_mul(n - i)? / (i + 1);
    }
    Some(c)
}

/// Next `k`-subset of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for pos in (0..k).rev() {
        if idx[pos] < n - k + pos {
            idx[pos] += 1;
            for q in pos + 1..k {
                idx[q] = idx[q - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Medoid sets seeded like k-means++: the first uniformly, each later one
/// with probability proportional to its squared distance from the nearest
/// medoid already chosen.
fn sample_medoids(d: &DistanceMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = d.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = (0..n).map(|i| d.get(i, chosen[0])).collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().map(|x| x * x).sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, x) in nearest.iter().enumerate() {
                if *x > 0.0 {
                    pick = Some(i);
                    u -= x * x;
                    if u < 0.0 {
                        break;
                    }
                }
            }
            pick.expect("positive total has a positive term")
        } else {
            // every object coincides with a medoid; take any unused one
            (0..n).find(|i| !chosen.contains(i)).expect("k < n")
        };
        chosen.push(next);
        for (i, x) in nearest.iter_mut().enumerate() {
            *x = x.min(d.get(i, next));
        }
    }
    chosen
}

/// Crisp memberships assigning every object to its nearest medoid, ties to
/// the earlier medoid.
fn nearest_medoid_memberships(d: &DistanceMatrix, medoids: &[usize]) -> MembershipMatrix {
    let (n, k) = (d.len(), medoids.len());
    let mut values = vec![0.0; n * k];
    for i in 0..n {
        let v = match medoids.iter().position(|&c| c == i) {
            Some(v) => v,
            None => (0..k)
                .min_by(|&a, &b| d.get(i, medoids[a]).total_cmp(&d.get(i, medoids[b])))
                .unwrap(),
        };
        values[i * k + v] = 1.0;
    }
    MembershipMatrix { values, n, k }
}

fn medoid_starts(d: &DistanceMatrix, config: &FannyConfig) -> Vec<MembershipMatrix> {
    let (n, k, count) = (d.len(), config.k, config.medoid_starts);
    if count == 0 {
        return Vec::new();
    }
    let sets: Vec<Vec<usize>> = match binomial(n, k) {
        Some(total) if total <= count => {
            let mut idx: Vec<usize> = (0..k).collect();
            let mut sets = vec![idx.clone()];
            while next_combination(&mut idx, n) {
                sets.push(idx.clone());
            }
            sets
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(1);
            (0..count).map(|_| sample_medoids(d, k, &mut rng)).collect()
        }
    };
    sets.iter().map(|m| nearest_medoid_memberships(d, m)).collect()
}

/// Runs FANNY once from caller-supplied memberships; `config.init`,
/// `config.seed` and `config.medoid_starts` are ignored.
pub fn fanny_solve_from(
    d: &DistanceMatrix,
    config: &FannyConfig,
    init: MembershipMatrix,
) -> Result<FannyResult> {
    config.validate(d.len())?;
    check_dims(&init, d)?;
    if init.k != config.k {
        return Err(Error::DimensionMismatch(format!(
            "initial memberships have {} clusters, config asks for {}",
            init.k, config.k
        )));
    }
    if let Some((i, j)) = d.first_non_finite() {
        return Err(Error::NonFiniteDistance { i, j });
    }

    let k = config.k;
    let mut current = init.values;
    let mut scratch = current.clone();
    let mut trace = vec![ClusterSums::compute(&current, k, d, config.r).objective()];
    let mut converged = false;

    for _ in 0..config.max_iter {
        let f_prev = *trace.last().unwrap();
        scratch.copy_from_slice(&current);
        let (_, f_next) = sweep(&mut scratch, k, d, config.r);
        if f_next > f_prev {
            // no representable descent left
            converged = true;
            break;
        }
        std::mem::swap(&mut current, &mut scratch);
        trace.push(f_next);
        if (f_prev - f_next).abs() / f_prev.max(1e-300) < config.tol {
            converged = true;
            break;
        }
    }

    let memberships = MembershipMatrix {
        values: current,
        n: d.len(),
        k,
    };
    let hard_labels = closest_hard_clustering(&memberships);
    let n_dpc = normalized_dunn_partition_coefficient(&memberships)?;
    Ok(FannyResult {
        memberships,
        n_iter: trace.len() - 1,
        objective_trace: trace,
        hard_labels,
        converged,
        n_dpc,
    })
}

/// Assigns every object to its highest-membership cluster, ties to the lowest index.
pub fn closest_hard_clustering(m: &MembershipMatrix) -> HardPartition {
    let labels = m
        .rows()
        .map(|row| {
            let mut best = 0;
            for (v, &x) in row.iter().enumerate().skip(1) {
                if x > row[best] {
                    best = v;
                }
            }
            best + 1
        })
        .collect();
    HardPartition::new(labels, m.k()).expect("argmax labels lie in 1..=k")
}

/// Dunn's partition coefficient rescaled to `[0, 1]`: 1 for a crisp
/// partition, 0 when every membership is `1/K`.
pub fn normalized_dunn_partition_coefficient(m: &MembershipMatrix) -> Result<f64> {
    let k = m.k();
    if k < 2 {
        return Err(Error::SingleCluster);
    }
    let sum_sq: f64 = m.values.iter().map(|x| x * x).sum();
    let raw = (k as f64 / m.n() as f64 * sum_sq - 1.0) / (k - 1) as f64;
    Ok(raw.clamp(0.0, 1.0))
}

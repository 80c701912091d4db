//! Structural comparison of two datasets: Gower distances, PAM k-medoids,
//! silhouette-based choice of k, cross-assignment to the other dataset's
//! medoids, and the adjusted Rand index between the two joint clusterings.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ensure_same_schema, AttributeKind, Cell, Dataset, DatasetError};
use crate::preprocess::{impute, PreprocessError};
use crate::rng::{self, derive_seed};

/// Largest k tried by [`choose_k`].
pub const MAX_K: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum ClusteringError {
    #[error("k = {k} is invalid for {n} instances")]
    BadK { k: usize, n: usize },
    #[error("need at least 3 instances to choose k, got {0}")]
    TooFewInstances(usize),
    #[error("assignments have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
}

/// Dense symmetric distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    /// Panics unless `data` has `n * n` entries.
    pub fn from_flat(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "distance matrix must be n x n");
        Self { n, data }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Self { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Submatrix over the rows `range`.
    pub fn block(&self, range: std::ops::Range<usize>) -> DistanceMatrix {
        let m = range.len();
        let mut data = Vec::with_capacity(m * m);
        for i in range.clone() {
            data.extend_from_slice(&self.data[i * self.n + range.start..i * self.n + range.end]);
        }
        DistanceMatrix { n: m, data }
    }
}

/// Gower dissimilarity summed over the non-class attributes: numeric
/// attributes contribute `|x - y| / range` with the range taken over the
/// dataset (0 when the range is 0), nominal ones 0 or 1. A missing cell
/// contributes 1 unless both cells are missing; impute first to avoid this.
pub fn gower(d: &Dataset) -> DistanceMatrix {
    let schema = d.schema();
    let features: Vec<usize> = schema.feature_indices().collect();
    let range: Vec<Option<(f64, f64)>> = features
        .iter()
        .map(|&j| match schema.attributes()[j].kind {
            AttributeKind::Numeric => {
                let (lo, hi) = d
                    .rows()
                    .iter()
                    .filter_map(|r| r[j].as_numeric())
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                Some((lo, hi))
            }
            AttributeKind::Nominal => None,
        })
        .collect();
    let rows = d.rows();
    let n = rows.len();
    let dist = |a: &[Cell], b: &[Cell]| -> f64 {
        let mut s = 0.0;
        for (&j, r) in features.iter().zip(&range) {
            s += match (a[j], b[j], r) {
                (Cell::Numeric(x), Cell::Numeric(y), &Some((lo, hi))) => numeric_gap(x, y, lo, hi),
                (Cell::Category(x), Cell::Category(y), _) => f64::from(u8::from(x != y)),
                (Cell::Missing, Cell::Missing, _) => 0.0,
                _ => 1.0,
            };
        }
        s
    };
    let upper: Vec<Vec<f64>> = (0..n).into_par_iter().map(|i| (i + 1..n).map(|j| dist(&rows[i], &rows[j])).collect()).collect();
    let mut data = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + 1 + off;
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    DistanceMatrix { n, data }
}

/// `|x - y| / (hi - lo)` without overflow for ranges wider than `f64::MAX`;
/// 0 for a constant column.
fn numeric_gap(x: f64, y: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let g = if (hi - lo).is_finite() { (x - y).abs() / (hi - lo) } else { (x / 2.0 - y / 2.0).abs() / (hi / 2.0 - lo / 2.0) };
    g.min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    /// Cluster of every instance, `0..k`.
    pub assignment: Vec<usize>,
    /// Medoid instance of every cluster, ascending.
    pub medoids: Vec<usize>,
    pub k: usize,
    /// Sum of distances to the assigned medoid.
    pub cost: f64,
}

/// Index into `medoids` of the nearest medoid to `i`, lowest on ties.
fn nearest(dist: &DistanceMatrix, medoids: &[usize], i: usize) -> usize {
    let mut best = 0;
    for (c, &m) in medoids.iter().enumerate().skip(1) {
        if dist.get(i, m) < dist.get(i, medoids[best]) {
            best = c;
        }
    }
    best
}

/// Total distance of every instance to its nearest medoid.
pub fn medoid_cost(dist: &DistanceMatrix, medoids: &[usize]) -> f64 {
    (0..dist.len()).map(|i| medoids.iter().map(|&m| dist.get(i, m)).fold(f64::INFINITY, f64::min)).sum()
}

/// Clustering induced by a medoid set: medoids belong to their own cluster,
/// other instances to the nearest medoid (lowest on ties).
pub fn assign(dist: &DistanceMatrix, medoids: &[usize]) -> Clustering {
    let mut medoids = medoids.to_vec();
    medoids.sort_unstable();
    let mut assignment: Vec<usize> = (0..dist.len()).map(|i| nearest(dist, &medoids, i)).collect();
    for (c, &m) in medoids.iter().enumerate() {
        assignment[m] = c;
    }
    let cost = assignment.iter().enumerate().map(|(i, &c)| dist.get(i, medoids[c])).sum();
    Clustering { k: medoids.len(), assignment, medoids, cost }
}

/// Nearest and second-nearest medoid distances, and the nearest's position.
fn nearest_two(dist: &DistanceMatrix, medoids: &[usize], i: usize) -> (usize, f64, f64) {
    let (mut pos, mut d1, mut d2) = (0, f64::INFINITY, f64::INFINITY);
    for (c, &m) in medoids.iter().enumerate() {
        let d = dist.get(i, m);
        if d < d1 {
            d2 = d1;
            d1 = d;
            pos = c;
        } else if d < d2 {
            d2 = d;
        }
    }
    (pos, d1, d2)
}

fn build(dist: &DistanceMatrix, k: usize) -> Vec<usize> {
    let n = dist.len();
    let mut medoids = Vec::with_capacity(k);
    let mut is_medoid = vec![false; n];
    // distance of every instance to its closest chosen medoid
    let mut near = vec![f64::INFINITY; n];
    for _ in 0..k {
        let mut best = None;
        let mut best_cost = f64::INFINITY;
        for x in (0..n).filter(|&x| !is_medoid[x]) {
            let cost: f64 = (0..n).map(|o| near[o].min(dist.get(o, x))).sum();
            if cost < best_cost {
                best_cost = cost;
                best = Some(x);
            }
        }
        let x = best.expect("k <= n");
        is_medoid[x] = true;
        medoids.push(x);
        for (o, v) in near.iter_mut().enumerate() {
            *v = v.min(dist.get(o, x));
        }
    }
    medoids
}

/// Random medoid sets tried by [`pam`] in addition to the BUILD start.
pub const PAM_RESTARTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PamConfig {
    /// SWAP runs from random medoid sets besides the one from BUILD.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for PamConfig {
    fn default() -> Self {
        Self { restarts: PAM_RESTARTS, seed: 0 }
    }
}

/// SWAP phase: apply the best cost-decreasing (medoid, non-medoid) exchange
/// until none decreases the cost.
fn swap(dist: &DistanceMatrix, mut medoids: Vec<usize>) -> (Vec<usize>, f64) {
    let (n, k) = (dist.len(), medoids.len());
    let mut is_medoid = vec![false; n];
    for &m in &medoids {
        is_medoid[m] = true;
    }
    let mut cost = medoid_cost(dist, &medoids);
    if k == n {
        return (medoids, cost);
    }
    loop {
        let near: Vec<(usize, f64, f64)> = (0..n).map(|o| nearest_two(dist, &medoids, o)).collect();
        let candidates: Vec<(f64, usize, usize)> = (0..n)
            .into_par_iter()
            .filter(|&x| !is_medoid[x])
            .map(|x| {
                let mut shared = 0.0;
                let mut removal = vec![0.0; k];
                for (o, &(pos, dn, ds)) in near.iter().enumerate() {
                    let dox = dist.get(o, x);
                    let gain = (dox - dn).min(0.0);
                    shared += gain;
                    removal[pos] += ds.min(dox) - dn - gain;
                }
                let mut best = (f64::INFINITY, 0);
                for (i, r) in removal.iter().enumerate() {
                    if shared + r < best.0 {
                        best = (shared + r, i);
                    }
                }
                (best.0, best.1, x)
            })
            .collect();
        let mut best: Option<(f64, usize, usize)> = None;
        for c in candidates {
            if best.is_none_or(|b| c.0 < b.0) {
                best = Some(c);
            }
        }
        // relative slack keeps rounding noise from cycling the search
        match best {
            Some((delta, i, x)) if delta < -1e-12 * cost.max(1.0) => {
                is_medoid[medoids[i]] = false;
                is_medoid[x] = true;
                medoids[i] = x;
                cost = medoid_cost(dist, &medoids);
            }
            _ => break,
        }
    }
    (medoids, cost)
}

/// Partitioning around medoids with the default number of restarts.
pub fn pam(dist: &DistanceMatrix, k: usize, seed: u64) -> Result<Clustering, ClusteringError> {
    pam_with(dist, k, &PamConfig { seed, ..PamConfig::default() })
}

/// Greedy BUILD followed by SWAP, repeated from `cfg.restarts` random medoid
/// sets; the cheapest local optimum wins (earliest run on ties). Requires
/// `1 <= k <= n`.
pub fn pam_with(dist: &DistanceMatrix, k: usize, cfg: &PamConfig) -> Result<Clustering, ClusteringError> {
    let n = dist.len();
    if k == 0 || k > n {
        return Err(ClusteringError::BadK { k, n });
    }
    let mut best = swap(dist, build(dist, k));
    if k < n {
        for r in 0..cfg.restarts {
            let start = rand::seq::index::sample(&mut rng::stream(cfg.seed, r as u64), n, k).into_vec();
            let run = swap(dist, start);
            if run.1 < best.1 {
                best = run;
            }
        }
    }
    Ok(assign(dist, &best.0))
}

/// Mean silhouette width. Singletons score 0, as do instances whose `a` and
/// `b` are both 0.
pub fn silhouette(dist: &DistanceMatrix, c: &Clustering) -> f64 {
    let n = dist.len();
    if n == 0 {
        return 0.0;
    }
    let mut sizes = vec![0usize; c.k];
    for &a in &c.assignment {
        sizes[a] += 1;
    }
    let total: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = c.assignment[i];
            if sizes[own] <= 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; c.k];
            for j in 0..n {
                sums[c.assignment[j]] += dist.get(i, j);
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..c.k).filter(|&q| q != own && sizes[q] > 0).map(|q| sums[q] / sizes[q] as f64).fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m == 0.0 || !b.is_finite() {
                0.0
            } else {
                (b - a) / m
            }
        })
        .sum();
    total / n as f64
}

/// PAM clustering at the k in `2..=min(MAX_K, n - 1)` with the largest mean
/// silhouette width, smaller k on ties. When every instance coincides all
/// silhouettes are 0 and k = 2 is returned.
pub fn choose_k(dist: &DistanceMatrix, seed: u64) -> Result<Clustering, ClusteringError> {
    let n = dist.len();
    if n < 3 {
        return Err(ClusteringError::TooFewInstances(n));
    }
    let runs: Vec<(Clustering, f64)> = (2..=MAX_K.min(n - 1))
        .into_par_iter()
        .map(|k| {
            let c = pam(dist, k, derive_seed(seed, k as u64))?;
            let s = silhouette(dist, &c);
            Ok((c, s))
        })
        .collect::<Result<_, ClusteringError>>()?;
    let mut best = 0;
    for (i, (_, s)) in runs.iter().enumerate() {
        if *s > runs[best].1 {
            best = i;
        }
    }
    Ok(runs.into_iter().nth(best).map(|(c, _)| c).expect("k range is nonempty"))
}

fn choose2(x: u64) -> i128 {
    i128::from(x) * (i128::from(x) - 1) / 2
}

/// Adjusted Rand index from the contingency table of `u` and `v`. Returns
/// 1 when the index is undefined (both partitions trivial in the same way,
/// or fewer than two instances).
pub fn ari(u: &[usize], v: &[usize]) -> Result<f64, ClusteringError> {
    if u.len() != v.len() {
        return Err(ClusteringError::LengthMismatch(u.len(), v.len()));
    }
    let n = u.len() as u64;
    let ru = u.iter().max().map_or(0, |m| m + 1);
    let rv = v.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![0u64; ru * rv];
    let mut a = vec![0u64; ru];
    let mut b = vec![0u64; rv];
    for (&x, &y) in u.iter().zip(v) {
        table[x * rv + y] += 1;
        a[x] += 1;
        b[y] += 1;
    }
    let index: i128 = table.iter().map(|&c| choose2(c)).sum();
    let sa: i128 = a.iter().map(|&c| choose2(c)).sum();
    let sb: i128 = b.iter().map(|&c| choose2(c)).sum();
    let pairs = choose2(n);
    // (index - sa sb / pairs) / ((sa + sb) / 2 - sa sb / pairs), scaled to integers
    let num = 2 * (pairs * index - sa * sb);
    let den = pairs * (sa + sb) - 2 * sa * sb;
    if den == 0 {
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}

/// Cluster `d1` and `d2` separately, then compare the two joint clusterings
/// of `d1 ∪ d2`: one labels `d1` rows by their nearest `d2` medoid and keeps
/// `d2`'s own labels, the other the other way round. Distances are Gower
/// over the pooled, imputed data. Both datasets are clustered with the same
/// seed. Returns the ARI of the two.
pub fn cross_compare(d1: &Dataset, d2: &Dataset, seed: u64) -> Result<f64, ClusteringError> {
    ensure_same_schema(d1, d2)?;
    let (pooled, _) = impute(&d1.concat(d2)?)?;
    let dist = gower(&pooled);
    let (n1, n) = (d1.len(), pooled.len());
    let c1 = choose_k(&dist.block(0..n1), seed)?;
    let c2 = choose_k(&dist.block(n1..n), seed)?;
    let m1: Vec<usize> = c1.medoids.clone();
    let m2: Vec<usize> = c2.medoids.iter().map(|m| m + n1).collect();

    let mut joint_a = Vec::with_capacity(n);
    joint_a.extend((0..n1).map(|i| nearest(&dist, &m2, i)));
    joint_a.extend_from_slice(&c2.assignment);
    let mut joint_b = c1.assignment.clone();
    joint_b.extend((n1..n).map(|i| nearest(&dist, &m1, i)));
    ari(&joint_a, &joint_b)
}

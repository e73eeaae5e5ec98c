//! Unsupervised recovery of the coordinate partition from unlabeled inputs:
//! covariance thresholding, spectral clustering, and a permutation-invariant
//! misclustering score.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent_data::Batch;
use crate::linalg::{gemm, jacobi_eigen, JACOBI_MAX_SWEEPS, JACOBI_TOL};
use crate::rng::Rng;

/// Restarts of the centroid iterations in [`spectral_cluster`].
pub const KMEANS_RESTARTS: usize = 50;
const KMEANS_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Spectral,
    Threshold,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Spectral => "spectral",
            Method::Threshold => "threshold",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveredPartition {
    /// Labels in `[0, n_found)`, numbered by first appearance.
    pub assignment: Vec<usize>,
    pub n_found: usize,
    pub method: Method,
    /// Leading eigenvalues (spectral) in decreasing order.
    pub eigenvalues: Option<Vec<f64>>,
    pub threshold: Option<f64>,
}

/// Relabels so that labels appear in increasing order of first occurrence.
pub fn canonical_labels(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::HashMap::new();
    let out = labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect();
    (out, map.len())
}

/// Uncentered second-moment matrix `(1/B) Σ_b x_b x_bᵀ`, row-major `d x d`.
pub fn empirical_covariance(batch: &Batch) -> Vec<f64> {
    empirical_covariance_rows(&batch.x, batch.len(), batch.dim)
}

pub fn empirical_covariance_rows(x: &[f64], rows: usize, d: usize) -> Vec<f64> {
    let mut c = vec![0.0; d * d];
    if rows == 0 {
        return c;
    }
    gemm(d, rows, d, 1.0 / rows as f64, x, (1, d), x, (d, 1), 0.0, &mut c, (d, 1));
    // Exact symmetry regardless of summation order.
    for i in 0..d {
        for j in 0..i {
            let v = 0.5 * (c[i * d + j] + c[j * d + i]);
            c[i * d + j] = v;
            c[j * d + i] = v;
        }
    }
    c
}

/// Pearson correlation matrix from an uncentered feature matrix.
pub fn correlation_matrix(x: &[f64], rows: usize, d: usize) -> Vec<f64> {
    let mut mean = vec![0.0; d];
    for r in x.chunks_exact(d) {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= rows.max(1) as f64);
    let centered: Vec<f64> = x.chunks_exact(d).flat_map(|r| r.iter().zip(&mean).map(|(v, m)| v - m)).collect();
    let mut c = empirical_covariance_rows(&centered, rows, d);
    let sd: Vec<f64> = (0..d).map(|i| c[i * d + i].sqrt()).collect();
    for i in 0..d {
        for j in 0..d {
            let denom = sd[i] * sd[j];
            c[i * d + j] = if denom > 0.0 { c[i * d + j] / denom } else if i == j { 1.0 } else { 0.0 };
        }
    }
    c
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Connected components of the graph with an edge wherever `|C_ij| ≥ threshold`.
pub fn covariance_threshold_cluster(c: &[f64], d: usize, threshold: f64) -> Result<RecoveredPartition> {
    if c.len() != d * d {
        return Err(Error::ShapeMismatch { expected: d * d, got: c.len() });
    }
    let mut uf = UnionFind::new(d);
    for i in 0..d {
        for j in (i + 1)..d {
            if c[i * d + j].abs() >= threshold {
                uf.union(i, j);
            }
        }
    }
    let roots: Vec<usize> = (0..d).map(|i| uf.find(i)).collect();
    let (assignment, n_found) = canonical_labels(&roots);
    Ok(RecoveredPartition { assignment, n_found, method: Method::Threshold, eigenvalues: None, threshold: Some(threshold) })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd iterations from the given centroids; returns labels and inertia.
fn lloyd(points: &[f64], dims: usize, centroids: &mut [f64], k: usize) -> (Vec<usize>, f64) {
    let rows = points.len() / dims;
    let mut labels = vec![usize::MAX; rows];
    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for (r, p) in points.chunks_exact(dims).enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| sq_dist(p, &centroids[a * dims..(a + 1) * dims]).total_cmp(&sq_dist(p, &centroids[b * dims..(b + 1) * dims])))
                .expect("k >= 1");
            if labels[r] != best {
                labels[r] = best;
                changed = true;
            }
        }
        let mut sums = vec![0.0; k * dims];
        let mut counts = vec![0usize; k];
        for (r, p) in points.chunks_exact(dims).enumerate() {
            counts[labels[r]] += 1;
            for (s, v) in sums[labels[r] * dims..(labels[r] + 1) * dims].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for t in 0..dims {
                    centroids[c * dims + t] = sums[c * dims + t] / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = points
        .chunks_exact(dims)
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, &centroids[l * dims..(l + 1) * dims]))
        .sum();
    (labels, inertia)
}

/// Centroids at the means of the `k` most populated sign patterns of the rows.
fn sign_pattern_seeds(points: &[f64], dims: usize, k: usize) -> Option<Vec<f64>> {
    let mut groups: std::collections::BTreeMap<Vec<bool>, (usize, Vec<f64>)> = Default::default();
    for p in points.chunks_exact(dims) {
        let key: Vec<bool> = p.iter().map(|v| *v >= 0.0).collect();
        let entry = groups.entry(key).or_insert_with(|| (0, vec![0.0; dims]));
        entry.0 += 1;
        entry.1.iter_mut().zip(p).for_each(|(s, v)| *s += v);
    }
    if groups.len() < k {
        return None;
    }
    let mut ranked: Vec<_> = groups.into_values().collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0));
    Some(ranked.into_iter().take(k).flat_map(|(count, sum)| sum.into_iter().map(move |s| s / count as f64)).collect())
}

/// k-means++ seeding.
fn plus_plus_seeds(points: &[f64], dims: usize, k: usize, rng: &mut Rng) -> Vec<f64> {
    let rows = points.len() / dims;
    let mut centroids = Vec::with_capacity(k * dims);
    let first = rng.random_range(0..rows);
    centroids.extend_from_slice(&points[first * dims..(first + 1) * dims]);
    let mut dist: Vec<f64> = points.chunks_exact(dims).map(|p| sq_dist(p, &centroids[..dims])).collect();
    for _ in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = rows - 1;
            for (r, d) in dist.iter().enumerate() {
                if u < *d {
                    idx = r;
                    break;
                }
                u -= d;
            }
            idx
        } else {
            rng.random_range(0..rows)
        };
        let c = points[pick * dims..(pick + 1) * dims].to_vec();
        for (r, p) in points.chunks_exact(dims).enumerate() {
            dist[r] = dist[r].min(sq_dist(p, &c));
        }
        centroids.extend(c);
    }
    centroids
}

/// Best-of-`restarts` k-means on row-major points; the first restart is
/// seeded from sign patterns, the rest by k-means++.
pub fn kmeans(points: &[f64], dims: usize, k: usize, restarts: usize, rng: &mut Rng) -> (Vec<usize>, f64) {
    let rows = points.len() / dims.max(1);
    if k <= 1 || rows <= 1 {
        return (vec![0; rows], 0.0);
    }
    let k = k.min(rows);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for restart in 0..restarts.max(1) {
        let mut centroids = match (restart, sign_pattern_seeds(points, dims, k)) {
            (0, Some(c)) => c,
            _ => plus_plus_seeds(points, dims, k, rng),
        };
        let (labels, inertia) = lloyd(points, dims, &mut centroids, k);
        if best.as_ref().is_none_or(|b| inertia < b.1) {
            best = Some((labels, inertia));
        }
    }
    best.expect("at least one restart")
}

/// Spectral clustering: rows of the top-`n_clusters` eigenvectors of `C`
/// embedded in `R^N` and grouped by k-means.
pub fn spectral_cluster(c: &[f64], d: usize, n_clusters: usize, rng: &mut Rng) -> Result<RecoveredPartition> {
    if c.len() != d * d {
        return Err(Error::ShapeMismatch { expected: d * d, got: c.len() });
    }
    if n_clusters == 0 {
        return Err(Error::Config("need at least one cluster".into()));
    }
    let eig = jacobi_eigen(c, d, JACOBI_TOL, JACOBI_MAX_SWEEPS)?;
    let order = eig.order_desc();
    let top: Vec<usize> = order.iter().copied().take(n_clusters).collect();
    let embedding: Vec<f64> = (0..d).flat_map(|r| top.iter().map(move |&k| (r, k))).map(|(r, k)| eig.vectors[r * d + k]).collect();
    let (labels, _) = kmeans(&embedding, top.len(), n_clusters, KMEANS_RESTARTS, rng);
    let (assignment, n_found) = canonical_labels(&labels);
    Ok(RecoveredPartition {
        assignment,
        n_found,
        method: Method::Spectral,
        eigenvalues: Some(top.iter().map(|&k| eig.values[k]).collect()),
        threshold: None,
    })
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method,
/// `O(n³)`). Returns the column assigned to each row.
pub fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

fn best_matching_exhaustive(confusion: &[usize], k: usize) -> usize {
    fn recurse(confusion: &[usize], k: usize, row: usize, used: &mut [bool], acc: usize, best: &mut usize) {
        if row == k {
            *best = (*best).max(acc);
            return;
        }
        for col in 0..k {
            if !used[col] {
                used[col] = true;
                recurse(confusion, k, row + 1, used, acc + confusion[row * k + col], best);
                used[col] = false;
            }
        }
    }
    let mut best = 0;
    recurse(confusion, k, 0, &mut vec![false; k], 0, &mut best);
    best
}

/// Fraction of coordinates misassigned under the best label matching. Label
/// sets of different sizes are handled by padding the confusion matrix.
pub fn partition_error(found: &[usize], truth: &[usize]) -> Result<f64> {
    if found.len() != truth.len() {
        return Err(Error::ShapeMismatch { expected: truth.len(), got: found.len() });
    }
    let d = truth.len();
    if d == 0 {
        return Ok(0.0);
    }
    let (f, kf) = canonical_labels(found);
    let (t, kt) = canonical_labels(truth);
    let k = kf.max(kt);
    let mut confusion = vec![0usize; k * k];
    for (a, b) in f.iter().zip(&t) {
        confusion[a * k + b] += 1;
    }
    let matched = if k <= 8 {
        best_matching_exhaustive(&confusion, k)
    } else {
        let cost: Vec<f64> = confusion.iter().map(|&c| -(c as f64)).collect();
        let assign = hungarian(&cost, k);
        (0..k).map(|r| confusion[r * k + assign[r]]).sum()
    };
    Ok((d - matched) as f64 / d as f64)
}

/// Writes a square matrix as CSV with `c0..c{d-1}` headers.
pub fn write_matrix_csv<W: std::io::Write>(matrix: &[f64], d: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record((0..d).map(|j| format!("c{j}")))?;
    for row in matrix.chunks_exact(d) {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolean::{named_target, NamedTarget};
    use crate::latent_data::make_bsc_model;
    use crate::rng::seeded;

    fn bsc(n: usize, d: usize, delta: f64) -> crate::latent_data::DataModel {
        make_bsc_model(n, d, delta, named_target(NamedTarget::Parity, n).unwrap()).unwrap()
    }

    #[test]
    fn covariance_small_cases() {
        let mut rng = seeded(0);
        let m = bsc(2, 4, 0.2);
        let b = m.sample(1, &mut rng);
        let c = empirical_covariance(&b);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(c[i * 4 + j], b.x[i] * b.x[j]);
            }
        }
        let m = bsc(1, 5, 0.0);
        let c = empirical_covariance(&m.sample(40, &mut rng));
        assert!(c.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn thresholding_population_covariance() {
        let m = bsc(3, 12, 0.2);
        let cov = m.population_covariance();
        let r = covariance_threshold_cluster(&cov, 12, 0.18).unwrap();
        assert_eq!(r.n_found, 3);
        assert_eq!(partition_error(&r.assignment, m.partition().assignment()).unwrap(), 0.0);
        let r = covariance_threshold_cluster(&cov, 12, 0.5).unwrap();
        assert_eq!(r.n_found, 12);
    }

    #[test]
    fn spectral_population_covariance() {
        let mut rng = seeded(1);
        for delta in [0.05, 0.3, 0.45] {
            let m = bsc(3, 30, delta);
            let r = spectral_cluster(&m.population_covariance(), 30, 3, &mut rng).unwrap();
            assert_eq!(partition_error(&r.assignment, m.partition().assignment()).unwrap(), 0.0, "delta={delta}");
        }
    }

    #[test]
    fn partition_error_examples() {
        let truth: Vec<usize> = (0..12).map(|j| j / 4).collect();
        assert_eq!(partition_error(&truth, &truth).unwrap(), 0.0);
        let permuted: Vec<usize> = truth.iter().map(|&l| (l + 1) % 3).collect();
        assert_eq!(partition_error(&permuted, &truth).unwrap(), 0.0);
        let mut flipped = truth.clone();
        flipped[0] = 1;
        assert!((partition_error(&flipped, &truth).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        let singletons: Vec<usize> = (0..12).collect();
        assert!((partition_error(&singletons, &truth).unwrap() - 9.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn hungarian_matches_exhaustive() {
        let mut rng = seeded(5);
        for k in 2..=7 {
            let confusion: Vec<usize> = (0..k * k).map(|_| rng.random_range(0..20)).collect();
            let cost: Vec<f64> = confusion.iter().map(|&c| -(c as f64)).collect();
            let assign = hungarian(&cost, k);
            let got: usize = (0..k).map(|r| confusion[r * k + assign[r]]).sum();
            assert_eq!(got, best_matching_exhaustive(&confusion, k));
        }
    }

    #[test]
    fn correlation_has_unit_diagonal() {
        let mut rng = seeded(2);
        let b = bsc(2, 6, 0.3).sample(500, &mut rng);
        let c = correlation_matrix(&b.x, 500, 6);
        for i in 0..6 {
            assert!((c[i * 6 + i] - 1.0).abs() < 1e-12);
        }
    }
}

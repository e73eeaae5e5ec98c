//! Clustered latent-feature data model.
//!
//! Each of `N` hidden bits `s_i ∈ {±1}` is shared by the coordinates of one
//! cluster: `x_j = s_{c(j)} ξ_j` with independent noise `ξ_j`, and the label
//! is `y = f(s)`.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::boolean::{sign_at, BooleanFunction};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Map coordinate -> cluster, with every cluster nonempty.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPartition {
    n_clusters: usize,
    assignment: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl ClusterPartition {
    pub fn new(n_clusters: usize, assignment: Vec<usize>) -> Result<Self> {
        let d = assignment.len();
        if n_clusters == 0 || d == 0 {
            return Err(Error::InvalidPartition("empty partition".into()));
        }
        if n_clusters > d {
            return Err(Error::InvalidPartition(format!("{n_clusters} clusters exceed dimension {d}")));
        }
        let mut members = vec![Vec::new(); n_clusters];
        for (j, &c) in assignment.iter().enumerate() {
            if c >= n_clusters {
                return Err(Error::InvalidPartition(format!("coordinate {j} has cluster {c} >= {n_clusters}")));
            }
            members[c].push(j);
        }
        if let Some(empty) = members.iter().position(|m| m.is_empty()) {
            return Err(Error::InvalidPartition(format!("cluster {empty} is empty")));
        }
        Ok(ClusterPartition { n_clusters, assignment, members })
    }

    /// Contiguous blocks `[0,k), [k,2k), ...` of equal size `k = d / N`.
    pub fn contiguous_equal(n_clusters: usize, dim: usize) -> Result<Self> {
        if n_clusters == 0 || dim % n_clusters != 0 {
            return Err(Error::UnequalClusters { dim, clusters: n_clusters });
        }
        let k = dim / n_clusters;
        Self::new(n_clusters, (0..dim).map(|j| j / k).collect())
    }

    /// Contiguous blocks with the given sizes.
    pub fn contiguous(sizes: &[usize]) -> Result<Self> {
        let assignment = sizes.iter().enumerate().flat_map(|(c, &k)| std::iter::repeat_n(c, k)).collect();
        Self::new(sizes.len(), assignment)
    }

    /// Contiguous blocks whose sizes differ by at most one (the first
    /// `d mod N` clusters get the extra coordinate).
    pub fn contiguous_balanced(n_clusters: usize, dim: usize) -> Result<Self> {
        if n_clusters == 0 || n_clusters > dim {
            return Err(Error::InvalidPartition(format!("cannot split {dim} coordinates into {n_clusters} clusters")));
        }
        let base = dim / n_clusters;
        let extra = dim % n_clusters;
        let sizes: Vec<usize> = (0..n_clusters).map(|c| base + usize::from(c < extra)).collect();
        Self::contiguous(&sizes)
    }

    /// Same cluster sizes with coordinates shuffled.
    pub fn permuted(&self, rng: &mut Rng) -> Self {
        let mut assignment = self.assignment.clone();
        assignment.shuffle(rng);
        Self::new(self.n_clusters, assignment).expect("permutation preserves validity")
    }

    pub fn dim(&self) -> usize {
        self.assignment.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    #[inline]
    pub fn cluster_of(&self, j: usize) -> usize {
        self.assignment[j]
    }

    pub fn members(&self, cluster: usize) -> &[usize] {
        &self.members[cluster]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }
}

/// Law of one noise variable `ξ_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum NoiseLaw {
    /// `+1` with probability `1 - flip_prob`, `-1` otherwise.
    Rademacher { flip_prob: f64 },
    Gaussian { mean: f64, variance: f64 },
    BoundedTable { values: Vec<f64>, probs: Vec<f64> },
}

impl NoiseLaw {
    pub fn validate(&self, coord: usize) -> Result<()> {
        let bad = |reason: String| Err(Error::InvalidNoise { coord, reason });
        match self {
            NoiseLaw::Rademacher { flip_prob } => {
                if !(0.0..=1.0).contains(flip_prob) {
                    return bad(format!("flip probability {flip_prob} outside [0,1]"));
                }
            }
            NoiseLaw::Gaussian { mean, variance } => {
                if !mean.is_finite() || !variance.is_finite() || *variance < 0.0 {
                    return bad(format!("gaussian mean {mean}, variance {variance}"));
                }
            }
            NoiseLaw::BoundedTable { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return bad("support and probability lengths differ".into());
                }
                if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || values.iter().any(|v| !v.is_finite()) {
                    return bad("probabilities must lie in [0,1] and values be finite".into());
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return bad(format!("probabilities sum to {total}"));
                }
            }
        }
        Ok(())
    }

    /// `m_j = E[ξ_j]`.
    pub fn mean(&self) -> f64 {
        match self {
            NoiseLaw::Rademacher { flip_prob } => 1.0 - 2.0 * flip_prob,
            NoiseLaw::Gaussian { mean, .. } => *mean,
            NoiseLaw::BoundedTable { values, probs } => values.iter().zip(probs).map(|(v, p)| v * p).sum(),
        }
    }

    /// `τ_j² = Var(ξ_j)`.
    pub fn variance(&self) -> f64 {
        match self {
            NoiseLaw::Rademacher { flip_prob } => 4.0 * flip_prob * (1.0 - flip_prob),
            NoiseLaw::Gaussian { variance, .. } => *variance,
            NoiseLaw::BoundedTable { values, probs } => {
                let m = self.mean();
                values.iter().zip(probs).map(|(v, p)| p * (v - m) * (v - m)).sum()
            }
        }
    }

    pub fn second_moment(&self) -> f64 {
        let m = self.mean();
        m * m + self.variance()
    }

    #[inline]
    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match self {
            NoiseLaw::Rademacher { flip_prob } => {
                if rng.random::<f64>() < *flip_prob {
                    -1.0
                } else {
                    1.0
                }
            }
            NoiseLaw::Gaussian { mean, variance } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + variance.sqrt() * z
            }
            NoiseLaw::BoundedTable { values, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().expect("validated nonempty")
            }
        }
    }
}

/// One draw `(x, s, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub y: f64,
}

/// A batch stored flat: `x` is row-major `len x dim`, `s` holds sign-pattern
/// indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub dim: usize,
    pub x: Vec<f64>,
    pub s: Vec<usize>,
    pub y: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    #[inline]
    pub fn row(&self, b: usize) -> &[f64] {
        &self.x[b * self.dim..(b + 1) * self.dim]
    }

    pub fn to_samples(&self, n_clusters: usize) -> Vec<Sample> {
        (0..self.len())
            .map(|b| Sample {
                x: self.row(b).to_vec(),
                s: (0..n_clusters).map(|i| sign_at(self.s[b], i)).collect(),
                y: self.y[b],
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalStats {
    /// `v_i = Σ_{j ∈ C_i} m_j²`.
    pub v: Vec<f64>,
    pub v_min: f64,
    pub v_sum: f64,
    /// `μ = (1/d) Σ_j τ_j²`.
    pub mu: f64,
    /// `v_sum / d`.
    pub snr_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiabilityReport {
    pub pass_a: bool,
    pub pass_b: bool,
    pub v_min_ratio: f64,
    pub snr_ratio: f64,
}

/// Full sampling law: partition, per-coordinate noise and target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelDocument", try_from = "ModelDocument")]
pub struct DataModel {
    partition: ClusterPartition,
    noise: Vec<NoiseLaw>,
    target: BooleanFunction,
}

/// JSON form of a [`DataModel`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub n_clusters: usize,
    pub dim: usize,
    pub assignment: Vec<usize>,
    pub noise: Vec<NoiseLaw>,
    pub target: BooleanFunction,
}

impl From<DataModel> for ModelDocument {
    fn from(m: DataModel) -> Self {
        ModelDocument {
            n_clusters: m.partition.n_clusters(),
            dim: m.partition.dim(),
            assignment: m.partition.assignment.clone(),
            noise: m.noise,
            target: m.target,
        }
    }
}

impl TryFrom<ModelDocument> for DataModel {
    type Error = Error;
    fn try_from(doc: ModelDocument) -> Result<Self> {
        if doc.assignment.len() != doc.dim {
            return Err(Error::ShapeMismatch { expected: doc.dim, got: doc.assignment.len() });
        }
        let partition = ClusterPartition::new(doc.n_clusters, doc.assignment)?;
        DataModel::new(partition, doc.noise, doc.target)
    }
}

impl DataModel {
    pub fn new(partition: ClusterPartition, noise: Vec<NoiseLaw>, target: BooleanFunction) -> Result<Self> {
        if noise.len() != partition.dim() {
            return Err(Error::ShapeMismatch { expected: partition.dim(), got: noise.len() });
        }
        for (j, law) in noise.iter().enumerate() {
            law.validate(j)?;
        }
        if target.n() != partition.n_clusters() {
            return Err(Error::ShapeMismatch { expected: partition.n_clusters(), got: target.n() });
        }
        Ok(DataModel { partition, noise, target })
    }

    pub fn partition(&self) -> &ClusterPartition {
        &self.partition
    }

    pub fn noise(&self) -> &[NoiseLaw] {
        &self.noise
    }

    pub fn target(&self) -> &BooleanFunction {
        &self.target
    }

    pub fn dim(&self) -> usize {
        self.partition.dim()
    }

    pub fn n_clusters(&self) -> usize {
        self.partition.n_clusters()
    }

    pub fn means(&self) -> Vec<f64> {
        self.noise.iter().map(NoiseLaw::mean).collect()
    }

    pub fn variances(&self) -> Vec<f64> {
        self.noise.iter().map(NoiseLaw::variance).collect()
    }

    /// Same noise and target under a different partition.
    pub fn with_partition(&self, partition: ClusterPartition) -> Result<Self> {
        DataModel::new(partition, self.noise.clone(), self.target.clone())
    }

    pub fn with_target(&self, target: BooleanFunction) -> Result<Self> {
        DataModel::new(self.partition.clone(), self.noise.clone(), target)
    }

    /// Draws `len` i.i.d. samples into a flat batch.
    pub fn sample(&self, len: usize, rng: &mut Rng) -> Batch {
        let d = self.dim();
        let n = self.n_clusters();
        let mask = (1usize << n) - 1;
        let mut x = Vec::with_capacity(len * d);
        let mut s = Vec::with_capacity(len);
        let mut y = Vec::with_capacity(len);
        let mut signs = vec![0.0; n];
        for _ in 0..len {
            let pattern = (rng.random::<u32>() as usize) & mask;
            for (i, sg) in signs.iter_mut().enumerate() {
                *sg = sign_at(pattern, i);
            }
            for (j, law) in self.noise.iter().enumerate() {
                x.push(signs[self.partition.cluster_of(j)] * law.sample(rng));
            }
            s.push(pattern);
            y.push(self.target.eval(pattern));
        }
        Batch { dim: d, x, s, y }
    }

    /// Population second-moment (= covariance, since `E[x] = 0`) matrix,
    /// row-major `d x d`.
    pub fn population_covariance(&self) -> Vec<f64> {
        let d = self.dim();
        let means = self.means();
        let mut cov = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] = if i == j {
                    self.noise[i].second_moment()
                } else if self.partition.cluster_of(i) == self.partition.cluster_of(j) {
                    means[i] * means[j]
                } else {
                    0.0
                };
            }
        }
        cov
    }
}

/// Homogeneous binary-symmetric-channel model with contiguous equal clusters.
pub fn make_bsc_model(n_clusters: usize, dim: usize, flip_prob: f64, target: BooleanFunction) -> Result<DataModel> {
    let partition = ClusterPartition::contiguous_equal(n_clusters, dim)?;
    DataModel::new(partition, vec![NoiseLaw::Rademacher { flip_prob }; dim], target)
}

/// BSC noise with flip probability `δ` on every coordinate of an arbitrary
/// partition.
pub fn make_bsc_model_with_partition(partition: ClusterPartition, flip_prob: f64, target: BooleanFunction) -> Result<DataModel> {
    let dim = partition.dim();
    DataModel::new(partition, vec![NoiseLaw::Rademacher { flip_prob }; dim], target)
}

/// Gaussian noise `ξ_j ~ N(m_j, σ²)` under an arbitrary partition.
pub fn make_gaussian_mixture_model(
    means: &[f64],
    variance: f64,
    partition: ClusterPartition,
    target: BooleanFunction,
) -> Result<DataModel> {
    if means.len() != partition.dim() {
        return Err(Error::ShapeMismatch { expected: partition.dim(), got: means.len() });
    }
    if !(variance > 0.0) {
        return Err(Error::InvalidNoise { coord: 0, reason: format!("variance {variance} must be positive") });
    }
    let noise = means.iter().map(|&mean| NoiseLaw::Gaussian { mean, variance }).collect();
    DataModel::new(partition, noise, target)
}

/// Gaussian model whose noise matches the first two moments of a BSC with
/// flip probability `δ`: mean `1 - 2δ`, variance `4δ(1 - δ)`.
pub fn make_moment_matched_gaussian(n_clusters: usize, dim: usize, flip_prob: f64, target: BooleanFunction) -> Result<DataModel> {
    let partition = ClusterPartition::contiguous_equal(n_clusters, dim)?;
    let mean = 1.0 - 2.0 * flip_prob;
    let variance = 4.0 * flip_prob * (1.0 - flip_prob);
    let noise = vec![NoiseLaw::Gaussian { mean, variance }; dim];
    DataModel::new(partition, noise, target)
}

/// Draws `len` samples as explicit records.
pub fn sample_batch(model: &DataModel, len: usize, rng: &mut Rng) -> Vec<Sample> {
    model.sample(len, rng).to_samples(model.n_clusters())
}

pub fn signal_stats(model: &DataModel) -> SignalStats {
    let n = model.n_clusters();
    let mut v = vec![0.0; n];
    for (j, law) in model.noise().iter().enumerate() {
        let m = law.mean();
        v[model.partition().cluster_of(j)] += m * m;
    }
    let v_sum: f64 = v.iter().sum();
    let v_min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let d = model.dim() as f64;
    let mu = model.noise().iter().map(NoiseLaw::variance).sum::<f64>() / d;
    SignalStats { v, v_min, v_sum, mu, snr_ratio: v_sum / d }
}

/// `pass_a ⟺ v_min / v_sum ≥ c`, `pass_b ⟺ v_sum / d ≥ c`; both fail when
/// there is no signal at all.
pub fn check_identifiability(model: &DataModel, c: f64) -> IdentifiabilityReport {
    let st = signal_stats(model);
    if st.v_sum <= 0.0 {
        return IdentifiabilityReport { pass_a: false, pass_b: false, v_min_ratio: 0.0, snr_ratio: 0.0 };
    }
    let v_min_ratio = st.v_min / st.v_sum;
    IdentifiabilityReport { pass_a: v_min_ratio >= c, pass_b: st.snr_ratio >= c, v_min_ratio, snr_ratio: st.snr_ratio }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolean::{named_target, NamedTarget};
    use crate::rng::seeded;

    fn parity(n: usize) -> BooleanFunction {
        named_target(NamedTarget::Parity, n).unwrap()
    }

    #[test]
    fn balanced_partition_sizes() {
        let p = ClusterPartition::contiguous_balanced(3, 100).unwrap();
        assert_eq!(p.sizes(), vec![34, 33, 33]);
        assert_eq!(p.cluster_of(33), 0);
        assert_eq!(p.cluster_of(34), 1);
        assert_eq!(ClusterPartition::contiguous_balanced(3, 12).unwrap(), ClusterPartition::contiguous_equal(3, 12).unwrap());
        assert!(ClusterPartition::contiguous_balanced(4, 3).is_err());
        let m = make_bsc_model_with_partition(p, 0.2, parity(3)).unwrap();
        assert!((signal_stats(&m).v_sum - 100.0 * 0.36).abs() < 1e-10);
    }

    #[test]
    fn bsc_signal_stats() {
        let m = make_bsc_model(3, 12, 0.2, parity(3)).unwrap();
        let st = signal_stats(&m);
        for v in &st.v {
            assert!((v - 1.44).abs() < 1e-12);
        }
        assert!((st.v_sum - 4.32).abs() < 1e-12);
        assert!((st.v_min - 1.44).abs() < 1e-12);
        assert!((st.mu - 0.64).abs() < 1e-12);
        let rep = check_identifiability(&m, 0.3);
        assert!(rep.pass_a && rep.pass_b);
        assert!((rep.v_min_ratio - 1.0 / 3.0).abs() < 1e-15);
        assert!((rep.snr_ratio - 0.36).abs() < 1e-12);
    }

    #[test]
    fn bsc_half_flip_has_no_signal() {
        let m = make_bsc_model(3, 12, 0.5, parity(3)).unwrap();
        assert_eq!(signal_stats(&m).v_sum, 0.0);
        let rep = check_identifiability(&m, 0.01);
        assert!(!rep.pass_a && !rep.pass_b);
        let cov = m.population_covariance();
        for i in 0..12 {
            for j in 0..12 {
                assert_eq!(cov[i * 12 + j], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn bsc_requires_equal_clusters() {
        assert!(matches!(make_bsc_model(3, 10, 0.1, parity(3)), Err(Error::UnequalClusters { dim: 10, clusters: 3 })));
        assert!(make_bsc_model(3, 12, 1.5, parity(3)).is_err());
    }

    #[test]
    fn noiseless_copy_model() {
        let f = named_target(NamedTarget::Dictator, 1).unwrap();
        let m = make_bsc_model(1, 1, 0.0, f).unwrap();
        assert_eq!(signal_stats(&m).v_sum, 1.0);
        let mut rng = seeded(3);
        for smp in sample_batch(&m, 50, &mut rng) {
            assert_eq!(smp.x[0], smp.s[0]);
            assert_eq!(smp.y, smp.s[0]);
        }
    }

    #[test]
    fn gaussian_models() {
        let f1 = named_target(NamedTarget::Dictator, 1).unwrap();
        let p1 = ClusterPartition::contiguous_equal(1, 4).unwrap();
        let m = make_gaussian_mixture_model(&[1.0; 4], 1.0, p1, f1.clone()).unwrap();
        assert!((signal_stats(&m).v_sum - 4.0).abs() < 1e-12);

        let p2 = ClusterPartition::contiguous(&[3, 3]).unwrap();
        let xor = parity(2);
        let m = make_gaussian_mixture_model(&[0.8; 6], 0.36, p2, xor).unwrap();
        assert!((signal_stats(&m).v_sum - 3.84).abs() < 1e-12);

        let p3 = ClusterPartition::contiguous_equal(1, 2).unwrap();
        let m = make_gaussian_mixture_model(&[0.0, 0.0], 1.0, p3, f1.clone()).unwrap();
        assert!(!check_identifiability(&m, 0.01).pass_a);

        let p4 = ClusterPartition::contiguous_equal(1, 3).unwrap();
        let m = make_gaussian_mixture_model(&[1.0, 0.0, 0.0], 1.0, p4.clone(), f1.clone()).unwrap();
        let st = signal_stats(&m);
        assert!((st.v_sum - 1.0).abs() < 1e-15 && (st.mu - 1.0).abs() < 1e-15);

        assert!(matches!(make_gaussian_mixture_model(&[1.0; 2], 1.0, p4.clone(), f1.clone()), Err(Error::ShapeMismatch { .. })));
        assert!(make_gaussian_mixture_model(&[1.0; 3], 0.0, p4, f1).is_err());
    }

    #[test]
    fn zero_mean_cluster_fails_part_a() {
        let p = ClusterPartition::contiguous(&[2, 2]).unwrap();
        let m = make_gaussian_mixture_model(&[1.0, 1.0, 0.0, 0.0], 1.0, p, parity(2)).unwrap();
        let rep = check_identifiability(&m, 0.01);
        assert!(!rep.pass_a);
        assert_eq!(rep.v_min_ratio, 0.0);
    }

    #[test]
    fn partition_validation() {
        assert!(ClusterPartition::new(2, vec![0, 0, 0]).is_err());
        assert!(ClusterPartition::new(2, vec![0, 2]).is_err());
        assert!(ClusterPartition::new(3, vec![0, 1]).is_err());
        let p = ClusterPartition::contiguous(&[1, 3]).unwrap();
        assert_eq!(p.assignment(), &[0, 1, 1, 1]);
        assert_eq!(p.sizes(), vec![1, 3]);
        let mut rng = seeded(1);
        let q = ClusterPartition::contiguous_equal(3, 30).unwrap().permuted(&mut rng);
        assert_eq!(q.sizes(), vec![10, 10, 10]);
    }

    #[test]
    fn table_noise_validation() {
        let bad = NoiseLaw::BoundedTable { values: vec![1.0, -1.0], probs: vec![0.5, 0.4] };
        assert!(bad.validate(0).is_err());
        let ok = NoiseLaw::BoundedTable { values: vec![2.0, -1.0], probs: vec![0.25, 0.75] };
        ok.validate(0).unwrap();
        assert!((ok.mean() + 0.25).abs() < 1e-15);
        assert!((ok.variance() - (0.25 * 4.0 + 0.75 - 0.0625)).abs() < 1e-15);
        assert!(NoiseLaw::Gaussian { mean: 0.0, variance: -1.0 }.validate(0).is_err());
    }

    #[test]
    fn population_covariance_blocks() {
        let m = make_bsc_model(2, 4, 0.2, parity(2)).unwrap();
        let c = m.population_covariance();
        let expect = [
            [1.0, 0.36, 0.0, 0.0],
            [0.36, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.36],
            [0.0, 0.0, 0.36, 1.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!((c[i * 4 + j] - expect[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let p = ClusterPartition::new(2, vec![1, 0, 0, 1, 1]).unwrap();
        let noise = vec![
            NoiseLaw::Rademacher { flip_prob: 0.1 },
            NoiseLaw::Gaussian { mean: 0.5, variance: 0.25 },
            NoiseLaw::BoundedTable { values: vec![1.0, 3.0], probs: vec![0.5, 0.5] },
            NoiseLaw::Rademacher { flip_prob: 0.0 },
            NoiseLaw::Gaussian { mean: -1.0, variance: 2.0 },
        ];
        let m = DataModel::new(p, noise, parity(2)).unwrap();
        let js = serde_json::to_string(&m).unwrap();
        assert!(js.starts_with(r#"{"n_clusters":2,"dim":5,"assignment":[1,0,0,1,1],"noise":[{"kind":"rademacher","params":{"flip_prob":0.1}}"#));
        let back: DataModel = serde_json::from_str(&js).unwrap();
        assert_eq!(back, m);
        assert_eq!(serde_json::to_string(&back).unwrap(), js);
        let broken = js.replace(r#""dim":5"#, r#""dim":4"#);
        assert!(serde_json::from_str::<DataModel>(&broken).is_err());
    }

    #[test]
    fn rejects_mismatched_target() {
        let p = ClusterPartition::contiguous_equal(2, 4).unwrap();
        assert!(DataModel::new(p, vec![NoiseLaw::Rademacher { flip_prob: 0.1 }; 4], parity(3)).is_err());
    }
}

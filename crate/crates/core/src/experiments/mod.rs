//! Orchestration behind the `latentclust` command line: sweeps over `d` or
//! `δ`, baseline comparisons, certificate runs, CSV ingestion and
//! accuracy-versus-sample-size curves. Every run writes into a directory named
//! by the hash of its canonical configuration.

pub mod accuracy;
pub mod certify;
pub mod compare;
pub mod ingest;
pub mod selfcheck;
pub mod sweep;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::boolean::BooleanFunction;
use crate::error::{Error, Result};
use crate::latent_data::{ClusterPartition, DataModel, NoiseLaw};
use crate::rng::{stream, Phase};

pub use accuracy::{run_accuracy_vs_n, AccuracyConfig, AccuracyReport};
pub use certify::{run_certify, CertifyConfig, CertifyReport};
pub use compare::{run_baseline_compare, CompareConfig, CompareReport};
pub use ingest::{generate_csv, ingest, GenerateConfig, IngestConfig, TabularDataset};
pub use selfcheck::{run_selfcheck, Check};
pub use sweep::{run_sweep, ExperimentRecord, SweepAxis, SweepConfig, SweepReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    /// Rademacher noise with flip probability `δ`.
    #[default]
    Bsc,
    /// Gaussian noise matching the BSC mean `1 - 2δ` and variance `4δ(1 - δ)`.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Contiguous blocks whose sizes differ by at most one.
    #[default]
    Contiguous,
    /// The contiguous sizes with coordinates shuffled per seed.
    Permuted,
}

/// A homogeneous model family with `d` and `δ` as free parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelTemplate {
    #[serde(default)]
    pub family: NoiseFamily,
    pub dim: usize,
    pub flip_prob: f64,
    pub target: BooleanFunction,
    #[serde(default)]
    pub layout: Layout,
}

impl ModelTemplate {
    pub fn n_clusters(&self) -> usize {
        self.target.n()
    }

    pub fn build(&self, seed: u64) -> Result<DataModel> {
        self.build_with(self.dim, self.flip_prob, seed)
    }

    /// Model at an explicit `(d, δ)`; `seed` only matters for permuted layouts.
    pub fn build_with(&self, dim: usize, flip_prob: f64, seed: u64) -> Result<DataModel> {
        if !(0.0..=1.0).contains(&flip_prob) {
            return Err(Error::Config(format!("flip probability {flip_prob} outside [0,1]")));
        }
        let n = self.n_clusters();
        let mut partition = ClusterPartition::contiguous_balanced(n, dim)?;
        if self.layout == Layout::Permuted {
            partition = partition.permuted(&mut stream(seed, dim as u64, Phase::Other));
        }
        let law = match self.family {
            NoiseFamily::Bsc => NoiseLaw::Rademacher { flip_prob },
            NoiseFamily::Gaussian => NoiseLaw::Gaussian { mean: 1.0 - 2.0 * flip_prob, variance: 4.0 * flip_prob * (1.0 - flip_prob) },
        };
        DataModel::new(partition, vec![law; dim], self.target.clone())
    }
}

/// Hex SHA-256 of the canonical (sorted-key, compact) JSON form of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let canonical = serde_json::to_string(&serde_json::to_value(value)?)?;
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Creates `out/<first 16 hex chars of hash>` and writes `config.json`.
pub fn prepare_output<T: Serialize>(out: &Path, hash: &str, config: &T) -> Result<PathBuf> {
    let dir = out.join(&hash[..16]);
    fs::create_dir_all(&dir)?;
    write_json(&dir.join("config.json"), &ConfigDocument { config_hash: hash, config })?;
    Ok(dir)
}

#[derive(Serialize)]
struct ConfigDocument<'a, T> {
    config_hash: &'a str,
    config: &'a T,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    // Going through `Value` sorts object keys, so files are stable.
    let text = serde_json::to_string_pretty(&serde_json::to_value(value)?)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Sample mean and standard deviation (`n - 1` denominator; 0 for `n < 2`).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// `1.96 · sd / √n`.
pub fn ci95_half_width(sd: f64, n: usize) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    1.96 * sd / (n as f64).sqrt()
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub(crate) fn check_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::Config("seed list is empty".into()));
    }
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("seeds must be distinct".into()));
    }
    Ok(())
}

/// Runs `f` over `items` on a pool of `jobs` threads, keeping input order.
pub fn parallel_map<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    if jobs <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(e) => {
            log::warn!("thread pool unavailable ({e}); running sequentially");
            items.iter().map(f).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolean::{named_target, NamedTarget};

    #[test]
    fn hash_is_stable_and_key_order_free() {
        let a: serde_json::Value = serde_json::from_str(r#"{"b":1,"a":[1,2]}"#).unwrap();
        let b: serde_json::Value = serde_json::from_str(r#"{"a":[1,2],"b":1}"#).unwrap();
        assert_eq!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        assert_eq!(config_hash(&a).unwrap().len(), 64);
        let c: serde_json::Value = serde_json::from_str(r#"{"a":[1,2],"b":2}"#).unwrap();
        assert_ne!(config_hash(&a).unwrap(), config_hash(&c).unwrap());
    }

    #[test]
    fn template_builds_balanced_models() {
        let t = ModelTemplate { family: NoiseFamily::Bsc, dim: 100, flip_prob: 0.2, target: named_target(NamedTarget::Parity, 3).unwrap(), layout: Layout::Contiguous };
        let m = t.build(0).unwrap();
        assert_eq!(m.partition().sizes(), vec![34, 33, 33]);
        let g = ModelTemplate { family: NoiseFamily::Gaussian, ..t.clone() }.build_with(30, 0.25, 0).unwrap();
        assert_eq!(g.noise()[0], NoiseLaw::Gaussian { mean: 0.5, variance: 0.75 });
        let p = ModelTemplate { layout: Layout::Permuted, ..t.clone() };
        assert_eq!(p.build(3).unwrap(), p.build(3).unwrap());
        assert_ne!(p.build(3).unwrap().partition(), m.partition());
        assert!(t.build_with(100, 1.5, 0).is_err());
        let js = r#"{"dim":12,"flip_prob":0.1,"target":{"kind":"named","name":"parity","n":3}}"#;
        let parsed: ModelTemplate = serde_json::from_str(js).unwrap();
        assert_eq!(parsed.family, NoiseFamily::Bsc);
        assert!(serde_json::from_str::<ModelTemplate>(&js.replace("dim", "dimension")).is_err());
    }

    #[test]
    fn summary_statistics() {
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((ci95_half_width(2.0, 4) - 1.96).abs() < 1e-15);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(check_seeds(&[1, 2, 1]).is_err());
        assert!(check_seeds(&[]).is_err());
    }
}

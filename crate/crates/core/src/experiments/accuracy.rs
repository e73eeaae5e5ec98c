//! Test accuracy against training-set size for several feature counts on an
//! ingested binary dataset.

use std::fs::File;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{check_seeds, config_hash, ingest, mean_sd, parallel_map, prepare_output, write_json, IngestConfig, TabularDataset};
use crate::error::{Error, Result};
use crate::network::{init_uniform, Activation, TwoLayerNet};
use crate::rng::{stream, Phase, Rng};
use crate::training::{loss_and_grad, predict, LossScale};

/// Joint SGD on a fixed training subsample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub n: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub activation: Activation,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { n: 64, batch_size: 32, learning_rate: 0.01, epochs: 30, activation: Activation::Relu }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("fit: n, batch_size and epochs must be positive".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("fit: learning_rate must be finite and nonnegative".into()));
        }
        self.activation.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccuracyConfig {
    pub path: PathBuf,
    /// Feature counts `d`.
    pub dims: Vec<usize>,
    /// Training-set sizes `n`.
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub trainer: FitConfig,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Seed of the train/test split, shared by every cell.
    #[serde(default)]
    pub split_seed: u64,
}

fn default_test_fraction() -> f64 {
    0.2
}

impl AccuracyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.sizes.is_empty() || self.dims.contains(&0) || self.sizes.contains(&0) {
            return Err(Error::Config("accuracy-vs-n: dims and sizes must be nonempty lists of positive values".into()));
        }
        check_seeds(&self.seeds)?;
        self.trainer.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCell {
    pub dim: usize,
    /// Requested training size.
    pub size: usize,
    /// Size actually used after clamping to the training split.
    pub used: usize,
    pub seed: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub dim: usize,
    pub size: usize,
    pub seeds: usize,
    pub mean: f64,
    /// One standard deviation across seeds.
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub config_hash: String,
    pub cells: Vec<AccuracyCell>,
    pub rows: Vec<AccuracyRow>,
    pub out_dir: Option<PathBuf>,
}

impl AccuracyReport {
    pub fn row(&self, dim: usize, size: usize) -> Option<&AccuracyRow> {
        self.rows.iter().find(|r| r.dim == dim && r.size == size)
    }
}

/// Stratified subsample of `n` rows from `pool`, allocating per class by
/// largest remainder.
pub fn stratified_subsample(pool: &[usize], labels: &[usize], n_classes: usize, n: usize, rng: &mut Rng) -> Vec<usize> {
    let n = n.min(pool.len());
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for &r in pool {
        by_class[labels[r]].push(r);
    }
    let total = pool.len() as f64;
    let quotas: Vec<f64> = by_class.iter().map(|c| n as f64 * c.len() as f64 / total).collect();
    let mut take: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut rest: Vec<usize> = (0..n_classes).collect();
    rest.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
    let mut missing = n - take.iter().sum::<usize>();
    for &c in rest.iter().cycle().take(n_classes * 2) {
        if missing == 0 {
            break;
        }
        if take[c] < by_class[c].len() {
            take[c] += 1;
            missing -= 1;
        }
    }
    let mut out = Vec::with_capacity(n);
    for (c, rows) in by_class.iter_mut().enumerate() {
        rows.shuffle(rng);
        out.extend_from_slice(&rows[..take[c]]);
    }
    out.sort_unstable();
    out
}

/// Feature matrix of `rows`, standardized with the mean and standard
/// deviation of `reference` rows.
fn standardized(ds: &TabularDataset, rows: &[usize], reference: &[usize]) -> Vec<f64> {
    let d = ds.dim;
    let mut mean = vec![0.0; d];
    let mut sq = vec![0.0; d];
    for &r in reference {
        for (j, v) in ds.row(r).iter().enumerate() {
            mean[j] += v;
            sq[j] += v * v;
        }
    }
    let k = reference.len().max(1) as f64;
    let sd: Vec<f64> = (0..d)
        .map(|j| {
            mean[j] /= k;
            let var = (sq[j] / k - mean[j] * mean[j]).max(0.0);
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    rows.iter().flat_map(|&r| ds.row(r).iter().enumerate().map(|(j, v)| (v - mean[j]) / sd[j]).collect::<Vec<_>>()).collect()
}

/// Epochs of shuffled minibatch SGD on the mean squared error.
pub fn fit_rows(x: &[f64], y: &[f64], d: usize, cfg: &FitConfig, rng_init: &mut Rng, rng_order: &mut Rng) -> Result<TwoLayerNet> {
    let mut net = init_uniform(cfg.n, d, cfg.activation.clone(), rng_init)?;
    let rows = y.len();
    let mut order: Vec<usize> = (0..rows).collect();
    let mut bx = Vec::with_capacity(cfg.batch_size * d);
    let mut by = Vec::with_capacity(cfg.batch_size);
    let mut step = 0;
    for _ in 0..cfg.epochs {
        order.shuffle(rng_order);
        for chunk in order.chunks(cfg.batch_size) {
            step += 1;
            bx.clear();
            by.clear();
            for &r in chunk {
                bx.extend_from_slice(&x[r * d..(r + 1) * d]);
                by.push(y[r]);
            }
            let (_, g) = loss_and_grad(&net, &bx, &by, LossScale::Mean);
            if !g.is_finite() {
                return Err(Error::NonFiniteGradient { step, detail: "fixed-sample fit".into() });
            }
            let lr = cfg.learning_rate;
            net.w.iter_mut().zip(&g.w).for_each(|(p, g)| *p -= lr * g);
            net.a.iter_mut().zip(&g.a).for_each(|(p, g)| *p -= lr * g);
            net.b.iter_mut().zip(&g.b).for_each(|(p, g)| *p -= lr * g);
        }
    }
    Ok(net)
}

fn run_cell(cfg: &AccuracyConfig, ds: &TabularDataset, dim_index: usize, size_index: usize, seed: u64) -> Result<AccuracyCell> {
    let trial = (dim_index * cfg.sizes.len() + size_index) as u64;
    let size = cfg.sizes[size_index];
    let chosen = stratified_subsample(&ds.train, &ds.labels, ds.n_classes(), size, &mut stream(seed, trial, Phase::Split));
    let target = |r: usize| if ds.labels[r] == 1 { 1.0 } else { -1.0 };
    let x = standardized(ds, &chosen, &chosen);
    let y: Vec<f64> = chosen.iter().map(|&r| target(r)).collect();
    let net = fit_rows(&x, &y, ds.dim, &cfg.trainer, &mut stream(seed, trial, Phase::Init), &mut stream(seed, trial, Phase::SecondLayer))?;
    let xt = standardized(ds, &ds.test, &chosen);
    let pred = predict(&net, &xt, ds.test.len());
    let correct = pred.iter().zip(&ds.test).filter(|(p, &r)| (**p >= 0.0) == (target(r) > 0.0)).count();
    Ok(AccuracyCell { dim: ds.dim, size, used: chosen.len(), seed, accuracy: correct as f64 / ds.test.len().max(1) as f64 })
}

#[derive(Serialize)]
struct Hashed<'a> {
    command: &'static str,
    config: &'a AccuracyConfig,
}

pub fn run_accuracy_vs_n(cfg: &AccuracyConfig, out: Option<&Path>, jobs: usize) -> Result<AccuracyReport> {
    cfg.validate()?;
    let hash = config_hash(&Hashed { command: "accuracy-vs-n", config: cfg })?;
    let mut datasets = Vec::with_capacity(cfg.dims.len());
    for &dim in &cfg.dims {
        let ds = ingest(&IngestConfig { path: cfg.path.clone(), dim, test_fraction: cfg.test_fraction, seed: cfg.split_seed, correlation_out: None })?;
        if ds.n_classes() != 2 {
            return Err(Error::Dataset(format!("accuracy-vs-n needs two classes, found {}", ds.n_classes())));
        }
        if ds.test.is_empty() {
            return Err(Error::Config("accuracy-vs-n: test split is empty".into()));
        }
        datasets.push(ds);
    }
    let jobs_list: Vec<(usize, usize, u64)> = (0..cfg.dims.len())
        .flat_map(|d| (0..cfg.sizes.len()).flat_map(move |n| cfg.seeds.iter().map(move |&s| (d, n, s))))
        .collect();
    let cells = parallel_map(&jobs_list, jobs, |&(d, n, s)| run_cell(cfg, &datasets[d], d, n, s)).into_iter().collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for ds in &datasets {
        for &size in &cfg.sizes {
            let acc: Vec<f64> = cells.iter().filter(|c| c.dim == ds.dim && c.size == size).map(|c| c.accuracy).collect();
            let (mean, sd) = mean_sd(&acc);
            rows.push(AccuracyRow { dim: ds.dim, size, seeds: acc.len(), mean, sd });
        }
    }
    let out_dir = match out {
        Some(out) => {
            let dir = prepare_output(out, &hash, &Hashed { command: "accuracy-vs-n", config: cfg })?;
            write_json(&dir.join("results.json"), &cells)?;
            let mut w = csv::Writer::from_writer(File::create(dir.join("results.csv"))?);
            w.write_record(["config_hash", "dim", "size", "used", "seed", "accuracy"])?;
            for c in &cells {
                w.write_record([hash.clone(), c.dim.to_string(), c.size.to_string(), c.used.to_string(), c.seed.to_string(), c.accuracy.to_string()])?;
            }
            w.flush()?;
            let mut w = csv::Writer::from_writer(File::create(dir.join("aggregate.csv"))?);
            w.write_record(["config_hash", "dim", "size", "seeds", "mean", "sd"])?;
            for r in &rows {
                w.write_record([hash.clone(), r.dim.to_string(), r.size.to_string(), r.seeds.to_string(), r.mean.to_string(), r.sd.to_string()])?;
            }
            w.flush()?;
            Some(dir)
        }
        None => None,
    };
    Ok(AccuracyReport { config_hash: hash, cells, rows, out_dir })
}

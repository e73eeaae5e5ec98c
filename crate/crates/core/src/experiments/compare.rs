//! Partition recovery by spectral clustering and covariance thresholding
//! across sample budgets.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ci95_half_width, config_hash, mean_sd, parallel_map, prepare_output, write_json, ModelTemplate, NoiseFamily};
use crate::baselines::{covariance_threshold_cluster, empirical_covariance, partition_error, spectral_cluster, Method};
use crate::error::{Error, Result};
use crate::rng::{stream, Phase};

fn default_methods() -> Vec<Method> {
    vec![Method::Spectral, Method::Threshold]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub model: ModelTemplate,
    /// Sample budgets `B`.
    pub budgets: Vec<usize>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// Thresholding level; defaults to `½(1 - 2δ)²`.
    #[serde(default)]
    pub threshold: Option<f64>,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

impl CompareConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budgets.is_empty() || self.budgets.contains(&0) {
            return Err(Error::Config("baselines: budgets must be a nonempty list of positive sizes".into()));
        }
        if self.methods.is_empty() || self.trials == 0 {
            return Err(Error::Config("baselines: need at least one method and one trial".into()));
        }
        if self.model.family != NoiseFamily::Bsc {
            return Err(Error::Config("baselines: comparison is defined for the BSC family".into()));
        }
        Ok(())
    }

    pub fn effective_threshold(&self) -> f64 {
        self.threshold.unwrap_or_else(|| {
            let m = 1.0 - 2.0 * self.model.flip_prob;
            0.5 * m * m
        })
    }
}

/// Smallest budget for which thresholding provably recovers the clusters
/// with high probability: `⌈16 ln d / (1 - 2δ)⁴⌉`.
pub fn threshold_budget(dim: usize, flip_prob: f64) -> usize {
    let m = 1.0 - 2.0 * flip_prob;
    (16.0 * (dim as f64).ln() / m.powi(4)).ceil() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareCell {
    pub method: Method,
    pub budget: usize,
    pub trial: usize,
    pub error: Option<f64>,
    pub exact: bool,
    pub n_found: Option<usize>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub method: Method,
    pub budget: usize,
    pub trials: usize,
    pub mean_error: f64,
    pub sd: f64,
    pub ci95: f64,
    pub exact_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub config_hash: String,
    pub threshold: f64,
    pub cells: Vec<CompareCell>,
    pub rows: Vec<CompareRow>,
    pub out_dir: Option<PathBuf>,
}

impl CompareReport {
    pub fn n_failed(&self) -> usize {
        self.cells.iter().filter(|c| c.failure.is_some()).count()
    }

    pub fn row(&self, method: Method, budget: usize) -> Option<&CompareRow> {
        self.rows.iter().find(|r| r.method == method && r.budget == budget)
    }
}

#[derive(Serialize)]
struct Hashed<'a> {
    command: &'static str,
    config: &'a CompareConfig,
}

fn run_trial(cfg: &CompareConfig, threshold: f64, budget_index: usize, trial: usize) -> Vec<CompareCell> {
    let budget = cfg.budgets[budget_index];
    let index = (budget_index * cfg.trials + trial) as u64;
    let model = match cfg.model.build(cfg.seed.wrapping_add(trial as u64)) {
        Ok(m) => m,
        Err(e) => {
            return cfg
                .methods
                .iter()
                .map(|&method| CompareCell { method, budget, trial, error: None, exact: false, n_found: None, failure: Some(e.to_string()) })
                .collect()
        }
    };
    // Both methods see the same sample.
    let batch = model.sample(budget, &mut stream(cfg.seed, index, Phase::FirstLayer));
    let c = empirical_covariance(&batch);
    let d = model.dim();
    let truth = model.partition().assignment();
    cfg.methods
        .iter()
        .map(|&method| {
            let found = match method {
                Method::Threshold => covariance_threshold_cluster(&c, d, threshold),
                Method::Spectral => spectral_cluster(&c, d, model.n_clusters(), &mut stream(cfg.seed, index, Phase::Other)),
            };
            match found.and_then(|p| partition_error(&p.assignment, truth).map(|e| (e, p.n_found))) {
                Ok((error, n_found)) => CompareCell { method, budget, trial, error: Some(error), exact: error == 0.0, n_found: Some(n_found), failure: None },
                Err(e) => CompareCell { method, budget, trial, error: None, exact: false, n_found: None, failure: Some(e.to_string()) },
            }
        })
        .collect()
}

/// Misclustering rate per `(method, budget)` over `trials` independent
/// samples. Both methods share each sample.
pub fn run_baseline_compare(cfg: &CompareConfig, out: Option<&Path>, jobs: usize) -> Result<CompareReport> {
    cfg.validate()?;
    let threshold = cfg.effective_threshold();
    let hash = config_hash(&Hashed { command: "baselines", config: cfg })?;
    let jobs_list: Vec<(usize, usize)> = (0..cfg.budgets.len()).flat_map(|b| (0..cfg.trials).map(move |t| (b, t))).collect();
    let cells: Vec<CompareCell> = parallel_map(&jobs_list, jobs, |&(b, t)| run_trial(cfg, threshold, b, t)).into_iter().flatten().collect();
    let mut rows = Vec::new();
    for &method in &cfg.methods {
        for &budget in &cfg.budgets {
            let sel: Vec<&CompareCell> = cells.iter().filter(|c| c.method == method && c.budget == budget).collect();
            let errs: Vec<f64> = sel.iter().filter_map(|c| c.error).collect();
            let (mean_error, sd) = mean_sd(&errs);
            rows.push(CompareRow {
                method,
                budget,
                trials: errs.len(),
                mean_error,
                sd,
                ci95: ci95_half_width(sd, errs.len()),
                exact_rate: sel.iter().filter(|c| c.exact).count() as f64 / sel.len().max(1) as f64,
            });
        }
    }
    let out_dir = match out {
        Some(out) => {
            let dir = prepare_output(out, &hash, &Hashed { command: "baselines", config: cfg })?;
            write_json(&dir.join("results.json"), &cells)?;
            let mut w = csv::Writer::from_writer(File::create(dir.join("results.csv"))?);
            w.write_record(["config_hash", "seed", "method", "budget", "trial", "error", "exact", "n_found", "failure"])?;
            for c in &cells {
                w.write_record([
                    hash.clone(),
                    cfg.seed.to_string(),
                    c.method.to_string(),
                    c.budget.to_string(),
                    c.trial.to_string(),
                    c.error.map(|e| e.to_string()).unwrap_or_default(),
                    c.exact.to_string(),
                    c.n_found.map(|e| e.to_string()).unwrap_or_default(),
                    c.failure.clone().unwrap_or_default(),
                ])?;
            }
            w.flush()?;
            let mut w = csv::Writer::from_writer(File::create(dir.join("aggregate.csv"))?);
            w.write_record(["config_hash", "method", "budget", "trials", "mean_error", "sd", "ci95", "exact_rate"])?;
            for r in &rows {
                w.write_record([
                    hash.clone(),
                    r.method.to_string(),
                    r.budget.to_string(),
                    r.trials.to_string(),
                    r.mean_error.to_string(),
                    r.sd.to_string(),
                    r.ci95.to_string(),
                    r.exact_rate.to_string(),
                ])?;
            }
            w.flush()?;
            Some(dir)
        }
        None => None,
    };
    Ok(CompareReport { config_hash: hash, threshold, cells, rows, out_dir })
}

//! Certificate pipeline: one population-gradient step from a random
//! first-layer row, the projection grid of the resulting conditional mean,
//! the minimum-norm interpolating output layer, and its population error.

use std::fs::File;
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{config_hash, median, parallel_map, prepare_output, write_json, ModelTemplate};
use crate::error::{Error, Result};
use crate::latent_data::{signal_stats, DataModel};
use crate::network::{check_activation_assumption, Activation, ActivationReport};
use crate::rng::{stream, Phase};
use crate::theory::{alpha_population, build_certificate, cluster_projection, grid_labels, warm_start_row, ProjectionGrid, DEFAULT_DEDUP_TOL};
use crate::training::{draw_biases, predict};

fn default_activation() -> Activation {
    Activation::truncated_exp(8)
}
fn default_n() -> usize {
    64
}
fn default_trials() -> usize {
    50
}
fn default_mc() -> usize {
    100_000
}
fn default_scale() -> f64 {
    100.0
}
fn default_c0() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    pub model: ModelTemplate,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    /// Hidden width.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Fresh samples for the population error estimate.
    #[serde(default = "default_mc")]
    pub mc_samples: usize,
    /// Step size `η` is chosen so that `η Σ_i |α_i v_i|` equals this value.
    /// Large values make the random-initialization part of the row
    /// negligible next to the gradient step.
    #[serde(default = "default_scale")]
    pub signal_scale: f64,
    /// Biases are drawn from `U[-A, A]`; defaults to twice the largest grid
    /// magnitude.
    #[serde(default)]
    pub bias_range: Option<f64>,
    /// Level for the activation assumption check (reported, not enforced).
    #[serde(default = "default_c0")]
    pub c0: f64,
    #[serde(default)]
    pub seed: u64,
}

impl CertifyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.trials == 0 || self.mc_samples == 0 {
            return Err(Error::Config("certify: n, trials and mc_samples must be positive".into()));
        }
        if !(self.signal_scale > 0.0 && self.signal_scale.is_finite()) {
            return Err(Error::Config("certify: signal_scale must be positive".into()));
        }
        if let Some(a) = self.bias_range {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::Config("certify: bias_range must be finite and nonnegative".into()));
            }
        }
        self.activation.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Certified,
    /// Two latent patterns with different labels share a grid value.
    Inconsistent,
    RankDeficient,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyTrial {
    pub trial: usize,
    pub status: TrialStatus,
    pub grid_size: usize,
    /// Smallest gap between grid values.
    pub gap: f64,
    /// Conditional standard deviation of `w·x` given the latent bits.
    pub noise_sd: f64,
    pub residual: Option<f64>,
    pub norm2: Option<f64>,
    pub condition: Option<f64>,
    pub population_abs_err: Option<f64>,
    pub population_mse: Option<f64>,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub config_hash: String,
    pub activation_check: ActivationReport,
    pub trials: Vec<CertifyTrial>,
    pub n_certified: usize,
    pub n_inconsistent: usize,
    pub n_rank_deficient: usize,
    /// Median population `|y - NN|` over certified trials.
    pub median_abs_err: f64,
    /// Median over all trials, counting uncertified ones as `+∞`.
    pub median_abs_err_all: f64,
    pub max_residual: f64,
    #[serde(skip)]
    pub out_dir: Option<PathBuf>,
}

impl CertifyReport {
    pub fn n_errors(&self) -> usize {
        self.trials.iter().filter(|t| t.status == TrialStatus::Error).count()
    }
}

#[derive(Serialize)]
struct Hashed<'a> {
    command: &'static str,
    config: &'a CertifyConfig,
}

/// First-layer row after one population-gradient step from a random
/// `w⁰ ~ N(0, I/d)`, scaled so that the step contributes `signal_scale` to
/// the largest noiseless pre-activation.
pub fn warm_row(model: &DataModel, act: &Activation, signal_scale: f64, rng: &mut crate::rng::Rng) -> Result<Vec<f64>> {
    let d = model.dim();
    let sd = 1.0 / (d as f64).sqrt();
    let w0: Vec<f64> = (0..d).map(|_| sd * Distribution::<f64>::sample(&StandardNormal, rng)).collect();
    let alpha = alpha_population(&w0, model, act)?.alpha;
    let v = signal_stats(model).v;
    let step_mass: f64 = alpha.iter().zip(&v).map(|(a, vi)| (a * vi).abs()).sum();
    let eta = if step_mass > 0.0 { signal_scale / step_mass } else { 0.0 };
    warm_start_row(&w0, &alpha, model, eta)
}

fn run_trial(cfg: &CertifyConfig, model: &DataModel, trial: usize) -> CertifyTrial {
    let mut out = CertifyTrial {
        trial,
        status: TrialStatus::Error,
        grid_size: 0,
        gap: f64::NAN,
        noise_sd: f64::NAN,
        residual: None,
        norm2: None,
        condition: None,
        population_abs_err: None,
        population_mse: None,
        detail: None,
    };
    let t = trial as u64;
    let result = (|| -> Result<()> {
        // A constant target needs no features: a zero row leaves the output
        // layer to reproduce the constant on its own.
        let w = if model.target().is_constant() {
            vec![0.0; model.dim()]
        } else {
            warm_row(model, &cfg.activation, cfg.signal_scale, &mut stream(cfg.seed, t, Phase::Init))?
        };
        out.noise_sd = crate::theory::smoothing_variance(&w, model).sqrt();
        let grid = ProjectionGrid::from_scaled(cluster_projection(&w, model)?, DEFAULT_DEDUP_TOL);
        out.grid_size = grid.len();
        out.gap = grid.gap;
        if grid_labels(model.target(), &grid).is_err() {
            out.status = TrialStatus::Inconsistent;
            return Ok(());
        }
        let max_u = grid.values.iter().fold(0.0f64, |m, u| m.max(u.abs()));
        let range = cfg.bias_range.unwrap_or(if max_u > 0.0 { 2.0 * max_u } else { 1.0 });
        let biases = draw_biases(cfg.n, range, &mut stream(cfg.seed, t, Phase::Biases));
        let cert = match build_certificate(&grid, model.target(), &biases, &cfg.activation) {
            Ok(c) => c,
            Err(Error::RankDeficient { condition }) => {
                out.status = TrialStatus::RankDeficient;
                out.condition = Some(condition);
                return Ok(());
            }
            Err(e) => return Err(e),
        };
        out.residual = Some(cert.residual);
        out.norm2 = Some(cert.norm2);
        out.condition = cert.condition;
        let net = cert.into_net(&w, &cfg.activation)?;
        let test = model.sample(cfg.mc_samples, &mut stream(cfg.seed, t, Phase::TestSet));
        let pred = predict(&net, &test.x, test.len());
        let len = test.len() as f64;
        out.population_abs_err = Some(pred.iter().zip(&test.y).map(|(p, y)| (y - p).abs()).sum::<f64>() / len);
        out.population_mse = Some(pred.iter().zip(&test.y).map(|(p, y)| (y - p) * (y - p)).sum::<f64>() / len);
        out.status = TrialStatus::Certified;
        Ok(())
    })();
    if let Err(e) = result {
        out.status = TrialStatus::Error;
        out.detail = Some(e.to_string());
    }
    out
}

pub fn run_certify(cfg: &CertifyConfig, out: Option<&Path>, jobs: usize) -> Result<CertifyReport> {
    cfg.validate()?;
    let hash = config_hash(&Hashed { command: "certify", config: cfg })?;
    let model = cfg.model.build(cfg.seed)?;
    let st = signal_stats(&model);
    let activation_check = check_activation_assumption(&cfg.activation, st.mu, st.v_sum, model.dim(), model.n_clusters(), cfg.c0)?;
    if !activation_check.pass {
        log::warn!("activation fails the smoothed-derivative check at c0 = {} (min |S^(k)(0)| = {})", cfg.c0, activation_check.min_abs);
    }
    let indices: Vec<usize> = (0..cfg.trials).collect();
    let trials = parallel_map(&indices, jobs, |&t| run_trial(cfg, &model, t));
    let count = |s: TrialStatus| trials.iter().filter(|t| t.status == s).count();
    let errs: Vec<f64> = trials.iter().filter_map(|t| t.population_abs_err).collect();
    let report = CertifyReport {
        config_hash: hash.clone(),
        activation_check,
        n_certified: count(TrialStatus::Certified),
        n_inconsistent: count(TrialStatus::Inconsistent),
        n_rank_deficient: count(TrialStatus::RankDeficient),
        median_abs_err: median(&errs),
        median_abs_err_all: median(&trials.iter().map(|t| t.population_abs_err.unwrap_or(f64::INFINITY)).collect::<Vec<_>>()),
        max_residual: trials.iter().filter_map(|t| t.residual).fold(0.0, f64::max),
        trials,
        out_dir: None,
    };
    let out_dir = match out {
        Some(out) => {
            let dir = prepare_output(out, &hash, &Hashed { command: "certify", config: cfg })?;
            write_json(&dir.join("results.json"), &report)?;
            let mut w = csv::Writer::from_writer(File::create(dir.join("results.csv"))?);
            w.write_record(["config_hash", "seed", "trial", "status", "grid_size", "gap", "noise_sd", "residual", "norm2", "population_abs_err", "population_mse"])?;
            let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
            for t in &report.trials {
                let status = serde_json::to_value(t.status)?;
                w.write_record([
                    hash.clone(),
                    cfg.seed.to_string(),
                    t.trial.to_string(),
                    status.as_str().unwrap_or_default().to_string(),
                    t.grid_size.to_string(),
                    t.gap.to_string(),
                    t.noise_sd.to_string(),
                    opt(t.residual),
                    opt(t.norm2),
                    opt(t.population_abs_err),
                    opt(t.population_mse),
                ])?;
            }
            w.flush()?;
            let mut w = csv::Writer::from_writer(File::create(dir.join("aggregate.csv"))?);
            w.write_record(["config_hash", "trials", "certified", "inconsistent", "rank_deficient", "median_abs_err", "median_abs_err_all", "max_residual"])?;
            w.write_record([
                hash.clone(),
                cfg.trials.to_string(),
                report.n_certified.to_string(),
                report.n_inconsistent.to_string(),
                report.n_rank_deficient.to_string(),
                report.median_abs_err.to_string(),
                report.median_abs_err_all.to_string(),
                report.max_residual.to_string(),
            ])?;
            w.flush()?;
            Some(dir)
        }
        None => None,
    };
    Ok(CertifyReport { out_dir, ..report })
}

//! Samples-to-threshold sweeps over the input dimension or the flip
//! probability.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{check_seeds, ci95_half_width, config_hash, mean_sd, parallel_map, prepare_output, write_json, ModelTemplate};
use crate::error::{Error, Result};
use crate::training::{samples_to_threshold, Outcome, TrainStreams, TrainerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Dim,
    FlipProb,
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepAxis::Dim => "dim",
            SweepAxis::FlipProb => "flip_prob",
        })
    }
}

fn default_threshold() -> f64 {
    0.05
}

fn default_max_samples() -> usize {
    10_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// The swept parameter of `model` is overridden by each axis value.
    pub model: ModelTemplate,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub trainer: TrainerConfig,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    pub seeds: Vec<u64>,
    #[serde(default = "default_max_samples")]
    pub max_samples: usize,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep: axis value list is empty".into()));
        }
        check_seeds(&self.seeds)?;
        if !(self.threshold > 0.0) || self.max_samples == 0 {
            return Err(Error::Config("sweep: threshold and max_samples must be positive".into()));
        }
        for &v in &self.values {
            match self.axis {
                SweepAxis::Dim if !(v >= 1.0 && v.fract() == 0.0) => {
                    return Err(Error::Config(format!("sweep: dimension {v} is not a positive integer")))
                }
                SweepAxis::FlipProb if !(0.0..=1.0).contains(&v) => {
                    return Err(Error::Config(format!("sweep: flip probability {v} outside [0,1]")))
                }
                _ => {}
            }
        }
        self.trainer.validate()
    }

    /// `(d, δ)` for one axis value.
    pub fn point(&self, value: f64) -> (usize, f64) {
        match self.axis {
            SweepAxis::Dim => (value as usize, self.model.flip_prob),
            SweepAxis::FlipProb => (self.model.dim, value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    ReachedThreshold,
    Censored,
    Diverged,
    Error,
}

impl CellStatus {
    pub fn is_failure(self) -> bool {
        matches!(self, CellStatus::Diverged | CellStatus::Error)
    }
}

/// One `(axis value, seed)` cell. Wall time is kept out of the serialized
/// record so reruns reproduce `results.*` byte for byte; it goes to
/// `timing.csv` instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub config_hash: String,
    pub seed: u64,
    pub axis: SweepAxis,
    pub value: f64,
    pub samples_to_threshold: Option<usize>,
    pub censored: bool,
    pub samples_consumed: usize,
    pub final_mse: Option<f64>,
    pub final_abs_err: Option<f64>,
    pub final_accuracy: Option<f64>,
    pub status: CellStatus,
    pub error: Option<String>,
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl ExperimentRecord {
    /// Count used in aggregates: the threshold crossing, or the cap for a
    /// censored cell (a lower bound on the true count).
    pub fn effective_samples(&self, max_samples: usize) -> Option<f64> {
        match self.status {
            CellStatus::ReachedThreshold => self.samples_to_threshold.map(|s| s as f64),
            CellStatus::Censored => Some(max_samples as f64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub value: f64,
    /// Cells entering the mean (finished or censored).
    pub n: usize,
    pub n_censored: usize,
    pub n_failed: usize,
    pub mean: f64,
    pub sd: f64,
    pub ci95: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub config_hash: String,
    pub records: Vec<ExperimentRecord>,
    pub aggregate: Vec<AggregateRow>,
    pub out_dir: Option<PathBuf>,
}

impl SweepReport {
    pub fn n_failed(&self) -> usize {
        self.records.iter().filter(|r| r.status.is_failure()).count()
    }
}

#[derive(Serialize)]
struct Hashed<'a> {
    command: &'a str,
    config: &'a SweepConfig,
}

pub fn aggregate(records: &[ExperimentRecord], values: &[f64], max_samples: usize) -> Vec<AggregateRow> {
    values
        .iter()
        .map(|&value| {
            let cells: Vec<&ExperimentRecord> = records.iter().filter(|r| r.value == value).collect();
            let counts: Vec<f64> = cells.iter().filter_map(|r| r.effective_samples(max_samples)).collect();
            let (mean, sd) = mean_sd(&counts);
            AggregateRow {
                value,
                n: counts.len(),
                n_censored: cells.iter().filter(|r| r.status == CellStatus::Censored).count(),
                n_failed: cells.iter().filter(|r| r.status.is_failure()).count(),
                mean,
                sd,
                ci95: ci95_half_width(sd, counts.len()),
            }
        })
        .collect()
}

fn run_cell(cfg: &SweepConfig, hash: &str, value_index: usize, seed: u64) -> ExperimentRecord {
    let value = cfg.values[value_index];
    let start = Instant::now();
    let mut record = ExperimentRecord {
        config_hash: hash.to_string(),
        seed,
        axis: cfg.axis,
        value,
        samples_to_threshold: None,
        censored: false,
        samples_consumed: 0,
        final_mse: None,
        final_abs_err: None,
        final_accuracy: None,
        status: CellStatus::Error,
        error: None,
        wall_time_secs: 0.0,
    };
    let (dim, flip_prob) = cfg.point(value);
    let result = cfg.model.build_with(dim, flip_prob, seed).and_then(|model| {
        let mut streams = TrainStreams::new(seed, value_index as u64);
        samples_to_threshold(&model, &cfg.trainer, cfg.threshold, &mut streams, cfg.max_samples)
    });
    match result {
        Ok(res) => {
            let last = res.trace.final_point();
            record.samples_to_threshold = res.samples;
            record.samples_consumed = res.trace.samples_consumed;
            record.final_mse = last.map(|p| p.mse);
            record.final_abs_err = last.map(|p| p.abs_err);
            record.final_accuracy = last.and_then(|p| p.accuracy);
            record.status = match (&res.trace.outcome, res.samples) {
                (_, Some(_)) => CellStatus::ReachedThreshold,
                (Outcome::Diverged { step, loss }, None) => {
                    record.error = Some(format!("diverged at step {step} with batch loss {loss}"));
                    CellStatus::Diverged
                }
                (_, None) => CellStatus::Censored,
            };
            record.censored = record.status == CellStatus::Censored;
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record.wall_time_secs = start.elapsed().as_secs_f64();
    log::info!("{}={} seed={} -> {:?} ({:.1}s)", cfg.axis, value, seed, record.status, record.wall_time_secs);
    record
}

/// Runs every `(axis value, seed)` cell on `jobs` threads. Cell failures are
/// recorded, never propagated; only invalid configurations and I/O errors
/// return `Err`. Artifacts are written under `out` when given.
pub fn run_sweep(cfg: &SweepConfig, out: Option<&Path>, jobs: usize) -> Result<SweepReport> {
    cfg.validate()?;
    let command = match cfg.axis {
        SweepAxis::Dim => "sweep-d",
        SweepAxis::FlipProb => "sweep-delta",
    };
    let hash = config_hash(&Hashed { command, config: cfg })?;
    let cells: Vec<(usize, u64)> = (0..cfg.values.len()).flat_map(|v| cfg.seeds.iter().map(move |&s| (v, s))).collect();
    let records = parallel_map(&cells, jobs, |&(v, s)| run_cell(cfg, &hash, v, s));
    let aggregate = aggregate(&records, &cfg.values, cfg.max_samples);
    let out_dir = match out {
        Some(out) => {
            let dir = prepare_output(out, &hash, &Hashed { command, config: cfg })?;
            write_records(&dir, &records, &aggregate)?;
            Some(dir)
        }
        None => None,
    };
    Ok(SweepReport { config_hash: hash, records, aggregate, out_dir })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn write_records(dir: &Path, records: &[ExperimentRecord], aggregate: &[AggregateRow]) -> Result<()> {
    write_json(&dir.join("results.json"), &records)?;
    let mut w = csv::Writer::from_writer(File::create(dir.join("results.csv"))?);
    w.write_record([
        "config_hash",
        "seed",
        "axis",
        "value",
        "samples_to_threshold",
        "censored",
        "samples_consumed",
        "final_mse",
        "final_abs_err",
        "final_accuracy",
        "status",
    ])?;
    for r in records {
        let status = serde_json::to_value(r.status)?;
        w.write_record([
            r.config_hash.clone(),
            r.seed.to_string(),
            r.axis.to_string(),
            r.value.to_string(),
            opt(r.samples_to_threshold),
            r.censored.to_string(),
            r.samples_consumed.to_string(),
            opt(r.final_mse),
            opt(r.final_abs_err),
            opt(r.final_accuracy),
            status.as_str().unwrap_or_default().to_string(),
        ])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_writer(File::create(dir.join("aggregate.csv"))?);
    w.write_record(["config_hash", "value", "n", "n_censored", "n_failed", "mean", "sd", "ci95"])?;
    let hash = records.first().map(|r| r.config_hash.clone()).unwrap_or_default();
    for a in aggregate {
        w.write_record([
            hash.clone(),
            a.value.to_string(),
            a.n.to_string(),
            a.n_censored.to_string(),
            a.n_failed.to_string(),
            a.mean.to_string(),
            a.sd.to_string(),
            a.ci95.to_string(),
        ])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_writer(File::create(dir.join("timing.csv"))?);
    w.write_record(["seed", "value", "wall_time_secs"])?;
    for r in records {
        w.write_record([r.seed.to_string(), r.value.to_string(), format!("{:.3}", r.wall_time_secs)])?;
    }
    w.flush()?;
    Ok(())
}

//! Command-line front end for the experiment runners.
//!
//! Every subcommand reads one JSON document (`--config`), writes into
//! `<out>/<config hash prefix>/`, and exits with 0 on success, 1 when any
//! cell failed, and 2 on configuration errors.

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use latent_clusters::experiments::{
    self, config_hash, generate_csv, ingest, prepare_output, read_config, run_accuracy_vs_n, run_baseline_compare, run_certify, run_selfcheck,
    run_sweep, write_json, AccuracyConfig, CertifyConfig, CompareConfig, GenerateConfig, IngestConfig, SweepAxis, SweepConfig,
};
use latent_clusters::Error;

#[derive(Parser, Debug)]
#[command(name = "latentclust", version, about = "Clustered latent-feature experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration document.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Replaces the configuration's seed (or seed list).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Root output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for independent cells.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Write a synthetic labelled CSV drawn from a model.
    Generate,
    /// Samples to threshold as a function of the input dimension.
    SweepD,
    /// Samples to threshold as a function of the flip probability.
    SweepDelta,
    /// Spectral clustering versus covariance thresholding.
    Baselines,
    /// Interpolating certificates after one gradient step.
    Certify,
    /// Load, select and split a labelled CSV.
    Ingest,
    /// Test accuracy against training-set size.
    AccuracyVsN,
    /// Quick invariant checks.
    Selfcheck,
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Dataset(_) | Error::Json(_) => Failure::Config(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

type Outcome = Result<bool, Failure>;

fn load_value(cli: &Cli) -> Result<Value, Failure> {
    let path = cli.config.as_ref().ok_or_else(|| Failure::Config("--config <path> is required for this subcommand".into()))?;
    Ok(read_config::<Value>(path)?)
}

fn parse<T: for<'de> serde::Deserialize<'de>>(value: Value) -> Result<T, Failure> {
    serde_json::from_value(value).map_err(|e| Failure::Config(format!("invalid configuration: {e}")))
}

/// Sets `key` to `seed` (or `[seed]` for list keys) when `--seed` is given.
fn override_seed(value: &mut Value, seed: Option<u64>, key: &str, list: bool) {
    if let (Some(seed), Some(obj)) = (seed, value.as_object_mut()) {
        let v = if list { Value::from(vec![seed]) } else { Value::from(seed) };
        obj.insert(key.to_string(), v);
    }
}

fn sweep(cli: &Cli, axis: SweepAxis, jobs: usize) -> Outcome {
    let mut value = load_value(cli)?;
    let expected = serde_json::to_value(axis).expect("axis serializes");
    match value.get("axis") {
        Some(found) if *found != expected => {
            return Err(Failure::Config(format!("configuration sweeps {found} but the subcommand sweeps {expected}")));
        }
        Some(_) => {}
        None => {
            if let Some(obj) = value.as_object_mut() {
                obj.insert("axis".into(), expected);
            }
        }
    }
    override_seed(&mut value, cli.seed, "seeds", true);
    let cfg: SweepConfig = parse(value)?;
    let report = run_sweep(&cfg, Some(&cli.out), jobs)?;
    for row in &report.aggregate {
        println!(
            "{}={:<8} n={} censored={} failed={} mean={:.0} ci95={:.0}",
            cfg.axis, row.value, row.n, row.n_censored, row.n_failed, row.mean, row.ci95
        );
    }
    print_dir(report.out_dir.as_deref());
    Ok(report.n_failed() == 0)
}

fn baselines(cli: &Cli, jobs: usize) -> Outcome {
    let mut value = load_value(cli)?;
    override_seed(&mut value, cli.seed, "seed", false);
    let cfg: CompareConfig = parse(value)?;
    let report = run_baseline_compare(&cfg, Some(&cli.out), jobs)?;
    for r in &report.rows {
        println!("{:<9} B={:<7} error={:.4} ± {:.4} exact={:.2}", r.method, r.budget, r.mean_error, r.ci95, r.exact_rate);
    }
    print_dir(report.out_dir.as_deref());
    Ok(report.n_failed() == 0)
}

fn certify(cli: &Cli, jobs: usize) -> Outcome {
    let mut value = load_value(cli)?;
    override_seed(&mut value, cli.seed, "seed", false);
    let cfg: CertifyConfig = parse(value)?;
    let report = run_certify(&cfg, Some(&cli.out), jobs)?;
    println!(
        "certified {}/{} (inconsistent {}, rank deficient {}); median |y - NN| = {:.4} (all trials: {:.4}); max residual {:.2e}",
        report.n_certified,
        cfg.trials,
        report.n_inconsistent,
        report.n_rank_deficient,
        report.median_abs_err,
        report.median_abs_err_all,
        report.max_residual
    );
    print_dir(report.out_dir.as_deref());
    Ok(report.n_errors() == 0)
}

#[derive(Serialize)]
struct Hashed<'a, T> {
    command: &'static str,
    config: &'a T,
}

fn generate(cli: &Cli) -> Outcome {
    let mut value = load_value(cli)?;
    override_seed(&mut value, cli.seed, "seed", false);
    let cfg: GenerateConfig = parse(value)?;
    let hashed = Hashed { command: "generate", config: &cfg };
    let hash = config_hash(&hashed)?;
    let dir = prepare_output(&cli.out, &hash, &hashed)?;
    let path = dir.join("data.csv");
    generate_csv(&cfg, File::create(&path).map_err(Error::from)?)?;
    println!("wrote {} rows to {}", cfg.rows, path.display());
    Ok(true)
}

#[derive(Serialize)]
struct IngestSummary<'a> {
    config_hash: &'a str,
    rows: usize,
    dim: usize,
    classes: &'a [String],
    feature_names: &'a [String],
    selected_columns: &'a [usize],
    train: &'a [usize],
    test: &'a [usize],
    skipped_rows: usize,
    clamped: bool,
}

fn ingest_cmd(cli: &Cli) -> Outcome {
    let mut value = load_value(cli)?;
    override_seed(&mut value, cli.seed, "seed", false);
    let mut cfg: IngestConfig = parse(value)?;
    let hashed = Hashed { command: "ingest", config: &cfg };
    let hash = config_hash(&hashed)?;
    let dir = prepare_output(&cli.out, &hash, &hashed)?;
    if cfg.correlation_out.is_none() {
        cfg.correlation_out = Some(dir.join("correlation.csv"));
    }
    let ds = ingest(&cfg)?;
    write_json(
        &dir.join("results.json"),
        &IngestSummary {
            config_hash: &hash,
            rows: ds.rows,
            dim: ds.dim,
            classes: &ds.classes,
            feature_names: &ds.feature_names,
            selected_columns: &ds.selected_columns,
            train: &ds.train,
            test: &ds.test,
            skipped_rows: ds.skipped_rows,
            clamped: ds.clamped,
        },
    )?;
    let mut w = csv::Writer::from_writer(File::create(dir.join("results.csv")).map_err(Error::from)?);
    let header: Vec<String> = ds.feature_names.iter().cloned().chain(["label".to_string(), "split".to_string()]).collect();
    w.write_record(&header).map_err(Error::from)?;
    let mut split = vec!["train"; ds.rows];
    for &r in &ds.test {
        split[r] = "test";
    }
    for r in 0..ds.rows {
        let rec: Vec<String> = ds.row(r).iter().map(|v| v.to_string()).chain([ds.classes[ds.labels[r]].clone(), split[r].to_string()]).collect();
        w.write_record(&rec).map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;
    println!(
        "{} rows ({} skipped), {} features, {} classes, train {} / test {}",
        ds.rows,
        ds.skipped_rows,
        ds.dim,
        ds.n_classes(),
        ds.train.len(),
        ds.test.len()
    );
    print_dir(Some(&dir));
    Ok(true)
}

fn accuracy(cli: &Cli, jobs: usize) -> Outcome {
    let mut value = load_value(cli)?;
    override_seed(&mut value, cli.seed, "seeds", true);
    let cfg: AccuracyConfig = parse(value)?;
    let report = run_accuracy_vs_n(&cfg, Some(&cli.out), jobs)?;
    for r in &report.rows {
        println!("d={:<6} n={:<7} accuracy={:.4} ± {:.4}", r.dim, r.size, r.mean, r.sd);
    }
    print_dir(report.out_dir.as_deref());
    Ok(true)
}

fn selfcheck(cli: &Cli) -> Outcome {
    let checks = run_selfcheck(cli.seed.unwrap_or(0));
    for c in &checks {
        println!("[{}] {} — {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let dir = cli.out.join("selfcheck");
    fs::create_dir_all(&dir).map_err(Error::from)?;
    experiments::write_json(&dir.join("results.json"), &checks)?;
    Ok(checks.iter().all(|c| c.pass))
}

fn print_dir(dir: Option<&Path>) {
    if let Some(dir) = dir {
        println!("results in {}", dir.display());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let jobs = cli.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1);
    let result = match cli.command {
        Command::Generate => generate(&cli),
        Command::SweepD => sweep(&cli, SweepAxis::Dim, jobs),
        Command::SweepDelta => sweep(&cli, SweepAxis::FlipProb, jobs),
        Command::Baselines => baselines(&cli, jobs),
        Command::Certify => certify(&cli, jobs),
        Command::Ingest => ingest_cmd(&cli),
        Command::AccuracyVsN => accuracy(&cli, jobs),
        Command::Selfcheck => selfcheck(&cli),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some cells failed; see the results files");
            ExitCode::from(1)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
    }
}

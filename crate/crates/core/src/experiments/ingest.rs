//! Tabular CSV input: a synthetic generator with known latent structure and a
//! loader that keeps the top-`d` features by dispersion and splits rows into
//! stratified train/test sets.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::ModelTemplate;
use crate::baselines::{correlation_matrix, write_matrix_csv};
use crate::error::{Error, Result};
use crate::rng::{stream, Phase};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub model: ModelTemplate,
    pub rows: usize,
    #[serde(default)]
    pub seed: u64,
}

/// Writes `rows` samples of `model` as CSV with headers `x0..x{d-1},label`.
/// The label is the sign of the target (`1`, `-1`, or `0`).
pub fn generate_csv<W: std::io::Write>(cfg: &GenerateConfig, out: W) -> Result<()> {
    if cfg.rows == 0 {
        return Err(Error::Config("generate: rows must be positive".into()));
    }
    let model = cfg.model.build(cfg.seed)?;
    let batch = model.sample(cfg.rows, &mut stream(cfg.seed, 0, Phase::Other));
    let mut w = csv::Writer::from_writer(out);
    w.write_record((0..model.dim()).map(|j| format!("x{j}")).chain(std::iter::once("label".to_string())))?;
    for b in 0..batch.len() {
        let y = batch.y[b];
        let label = if y > 0.0 {
            "1"
        } else if y < 0.0 {
            "-1"
        } else {
            "0"
        };
        w.write_record(batch.row(b).iter().map(|v| v.to_string()).chain(std::iter::once(label.to_string())))?;
    }
    w.flush()?;
    Ok(())
}

fn default_test_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    pub path: PathBuf,
    /// Number of features to keep.
    pub dim: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    /// When set, the Pearson correlation of the selected features is written
    /// here as CSV.
    #[serde(default)]
    pub correlation_out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularDataset {
    /// Row-major `rows x dim` selected features.
    pub features: Vec<f64>,
    pub rows: usize,
    pub dim: usize,
    /// Class index per row, contiguous from 0.
    pub labels: Vec<usize>,
    /// Original label string of each class index.
    pub classes: Vec<String>,
    pub feature_names: Vec<String>,
    /// Column index in the source file of each selected feature.
    pub selected_columns: Vec<usize>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub skipped_rows: usize,
    pub clamped: bool,
}

impl TabularDataset {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.features[r * self.dim..(r + 1) * self.dim]
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }
}

/// Per-feature `variance / mean` when every value is nonnegative, plain
/// variance otherwise. Zero-mean nonnegative columns score 0.
pub fn dispersion_scores(x: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let nonneg = x.iter().all(|&v| v >= 0.0);
    (0..cols)
        .map(|c| {
            let mean = (0..rows).map(|r| x[r * cols + c]).sum::<f64>() / rows as f64;
            let var = (0..rows).map(|r| (x[r * cols + c] - mean).powi(2)).sum::<f64>() / rows as f64;
            if !nonneg {
                var
            } else if mean > 0.0 {
                var / mean
            } else {
                0.0
            }
        })
        .collect()
}

/// Indices of the `k` highest scores, ties broken by lower index, returned in
/// column order.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut chosen: Vec<usize> = order.into_iter().take(k).collect();
    chosen.sort_unstable();
    chosen
}

/// Per-class shuffled split; each class contributes `round(fraction · count)`
/// rows to the test set.
pub fn stratified_split(labels: &[usize], n_classes: usize, test_fraction: f64, rng: &mut crate::rng::Rng) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 0..n_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&r| labels[r] == c).collect();
        idx.shuffle(rng);
        let k = (test_fraction * idx.len() as f64).round() as usize;
        test.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Parses a CSV whose last column is the class label and whose other
/// columns are numeric. Rows with the wrong width, unparsable or non-finite
/// values are skipped and counted.
pub fn read_table<R: Read>(input: R) -> Result<(Vec<String>, Vec<f64>, Vec<String>, usize)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if header.len() < 2 {
        return Err(Error::Dataset("need at least one feature column and a label column".into()));
    }
    let cols = header.len() - 1;
    let mut x = Vec::new();
    let mut labels = Vec::new();
    let mut skipped = 0;
    let mut row = Vec::with_capacity(cols);
    for rec in reader.records() {
        let Ok(rec) = rec else {
            skipped += 1;
            continue;
        };
        if rec.len() != cols + 1 {
            skipped += 1;
            continue;
        }
        row.clear();
        let ok = rec.iter().take(cols).all(|f| match f.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => {
                row.push(v);
                true
            }
            _ => false,
        });
        let label = rec[cols].trim();
        if !ok || label.is_empty() {
            skipped += 1;
            continue;
        }
        x.extend_from_slice(&row);
        labels.push(label.to_string());
    }
    Ok((header, x, labels, skipped))
}

/// Loads and preprocesses a labelled CSV. Feature selection never looks at
/// the labels.
pub fn ingest(cfg: &IngestConfig) -> Result<TabularDataset> {
    if !(0.0..1.0).contains(&cfg.test_fraction) {
        return Err(Error::Config(format!("ingest: test_fraction {} outside [0,1)", cfg.test_fraction)));
    }
    if cfg.dim == 0 {
        return Err(Error::Config("ingest: dim must be positive".into()));
    }
    let file = File::open(&cfg.path).map_err(|e| Error::Dataset(format!("{}: {e}", cfg.path.display())))?;
    let (header, x, raw_labels, skipped) = read_table(file)?;
    let rows = raw_labels.len();
    if rows == 0 {
        return Err(Error::Dataset(format!("{}: no readable rows", cfg.path.display())));
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} unreadable rows in {}", cfg.path.display());
    }
    let cols = header.len() - 1;
    let clamped = cfg.dim > cols;
    if clamped {
        log::warn!("requested {} features but the file has {cols}; using all", cfg.dim);
    }
    let dim = cfg.dim.min(cols);
    let selected = top_k(&dispersion_scores(&x, rows, cols), dim);
    let features: Vec<f64> = (0..rows).flat_map(|r| selected.iter().map(move |&c| (r, c))).map(|(r, c)| x[r * cols + c]).collect();
    let mut class_index = BTreeMap::new();
    for l in &raw_labels {
        class_index.entry(l.clone()).or_insert(0usize);
    }
    let mut classes = Vec::with_capacity(class_index.len());
    for (k, (name, idx)) in class_index.iter_mut().enumerate() {
        *idx = k;
        classes.push(name.clone());
    }
    let labels: Vec<usize> = raw_labels.iter().map(|l| class_index[l]).collect();
    let (train, test) = stratified_split(&labels, classes.len(), cfg.test_fraction, &mut stream(cfg.seed, 0, Phase::Split));
    let dataset = TabularDataset {
        features,
        rows,
        dim,
        labels,
        classes,
        feature_names: selected.iter().map(|&c| header[c].clone()).collect(),
        selected_columns: selected,
        train,
        test,
        skipped_rows: skipped,
        clamped,
    };
    if let Some(path) = &cfg.correlation_out {
        export_correlation(&dataset, path)?;
    }
    Ok(dataset)
}

pub fn export_correlation(dataset: &TabularDataset, path: &Path) -> Result<()> {
    let c = correlation_matrix(&dataset.features, dataset.rows, dataset.dim);
    write_matrix_csv(&c, dataset.dim, File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolean::{named_target, NamedTarget};
    use crate::experiments::{Layout, NoiseFamily};
    use std::io::Write;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        File::create(&p).unwrap().write_all(text.as_bytes()).unwrap();
        p
    }

    fn cfg(path: PathBuf, dim: usize) -> IngestConfig {
        IngestConfig { path, dim, test_fraction: 0.2, seed: 1, correlation_out: None }
    }

    #[test]
    fn skips_bad_rows_and_ranks_by_dispersion() {
        let dir = tempfile::tempdir().unwrap();
        // Column a: mean 2, var 0 ; b: mean 1, var 1 ; c: mean 10, var 4.
        let text = "a,b,c,label\n2,0,8,x\n2,2,12,y\n2,oops,1,x\n2,0,12,y\n2,2,8,x\n1,2\n";
        let p = write(dir.path(), "t.csv", text);
        let ds = ingest(&cfg(p, 2)).unwrap();
        assert_eq!(ds.skipped_rows, 2);
        assert_eq!(ds.rows, 4);
        // Dispersions: a 0, b 1, c 0.4.
        assert_eq!(ds.feature_names, vec!["b", "c"]);
        assert_eq!(ds.classes, vec!["x", "y"]);
        assert_eq!(ds.labels, vec![0, 1, 1, 0]);
        assert_eq!(ds.row(1), &[2.0, 12.0]);
    }

    #[test]
    fn negative_values_switch_to_variance_and_dim_is_clamped() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "t.csv", "a,b,label\n-1,10,0\n1,30,1\n-1,10,0\n1,30,1\n");
        let ds = ingest(&cfg(p.clone(), 1)).unwrap();
        assert_eq!(ds.feature_names, vec!["b"]);
        let ds = ingest(&cfg(p, 5)).unwrap();
        assert!(ds.clamped);
        assert_eq!(ds.dim, 2);
    }

    #[test]
    fn stratified_split_balances_classes() {
        let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let (train, test) = stratified_split(&labels, 2, 0.2, &mut stream(0, 0, Phase::Split));
        assert_eq!(test.len(), 20);
        assert_eq!(train.len(), 80);
        let ones = test.iter().filter(|&&r| labels[r] == 1).count();
        assert_eq!(ones, 10);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn generated_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let g = GenerateConfig {
            model: ModelTemplate { family: NoiseFamily::Bsc, dim: 9, flip_prob: 0.1, target: named_target(NamedTarget::Parity, 3).unwrap(), layout: Layout::Contiguous },
            rows: 50,
            seed: 4,
        };
        let p = dir.path().join("g.csv");
        generate_csv(&g, File::create(&p).unwrap()).unwrap();
        let corr = dir.path().join("corr.csv");
        let ds = ingest(&IngestConfig { correlation_out: Some(corr.clone()), ..cfg(p, 9) }).unwrap();
        assert_eq!(ds.rows, 50);
        assert_eq!(ds.classes, vec!["-1", "1"]);
        assert!(ds.features.iter().all(|v| v.abs() == 1.0));
        let text = std::fs::read_to_string(corr).unwrap();
        assert_eq!(text.lines().count(), 10);
    }

    #[test]
    fn bad_inputs_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "t.csv", "a,label\nfoo,1\n");
        assert!(matches!(ingest(&cfg(p.clone(), 1)), Err(Error::Dataset(_))));
        assert!(matches!(ingest(&cfg(dir.path().join("missing.csv"), 1)), Err(Error::Dataset(_))));
        assert!(matches!(ingest(&IngestConfig { test_fraction: 1.5, ..cfg(p, 1) }), Err(Error::Config(_))));
    }
}

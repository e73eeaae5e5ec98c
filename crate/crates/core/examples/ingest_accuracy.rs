//! Writes a synthetic labelled CSV, ingests it (dispersion-based feature
//! selection and a stratified split), and reports test accuracy against the
//! number of training rows.
//!
//! Usage: `cargo run --release --example ingest_accuracy -- [rows] [dim]`

use serde_json::json;

use latent_clusters::experiments::{generate_csv, ingest, run_accuracy_vs_n, AccuracyConfig, GenerateConfig, IngestConfig};

fn main() -> latent_clusters::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let rows: usize = args.first().map_or(1000, |s| s.parse().expect("rows"));
    let dim: usize = args.get(1).map_or(30, |s| s.parse().expect("dim"));

    let dir = std::env::temp_dir().join("latentclust-ingest-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("data.csv");
    let gen: GenerateConfig = serde_json::from_value(json!({
        "model": {"dim": 60, "flip_prob": 0.1, "target": {"kind": "named", "name": "majority", "n": 3}},
        "rows": rows, "seed": 5
    }))?;
    generate_csv(&gen, std::fs::File::create(&path)?)?;

    let ing: IngestConfig = serde_json::from_value(json!({"path": path, "dim": dim, "seed": 1}))?;
    let ds = ingest(&ing)?;
    println!("{} rows, {} selected features, classes {:?}, train {} / test {}", ds.rows, ds.dim, ds.classes, ds.train.len(), ds.test.len());

    let acc: AccuracyConfig = serde_json::from_value(json!({
        "path": path, "dims": [dim], "sizes": [25, 100, 400], "seeds": [0, 1, 2], "split_seed": 1
    }))?;
    for r in run_accuracy_vs_n(&acc, None, 1)?.rows {
        println!("n={:>4}  accuracy {:.3} ± {:.3}", r.size, r.mean, r.sd);
    }
    Ok(())
}

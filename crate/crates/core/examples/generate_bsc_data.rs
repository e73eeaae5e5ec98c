//! Builds a BSC model with uneven clusters, prints its signal statistics and
//! JSON description, and draws a small labelled batch.
//!
//! Usage: `cargo run --release --example generate_bsc_data -- [d] [delta] [rows] [seed]`

use latent_clusters::boolean::{named_target, NamedTarget};
use latent_clusters::latent_data::{make_bsc_model_with_partition, signal_stats, ClusterPartition};
use latent_clusters::rng::seeded;

fn main() -> latent_clusters::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let d: usize = args.first().map_or(10, |s| s.parse().expect("d"));
    let delta: f64 = args.get(1).map_or(0.1, |s| s.parse().expect("delta"));
    let rows: usize = args.get(2).map_or(5, |s| s.parse().expect("rows"));
    let seed: u64 = args.get(3).map_or(0, |s| s.parse().expect("seed"));

    let partition = ClusterPartition::contiguous_balanced(3, d)?;
    let model = make_bsc_model_with_partition(partition, delta, named_target(NamedTarget::Majority, 3)?)?;
    let stats = signal_stats(&model);
    println!("cluster sizes {:?}", model.partition().sizes());
    println!("v = {:?}, v_sum = {:.3}, mu = {:.3}", stats.v, stats.v_sum, stats.mu);
    println!("{}", serde_json::to_string(&model)?);

    let batch = model.sample(rows, &mut seeded(seed));
    for r in 0..batch.len() {
        let x: String = batch.row(r).iter().map(|&v| if v > 0.0 { '+' } else { '-' }).collect();
        println!("s={:03b} x={x} y={:+}", batch.s[r], batch.y[r]);
    }
    Ok(())
}

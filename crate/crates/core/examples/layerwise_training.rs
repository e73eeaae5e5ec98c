//! Two-phase layerwise SGD (one population-style first-layer step, then
//! output-layer SGD on random biases) with the default scalings.
//!
//! Usage: `cargo run --release --example layerwise_training -- [d] [delta] [seed]`

use latent_clusters::boolean::{named_target, NamedTarget};
use latent_clusters::latent_data::{make_bsc_model_with_partition, ClusterPartition};
use latent_clusters::network::Activation;
use latent_clusters::training::{layerwise_train, theory_scalings, LayerwiseConfig, TrainStreams};

fn main() -> latent_clusters::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let d: usize = args.first().map_or(120, |s| s.parse().expect("d"));
    let delta: f64 = args.get(1).map_or(0.1, |s| s.parse().expect("delta"));
    let seed: u64 = args.get(2).map_or(0, |s| s.parse().expect("seed"));

    let model = make_bsc_model_with_partition(ClusterPartition::contiguous_balanced(2, d)?, delta, named_target(NamedTarget::Parity, 2)?)?;
    let s = theory_scalings(&model)?;
    println!("default scalings: tau {:.4}, gamma1 {:.4}, batch {}", s.tau, s.gamma1, s.batch_size);
    let cfg = LayerwiseConfig { n: 64, t2: 3000, eval_every: 500, test_size: 4000, activation: Activation::Relu, ..Default::default() };
    let trace = layerwise_train(&model, &cfg, &mut TrainStreams::new(seed, 0))?;
    for p in &trace.records {
        println!("samples {:>8}  mse {:.4}  |err| {:.4}  acc {:?}", p.samples, p.mse, p.abs_err, p.accuracy);
    }
    println!("outcome {:?}", trace.outcome);
    Ok(())
}

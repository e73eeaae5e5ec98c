//! Joint SGD on a 3-bit parity over a homogeneous BSC model: counts the fresh
//! samples needed to push the test MSE below 0.05.
//!
//! Usage: `cargo run --release --example joint_sgd_parity -- [d] [delta] [seed]`

use std::time::Instant;

use latent_clusters::boolean::{named_target, NamedTarget};
use latent_clusters::latent_data::make_bsc_model;
use latent_clusters::training::{samples_to_threshold, JointConfig, TrainStreams, TrainerConfig};

fn main() -> latent_clusters::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let d: usize = args.first().map_or(300, |s| s.parse().expect("d"));
    let delta: f64 = args.get(1).map_or(0.2, |s| s.parse().expect("delta"));
    let seed: u64 = args.get(2).map_or(0, |s| s.parse().expect("seed"));

    let model = make_bsc_model(3, d, delta, named_target(NamedTarget::Parity, 3)?)?;
    let cfg = TrainerConfig::Joint(JointConfig { n: 256, test_size: 2000, eval_every: 50, ..Default::default() });
    let start = Instant::now();
    let result = samples_to_threshold(&model, &cfg, 0.05, &mut TrainStreams::new(seed, 0), 10_000_000)?;
    let last = result.trace.final_point().expect("at least one evaluation");
    println!(
        "d={d} delta={delta} seed={seed} samples={:?} final_mse={:.4} elapsed={:.1}s",
        result.samples,
        last.mse,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

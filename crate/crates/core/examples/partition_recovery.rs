//! Cluster recovery from an empirical covariance: spectral clustering versus
//! covariance thresholding at increasing batch sizes.
//!
//! Usage: `cargo run --release --example partition_recovery -- [d] [delta] [seed]`

use latent_clusters::baselines::{covariance_threshold_cluster, empirical_covariance, partition_error, spectral_cluster};
use latent_clusters::boolean::{named_target, NamedTarget};
use latent_clusters::experiments::compare::threshold_budget;
use latent_clusters::latent_data::{make_bsc_model_with_partition, ClusterPartition};
use latent_clusters::rng::{stream, Phase};

fn main() -> latent_clusters::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let d: usize = args.first().map_or(120, |s| s.parse().expect("d"));
    let delta: f64 = args.get(1).map_or(0.2, |s| s.parse().expect("delta"));
    let seed: u64 = args.get(2).map_or(0, |s| s.parse().expect("seed"));

    let model = make_bsc_model_with_partition(ClusterPartition::contiguous_balanced(3, d)?, delta, named_target(NamedTarget::Parity, 3)?)?;
    let m = 1.0 - 2.0 * delta;
    let threshold = 0.5 * m * m;
    let bound = threshold_budget(d, delta);
    println!("sample bound B = {bound}, threshold {threshold:.3}");
    for budget in [bound / 8, bound / 2, bound, 2 * bound] {
        let batch = model.sample(budget, &mut stream(seed, budget as u64, Phase::FirstLayer));
        let c = empirical_covariance(&batch);
        let truth = model.partition().assignment();
        let spectral = spectral_cluster(&c, d, 3, &mut stream(seed, budget as u64, Phase::Other))?;
        let thresh = covariance_threshold_cluster(&c, d, threshold)?;
        println!(
            "B={budget:>6}  spectral error {:.3}  threshold error {:.3} ({} clusters found)",
            partition_error(&spectral.assignment, truth)?,
            partition_error(&thresh.assignment, truth)?,
            thresh.n_found
        );
    }
    Ok(())
}

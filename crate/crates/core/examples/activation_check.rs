//! Gaussian-smoothed derivatives of a truncated-exponential activation and the
//! nondegeneracy check on a BSC model.
//!
//! Usage: `cargo run --release --example activation_check -- [degree] [d] [delta]`

use latent_clusters::boolean::{named_target, NamedTarget};
use latent_clusters::latent_data::{make_bsc_model_with_partition, signal_stats, ClusterPartition};
use latent_clusters::network::{check_activation_assumption, smoothed_derivative, Activation};

fn main() -> latent_clusters::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let degree: usize = args.first().map_or(8, |s| s.parse().expect("degree"));
    let d: usize = args.get(1).map_or(600, |s| s.parse().expect("d"));
    let delta: f64 = args.get(2).map_or(0.1, |s| s.parse().expect("delta"));

    let act = Activation::truncated_exp(degree);
    let model = make_bsc_model_with_partition(ClusterPartition::contiguous_balanced(3, d)?, delta, named_target(NamedTarget::Parity, 3)?)?;
    let stats = signal_stats(&model);
    let report = check_activation_assumption(&act, stats.mu, stats.v_sum, d, 3, 0.1)?;
    println!("smoothing variance {:.4}", report.smoothing_variance);
    for (k, v) in report.values.iter().enumerate() {
        println!("  S^({k})(0) = {v:+.5}");
    }
    println!("min |S^(k)(0)| = {:.4} -> {}", report.min_abs, if report.pass { "pass" } else { "fail" });
    for t in [-1.0, 0.0, 1.0] {
        println!("  relu S_v({t:+}) = {:.4}", smoothed_derivative(&Activation::Relu, report.smoothing_variance, t)?);
    }
    Ok(())
}

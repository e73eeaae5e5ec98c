//! Builds interpolating output layers on top of one population-gradient step
//! and reports their population error on a high-SNR BSC parity model.
//!
//! Usage: `cargo run --release --example certify_warm_start -- [d] [delta] [signal_scale] [trials] [bias_range]`

use latent_clusters::boolean::{named_target, NamedTarget};
use latent_clusters::experiments::{run_certify, CertifyConfig, Layout, ModelTemplate, NoiseFamily};
use latent_clusters::network::Activation;

fn main() -> latent_clusters::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dim: usize = args.first().map_or(600, |s| s.parse().expect("d"));
    let flip_prob: f64 = args.get(1).map_or(0.05, |s| s.parse().expect("delta"));
    let signal_scale: f64 = args.get(2).map_or(100.0, |s| s.parse().expect("signal_scale"));
    let trials: usize = args.get(3).map_or(50, |s| s.parse().expect("trials"));
    let bias_range: Option<f64> = args.get(4).map(|s| s.parse().expect("bias_range"));

    let cfg = CertifyConfig {
        model: ModelTemplate { family: NoiseFamily::Bsc, dim, flip_prob, target: named_target(NamedTarget::Parity, 3)?, layout: Layout::Contiguous },
        activation: Activation::truncated_exp(8),
        n: 64,
        trials,
        mc_samples: 100_000,
        signal_scale,
        bias_range,
        c0: 0.1,
        seed: 0,
    };
    let report = run_certify(&cfg, None, 4)?;
    for t in &report.trials {
        println!(
            "trial {:>2} {:?} M={} gap={:.4} noise_sd={:.4} cond={:.1e} residual={:.1e} |a*|={:.3e} err={:.4}",
            t.trial,
            t.status,
            t.grid_size,
            t.gap,
            t.noise_sd,
            t.condition.unwrap_or(f64::NAN),
            t.residual.unwrap_or(f64::NAN),
            t.norm2.unwrap_or(f64::NAN),
            t.population_abs_err.unwrap_or(f64::NAN)
        );
    }
    println!(
        "certified={} inconsistent={} rank_deficient={} median |y-NN| certified={:.4} all={:.4} max residual={:.1e}",
        report.n_certified, report.n_inconsistent, report.n_rank_deficient, report.median_abs_err, report.median_abs_err_all, report.max_residual
    );
    Ok(())
}

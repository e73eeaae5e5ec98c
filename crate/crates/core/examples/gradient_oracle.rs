//! Population gradient of the first layer: the exact cube-sum oracle
//! `m_j α_i` against a Monte Carlo estimate at a few coordinates.
//!
//! Usage: `cargo run --release --example gradient_oracle -- [d] [delta] [samples]`

use rand_distr::{Distribution, StandardNormal};

use latent_clusters::boolean::{named_target, NamedTarget};
use latent_clusters::latent_data::{make_bsc_model_with_partition, ClusterPartition};
use latent_clusters::network::Activation;
use latent_clusters::rng::seeded;
use latent_clusters::theory::{alpha_population, population_gradient_mc};

fn main() -> latent_clusters::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let d: usize = args.first().map_or(300, |s| s.parse().expect("d"));
    let delta: f64 = args.get(1).map_or(0.1, |s| s.parse().expect("delta"));
    let samples: usize = args.get(2).map_or(200_000, |s| s.parse().expect("samples"));

    let model = make_bsc_model_with_partition(ClusterPartition::contiguous_balanced(3, d)?, delta, named_target(NamedTarget::Parity, 3)?)?;
    let act = Activation::truncated_exp(8);
    let mut rng = seeded(3);
    let sd = 1.0 / (d as f64).sqrt();
    let w: Vec<f64> = (0..d).map(|_| sd * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
    let alpha = alpha_population(&w, &model, &act)?;
    println!("alpha = {:?}, smoothing variance {:.4}", alpha.alpha, alpha.variance);
    for j in [0, d / 3, d - 1] {
        let est = population_gradient_mc(&w, &model, &act, j, samples, &mut rng)?;
        let oracle = model.noise()[j].mean() * alpha.alpha[model.partition().cluster_of(j)];
        println!("j={j:>4} w_j={:+.4}  MC {:+.5} ± {:.5}  oracle {oracle:+.5}", w[j], est.mean, est.std_err);
    }
    Ok(())
}

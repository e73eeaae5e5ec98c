//! ReLU certificates on a random projection grid: the lower-triangular
//! construction against the minimum-norm interpolant, with the size of the
//! triangular coefficients relative to `2 max|f| / Δ`.
//!
//! Usage: `cargo run --release --example triangular_certificate -- [N] [seed]`

use rand::Rng as _;

use latent_clusters::boolean::BooleanFunction;
use latent_clusters::network::Activation;
use latent_clusters::rng::seeded;
use latent_clusters::theory::{build_certificate, build_certificate_triangular, ProjectionGrid, DEFAULT_DEDUP_TOL};
use latent_clusters::training::draw_biases;

fn main() -> latent_clusters::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().map_or(3, |s| s.parse().expect("N"));
    let seed: u64 = args.get(1).map_or(0, |s| s.parse().expect("seed"));

    let mut rng = seeded(seed);
    let alpha: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let grid = ProjectionGrid::from_scaled(alpha, DEFAULT_DEDUP_TOL);
    let f = BooleanFunction::from_table(n, (0..1usize << n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect())?;
    let range = grid.values.iter().fold(0.0f64, |m, u| m.max(u.abs())) + 1.0;
    let biases = draw_biases(4096, range, &mut rng);
    println!("grid M={} gap {:.4}", grid.len(), grid.gap);

    let tri = build_certificate_triangular(&grid, &f, &biases, 0.45)?;
    println!(
        "triangular: residual {:.2e}, |a|_inf {:.3e}, bound {:.3}, within bound: {}",
        tri.certificate.residual,
        tri.certificate.norm_inf,
        tri.bound,
        tri.within_bound()
    );
    let dense = build_certificate(&grid, &f, &biases, &Activation::Relu)?;
    println!("minimum norm: residual {:.2e}, |a|_inf {:.3e}, |a|_2 {:.3e}", dense.residual, dense.norm_inf, dense.norm2);
    Ok(())
}

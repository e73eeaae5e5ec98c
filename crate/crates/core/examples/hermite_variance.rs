//! Closed-form variance of the smoothed Hermite coefficients against a Monte
//! Carlo draw of random activation coefficients.
//!
//! Usage: `cargo run --release --example hermite_variance -- [a] [mu] [M] [draws]`

use rand_distr::{Distribution, StandardNormal};

use latent_clusters::quadrature::GaussHermite;
use latent_clusters::rng::seeded;
use latent_clusters::theory::{hermite_coeff_variance, smoothed_hermite_projections};

fn main() -> latent_clusters::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let a: f64 = args.first().map_or(1.0, |s| s.parse().expect("a"));
    let mu: f64 = args.get(1).map_or(1.0, |s| s.parse().expect("mu"));
    let m: usize = args.get(2).map_or(8, |s| s.parse().expect("M"));
    let draws: usize = args.get(3).map_or(20_000, |s| s.parse().expect("draws"));

    let rule = GaussHermite::new(24);
    let mut rng = seeded(1);
    let max_k = m.min(4);
    let mut sum_sq = vec![0.0; max_k + 1];
    for _ in 0..draws {
        let coeffs: Vec<f64> = (0..=m).map(|_| Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        for (s, b) in sum_sq.iter_mut().zip(smoothed_hermite_projections(&coeffs, a, mu, max_k, &rule)) {
            *s += b * b;
        }
    }
    for (k, s) in sum_sq.iter().enumerate() {
        let closed = hermite_coeff_variance(k, a, mu, m)?;
        println!("k={k}: closed form {closed:>12.4}  Monte Carlo {:>12.4}", s / draws as f64);
    }
    Ok(())
}

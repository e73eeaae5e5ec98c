//! Statistical sanity checks on sampling, initialization and Monte Carlo
//! estimators, each against an independently computed expectation.

use latent_clusters::boolean::{named_target, NamedTarget};
use latent_clusters::latent_data::{make_bsc_model, make_gaussian_mixture_model, ClusterPartition};
use latent_clusters::network::{init_layerwise, Activation};
use latent_clusters::rng::{seeded, stream, Phase};
use latent_clusters::theory::{alpha_homogeneous, population_gradient_mc};

/// Standard errors allowed for moment checks.
const Z: f64 = 5.0;

#[test]
fn coordinates_are_centred_and_blocks_uncorrelated() {
    let model = make_bsc_model(3, 12, 0.2, named_target(NamedTarget::Majority, 3).unwrap()).unwrap();
    let rows = 100_000;
    let batch = model.sample(rows, &mut seeded(11));
    let d = model.dim();
    let n = rows as f64;
    for j in 0..d {
        let (mut s, mut q) = (0.0, 0.0);
        for r in 0..rows {
            let x = batch.x[r * d + j];
            s += x;
            q += x * x;
        }
        let mean = s / n;
        let se = ((q / n - mean * mean) / n).sqrt();
        assert!(mean.abs() <= Z * se, "coordinate {j}: mean {mean} (se {se})");
    }
    let part = model.partition();
    for i in 0..d {
        for j in (i + 1)..d {
            if part.cluster_of(i) == part.cluster_of(j) {
                continue;
            }
            let (mut s, mut q) = (0.0, 0.0);
            for r in 0..rows {
                let v = batch.x[r * d + i] * batch.x[r * d + j];
                s += v;
                q += v * v;
            }
            let mean = s / n;
            let se = ((q / n - mean * mean) / n).sqrt();
            assert!(mean.abs() <= Z * se, "pair ({i}, {j}): covariance {mean} (se {se})");
        }
    }
}

#[test]
fn gaussian_mixture_within_cluster_covariance_matches_means() {
    let partition = ClusterPartition::contiguous_equal(2, 6).unwrap();
    let means = vec![0.9, 0.5, 0.7, 1.0, 0.3, 0.6];
    let model = make_gaussian_mixture_model(&means, 0.4, partition, named_target(NamedTarget::Parity, 2).unwrap()).unwrap();
    let rows = 100_000;
    let batch = model.sample(rows, &mut seeded(12));
    let n = rows as f64;
    // E[x_0 x_1] = m_0 m_1 inside a cluster.
    let (mut s, mut q) = (0.0, 0.0);
    for r in 0..rows {
        let v = batch.x[r * 6] * batch.x[r * 6 + 1];
        s += v;
        q += v * v;
    }
    let mean = s / n;
    let se = ((q / n - mean * mean) / n).sqrt();
    assert!((mean - means[0] * means[1]).abs() <= Z * se, "{mean} vs {}", means[0] * means[1]);
}

#[test]
fn gaussian_init_max_coordinate_bound() {
    let (n, d) = (64, 400);
    let bound = (2.0 * ((2 * d * n) as f64 / 0.01).ln() / d as f64).sqrt();
    let within = (0..100u64)
        .filter(|&seed| {
            let net = init_layerwise(n, d, 0.0, Activation::Relu, &mut stream(seed, 0, Phase::Init)).unwrap();
            net.w.iter().fold(0.0f64, |m, w| m.max(w.abs())) <= bound
        })
        .count();
    assert!(within >= 99, "{within}/100 seeds within {bound}");
}

#[test]
fn relu_gradient_matches_homogeneous_oracle() {
    // Deterministic init w = 1/√d; the population gradient at coordinate j is
    // (1-2δ) α_i up to an exponentially small cluster-size correction.
    let (n, d, delta) = (3, 60, 0.1);
    let f = named_target(NamedTarget::Majority, n).unwrap();
    let model = make_bsc_model(n, d, delta, f.clone()).unwrap();
    let alpha = alpha_homogeneous(&f, delta).unwrap().alpha;
    let w = vec![1.0 / (d as f64).sqrt(); d];
    let k = (d / n) as f64;
    let slack = (-k * (1.0 - 2.0 * delta).powi(2) / n as f64).exp();
    let mut rng = seeded(13);
    for j in [0, 25, 59] {
        let est = population_gradient_mc(&w, &model, &Activation::Relu, j, 200_000, &mut rng).unwrap();
        let want = (1.0 - 2.0 * delta) * alpha[model.partition().cluster_of(j)];
        assert!((est.mean - want).abs() <= 3.0 * est.std_err + slack, "j={j}: {} vs {want} (se {}, slack {slack})", est.mean, est.std_err);
    }
}

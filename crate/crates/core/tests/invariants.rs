//! Property tests for the structural invariants of every module.

use proptest::prelude::*;
use rand::Rng as _;

use latent_clusters::baselines::{covariance_threshold_cluster, partition_error};
use latent_clusters::boolean::{c_table, inverse_walsh_hadamard, majority_margin, min_label_separation, named_target, sign_at, walsh_hadamard, BooleanFunction, NamedTarget};
use latent_clusters::latent_data::{make_bsc_model_with_partition, signal_stats, ClusterPartition, DataModel, NoiseLaw};
use latent_clusters::linalg::{jacobi_eigen, JACOBI_MAX_SWEEPS, JACOBI_TOL};
use latent_clusters::network::{smoothed_derivative, smoothed_derivative_order, Activation};
use latent_clusters::quadrature::GaussHermite;
use latent_clusters::rng::{seeded, stream, Phase};
use latent_clusters::theory::{
    alpha_population, build_certificate, build_certificate_triangular, grid_labels, hermite_coeff_variance, ProjectionGrid, DEFAULT_DEDUP_TOL,
};
use latent_clusters::training::{draw_biases, output_layer_loss};

fn table(n: usize) -> impl Strategy<Value = BooleanFunction> {
    prop::collection::vec(-2.0f64..2.0, 1usize << n).prop_map(move |v| BooleanFunction::from_table(n, v).unwrap())
}

fn labels(len: usize, k: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..k, len)
}

/// Model with a random assignment in which every cluster appears.
fn random_model(n: usize, dim: usize, flip_prob: f64, seed: u64) -> DataModel {
    let mut rng = seeded(seed);
    let mut assignment: Vec<usize> = (0..dim).map(|j| if j < n { j } else { rng.random_range(0..n) }).collect();
    rand::seq::SliceRandom::shuffle(assignment.as_mut_slice(), &mut rng);
    let partition = ClusterPartition::new(n, assignment).unwrap();
    make_bsc_model_with_partition(partition, flip_prob, named_target(NamedTarget::Parity, n).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // ── latent data ──────────────────────────────────────────────────────

    #[test]
    fn balanced_partitions_cover_every_cluster(n in 1usize..6, extra in 0usize..50) {
        let dim = n + extra;
        let p = ClusterPartition::contiguous_balanced(n, dim).unwrap();
        prop_assert_eq!(p.dim(), dim);
        let sizes = p.sizes();
        prop_assert!(sizes.iter().all(|&s| s >= 1));
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for c in 0..n {
            prop_assert!(p.members(c).iter().all(|&j| p.cluster_of(j) == c));
        }
    }

    #[test]
    fn partition_rejects_empty_clusters(n in 2usize..5, dim in 2usize..20) {
        let assignment = vec![0; dim];
        prop_assert!(ClusterPartition::new(n, assignment).is_err());
    }

    #[test]
    fn signal_stats_sum_and_min(seed in any::<u64>(), n in 1usize..5, dim in 5usize..40, delta in 0.0f64..0.5) {
        let model = random_model(n, dim, delta, seed);
        let stats = signal_stats(&model);
        let direct: f64 = model.noise().iter().map(|l| l.mean() * l.mean()).sum();
        prop_assert!((stats.v_sum - stats.v.iter().sum::<f64>()).abs() <= 1e-10);
        prop_assert!((stats.v_sum - direct).abs() <= 1e-10);
        prop_assert_eq!(stats.v_min, stats.v.iter().copied().fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn bsc_samples_respect_sign_structure(seed in any::<u64>(), n in 1usize..5, dim in 5usize..30, delta in 0.0f64..0.5) {
        let model = random_model(n, dim, delta, seed);
        let batch = model.sample(64, &mut seeded(seed));
        for r in 0..batch.len() {
            let s = batch.s[r];
            prop_assert_eq!(batch.y[r].to_bits(), model.target().eval(s).to_bits());
            for (j, &x) in batch.row(r).iter().enumerate() {
                let prod = x * sign_at(s, model.partition().cluster_of(j));
                prop_assert!(prod == 1.0 || prod == -1.0);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic(seed in any::<u64>(), trial in 0u64..100) {
        let model = random_model(3, 12, 0.2, 1);
        let a = model.sample(32, &mut stream(seed, trial, Phase::FirstLayer));
        let b = model.sample(32, &mut stream(seed, trial, Phase::FirstLayer));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn model_json_round_trip(seed in any::<u64>(), n in 1usize..4, dim in 4usize..20, delta in 0.0f64..1.0) {
        let model = random_model(n, dim, delta, seed);
        let js = serde_json::to_string(&model).unwrap();
        let back: DataModel = serde_json::from_str(&js).unwrap();
        prop_assert_eq!(back, model);
    }

    // ── boolean analysis ─────────────────────────────────────────────────

    #[test]
    fn walsh_hadamard_round_trip_and_parseval(f in (1usize..=10).prop_flat_map(table)) {
        let coeffs = walsh_hadamard(f.values()).unwrap();
        let back = inverse_walsh_hadamard(&coeffs).unwrap();
        for (a, b) in f.values().iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        let energy: f64 = coeffs.iter().map(|c| c * c).sum();
        let mean_sq = f.values().iter().map(|v| v * v).sum::<f64>() / f.values().len() as f64;
        prop_assert!((energy - mean_sq).abs() <= 1e-10);
    }

    #[test]
    fn c_table_is_permutation_covariant(n in prop::sample::select(vec![3usize, 5, 7]), seed in any::<u64>()) {
        let c = c_table(n).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut seeded(seed));
        for t in 0..1usize << n {
            let mapped = (0..n).filter(|i| t >> i & 1 == 1).fold(0usize, |acc, i| acc | 1 << perm[i]);
            for i in 0..n {
                prop_assert_eq!(c.get(t, i), c.get(mapped, perm[i]));
            }
        }
    }

    #[test]
    fn margin_matches_pairwise_definition(f in prop::sample::select(vec![3usize, 5]).prop_flat_map(table)) {
        let report = majority_margin(&f).unwrap();
        let n = f.n();
        let mut best = f64::INFINITY;
        for s in 0..1usize << n {
            for t in 0..1usize << n {
                if f.eval(s) != f.eval(t) {
                    let v: f64 = (0..n).map(|i| (sign_at(s, i) - sign_at(t, i)) * report.weights[i]).sum();
                    best = best.min(v.abs());
                }
            }
        }
        prop_assert!((report.delta - best).abs() <= 1e-9 * best.max(1.0));
    }

    // ── network ──────────────────────────────────────────────────────────

    #[test]
    fn polynomial_smoothing_matches_quadrature(coeffs in prop::collection::vec(-1.0f64..1.0, 2..=11), v in 0.1f64..4.0, t in -2.0f64..2.0) {
        let act = Activation::Polynomial { coeffs: coeffs.clone() };
        let closed = smoothed_derivative(&act, v, t).unwrap();
        let rule = GaussHermite::new(40);
        let numeric = rule.expect(v, |g| act.derivative(t + g));
        prop_assert!((closed - numeric).abs() <= 1e-8 * numeric.abs().max(1.0), "{closed} vs {numeric}");
    }

    #[test]
    fn smoothed_orders_vanish_beyond_degree(coeffs in prop::collection::vec(-1.0f64..1.0, 2..=9), v in 0.0f64..3.0) {
        let mut coeffs = coeffs;
        let last = coeffs.len() - 1;
        coeffs[last] = 1.0;
        let act = Activation::Polynomial { coeffs };
        let p = last;
        for k in p..p + 3 {
            prop_assert_eq!(smoothed_derivative_order(&act, v, k).unwrap(), 0.0);
        }
    }

    #[test]
    fn relu_smoothing_is_monotone_with_half_at_zero(v in 0.01f64..5.0, t1 in -3.0f64..3.0, dt in 0.0f64..2.0) {
        let a = smoothed_derivative(&Activation::Relu, v, t1).unwrap();
        let b = smoothed_derivative(&Activation::Relu, v, t1 + dt).unwrap();
        prop_assert!(b >= a);
        prop_assert!((smoothed_derivative(&Activation::Relu, v, 0.0).unwrap() - 0.5).abs() <= 1e-15);
    }

    // ── training ─────────────────────────────────────────────────────────

    #[test]
    fn output_layer_loss_is_convex(seed in any::<u64>(), lambda in 0.0f64..=1.0) {
        let mut rng = seeded(seed);
        let (rows, n) = (40, 6);
        let phi: Vec<f64> = (0..rows * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a1: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let a2: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mix: Vec<f64> = a1.iter().zip(&a2).map(|(x, z)| lambda * x + (1.0 - lambda) * z).collect();
        let lhs = output_layer_loss(&phi, n, &y, &mix);
        let rhs = lambda * output_layer_loss(&phi, n, &y, &a1) + (1.0 - lambda) * output_layer_loss(&phi, n, &y, &a2);
        prop_assert!(lhs <= rhs + 1e-9);
    }

    // ── theory ───────────────────────────────────────────────────────────

    #[test]
    fn linear_activation_alpha_is_degree_one_fourier(seed in any::<u64>(), n in 1usize..5, delta in 0.0f64..1.0) {
        let mut rng = seeded(seed);
        let f = BooleanFunction::from_table(n, (0..1usize << n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let model = random_model(n, 12, delta, seed).with_target(f.clone()).unwrap();
        let w: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let act = Activation::Polynomial { coeffs: vec![0.0, 1.0] };
        let alpha = alpha_population(&w, &model, &act).unwrap().alpha;
        for (i, a) in alpha.iter().enumerate() {
            prop_assert!((a - f.coefficient(1 << i)).abs() <= 1e-12);
        }
    }

    #[test]
    fn grid_is_sorted_and_separated(alpha in prop::collection::vec(-2.0f64..2.0, 1..6)) {
        let n = alpha.len();
        let grid = ProjectionGrid::from_scaled(alpha, DEFAULT_DEDUP_TOL);
        prop_assert!(grid.len() <= 1 << n);
        prop_assert!(grid.values.windows(2).all(|w| w[1] > w[0]));
        if grid.len() >= 2 {
            prop_assert!(grid.gap > 0.0);
        }
        for p in 0..1usize << n {
            let u: f64 = (0..n).map(|i| sign_at(p, i) * grid.alpha_tilde[i]).sum();
            prop_assert!((grid.projection(p) - u).abs() <= 1e-9);
        }
    }

    #[test]
    fn certificate_residual_small_whenever_rank_passes(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let alpha: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grid = ProjectionGrid::from_scaled(alpha, DEFAULT_DEDUP_TOL);
        let f = BooleanFunction::from_table(3, (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let range = 2.0 * grid.values.iter().fold(0.0f64, |m, u| m.max(u.abs()));
        let biases = draw_biases(64, range, &mut rng);
        for act in [Activation::truncated_exp(8), Activation::Relu] {
            if let Ok(cert) = build_certificate(&grid, &f, &biases, &act) {
                prop_assert!(cert.residual <= 1e-8, "residual {}", cert.residual);
            }
        }
    }

    #[test]
    fn both_certificates_interpolate_the_grid(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let alpha: Vec<f64> = (0..2).map(|_| rng.random_range(0.2..1.0)).collect();
        let grid = ProjectionGrid::from_scaled(alpha, DEFAULT_DEDUP_TOL);
        let f = BooleanFunction::from_table(2, (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let range = grid.values.iter().fold(0.0f64, |m, u| m.max(u.abs())) + 1.0;
        let biases = draw_biases(2048, range, &mut rng);
        let tri = build_certificate_triangular(&grid, &f, &biases, 0.45);
        let dense = build_certificate(&grid, &f, &biases, &Activation::Relu);
        if let (Ok(tri), Ok(dense)) = (tri, dense) {
            let labels = grid_labels(&f, &grid).unwrap();
            for (u, y) in grid.values.iter().zip(&labels) {
                let eval = |a: &[f64]| -> f64 { a.iter().zip(&biases).map(|(a, b)| a * (u + b).max(0.0)).sum() };
                let scale = tri.certificate.norm_inf.max(1.0) * range;
                prop_assert!((eval(&tri.certificate.a_star) - y).abs() <= 1e-9 * scale);
                prop_assert!((eval(&dense.a_star) - y).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn hermite_variance_monotone_in_degree(k in 0usize..5, a in 0.1f64..3.0, mu in 0.0f64..3.0) {
        let mut prev = 0.0;
        for m in k..k + 10 {
            let v = hermite_coeff_variance(k, a, mu, m).unwrap();
            prop_assert!(v >= prev);
            prev = v;
        }
    }

    // ── baselines ────────────────────────────────────────────────────────

    #[test]
    fn partition_error_symmetric_and_label_invariant(
        (a, b) in (1usize..40).prop_flat_map(|len| (labels(len, 4), labels(len, 4))),
        seed in any::<u64>(),
    ) {
        let mut perm: Vec<usize> = (0..4).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut seeded(seed));
        let relabeled: Vec<usize> = a.iter().map(|&l| perm[l]).collect();
        let e = partition_error(&a, &b).unwrap();
        prop_assert_eq!(e, partition_error(&b, &a).unwrap());
        prop_assert_eq!(e, partition_error(&relabeled, &b).unwrap());
        prop_assert_eq!(partition_error(&a, &relabeled).unwrap(), 0.0);
    }

    #[test]
    fn thresholding_population_covariance_recovers_partition(
        seed in any::<u64>(), n in 1usize..5, dim in 8usize..40, delta in 0.0f64..0.49, frac in 0.01f64..0.99,
    ) {
        prop_assume!(dim >= n);
        let model = random_model(n, dim, delta, seed);
        let m = 1.0 - 2.0 * delta;
        let found = covariance_threshold_cluster(&model.population_covariance(), dim, frac * m * m).unwrap();
        prop_assert_eq!(partition_error(&found.assignment, model.partition().assignment()).unwrap(), 0.0);
    }

    #[test]
    fn eigendecomposition_reconstructs(seed in any::<u64>(), d in 1usize..40) {
        let mut rng = seeded(seed);
        let mut a = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let v = rng.random_range(-1.0..1.0);
                a[i * d + j] = v;
                a[j * d + i] = v;
            }
        }
        let eig = jacobi_eigen(&a, d, JACOBI_TOL, JACOBI_MAX_SWEEPS).unwrap();
        let r = eig.reconstruct();
        let diff: f64 = r.iter().zip(&a).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(diff <= 1e-8 * norm.max(f64::MIN_POSITIVE));
    }
}

#[test]
fn eigendecomposition_reconstructs_at_d_500() {
    let d = 500;
    let mut rng = seeded(500);
    let mut a = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let v = rng.random_range(-1.0..1.0);
            a[i * d + j] = v;
            a[j * d + i] = v;
        }
    }
    let eig = jacobi_eigen(&a, d, JACOBI_TOL, JACOBI_MAX_SWEEPS).unwrap();
    let r = eig.reconstruct();
    let diff: f64 = r.iter().zip(&a).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(diff / norm <= 1e-8, "relative error {}", diff / norm);
}

#[test]
fn constant_target_margin_is_infinite() {
    let f = named_target(NamedTarget::Constant, 3).unwrap();
    assert_eq!(majority_margin(&f).unwrap().delta, f64::INFINITY);
    assert_eq!(min_label_separation(&[0.0, 1.0], &[1.0, 1.0]), f64::INFINITY);
}

#[test]
fn noise_law_table_probabilities_validated() {
    let good = NoiseLaw::BoundedTable { values: vec![-1.0, 2.0], probs: vec![0.25, 0.75] };
    assert!(good.validate(0).is_ok());
    let bad = NoiseLaw::BoundedTable { values: vec![-1.0, 2.0], probs: vec![0.25, 0.7] };
    assert!(bad.validate(0).is_err());
    assert!(NoiseLaw::Gaussian { mean: 0.0, variance: -1.0 }.validate(0).is_err());
    assert!(NoiseLaw::Rademacher { flip_prob: 1.5 }.validate(0).is_err());
}

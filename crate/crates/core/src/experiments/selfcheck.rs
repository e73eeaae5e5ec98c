//! Fast invariant checks over every module, runnable from the command line
//! without a configuration file.

use rand::Rng as _;
use serde::Serialize;

use crate::baselines::{covariance_threshold_cluster, partition_error};
use crate::boolean::{inverse_walsh_hadamard, majority, majority_coefficient, named_target, walsh_hadamard, NamedTarget};
use crate::latent_data::make_bsc_model;
use crate::linalg::{jacobi_eigen, JACOBI_MAX_SWEEPS, JACOBI_TOL};
use crate::network::{init_uniform, Activation};
use crate::rng::{stream, Phase};
use crate::theory::{hermite_coeff_variance, projection_consistent, ProjectionGrid, DEFAULT_DEDUP_TOL};
use crate::training::{finite_difference_check, LossScale};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

/// Runs every check; failures are reported, never panicked on.
pub fn run_selfcheck(seed: u64) -> Vec<Check> {
    let checks: Vec<(&'static str, fn(u64) -> crate::Result<Check>)> = vec![
        ("walsh_hadamard_round_trip", walsh_round_trip),
        ("majority_coefficients", majority_coefficients),
        ("gradient_finite_differences", gradients),
        ("population_covariance_thresholding", thresholding),
        ("partition_error_label_invariance", partition_invariance),
        ("projection_grid_dyadic", dyadic_grid),
        ("eigendecomposition_reconstruction", eigen_reconstruction),
        ("hermite_variance_example", hermite_example),
    ];
    checks
        .into_iter()
        .map(|(name, f)| f(seed).unwrap_or_else(|e| check(name, false, format!("error: {e}"))))
        .collect()
}

fn walsh_round_trip(seed: u64) -> crate::Result<Check> {
    let mut rng = stream(seed, 0, Phase::Other);
    let values: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
    let back = inverse_walsh_hadamard(&walsh_hadamard(&values)?)?;
    let err = values.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(check("walsh_hadamard_round_trip", err <= 1e-12, format!("max error {err:.2e}")))
}

fn majority_coefficients(_: u64) -> crate::Result<Check> {
    let mut worst: f64 = 0.0;
    for n in [3, 5, 7] {
        let f = majority(n)?;
        for subset in 0..(1usize << n) {
            let k = subset.count_ones() as usize;
            worst = worst.max((f.coefficient(subset) - majority_coefficient(n, k)?).abs());
        }
    }
    Ok(check("majority_coefficients", worst <= 1e-12, format!("max deviation {worst:.2e}")))
}

fn gradients(seed: u64) -> crate::Result<Check> {
    let model = make_bsc_model(2, 6, 0.2, named_target(NamedTarget::Parity, 2)?)?;
    let mut worst: f64 = 0.0;
    for (t, act) in [Activation::truncated_exp(4), Activation::Relu].into_iter().enumerate() {
        let mut rng = stream(seed, 1 + t as u64, Phase::Other);
        let net = init_uniform(5, 6, act, &mut rng)?;
        let batch = model.sample(8, &mut rng);
        worst = worst.max(finite_difference_check(&net, &batch.x, &batch.y, LossScale::Mean, 1e-6).max());
    }
    Ok(check("gradient_finite_differences", worst <= 1e-6, format!("max relative error {worst:.2e}")))
}

fn thresholding(_: u64) -> crate::Result<Check> {
    let model = make_bsc_model(3, 12, 0.2, named_target(NamedTarget::Parity, 3)?)?;
    let found = covariance_threshold_cluster(&model.population_covariance(), 12, 0.18)?;
    let err = partition_error(&found.assignment, model.partition().assignment())?;
    Ok(check("population_covariance_thresholding", err == 0.0, format!("misclustering {err}")))
}

fn partition_invariance(seed: u64) -> crate::Result<Check> {
    let mut rng = stream(seed, 2, Phase::Other);
    let a: Vec<usize> = (0..30).map(|_| rng.random_range(0..4)).collect();
    let b: Vec<usize> = (0..30).map(|_| rng.random_range(0..3)).collect();
    let relabeled: Vec<usize> = a.iter().map(|&l| (l + 1) % 4).collect();
    let (ab, ba, rb) = (partition_error(&a, &b)?, partition_error(&b, &a)?, partition_error(&relabeled, &b)?);
    let pass = ab == ba && ab == rb && partition_error(&a, &relabeled)? == 0.0;
    Ok(check("partition_error_label_invariance", pass, format!("errors {ab}, {ba}, {rb}")))
}

fn dyadic_grid(_: u64) -> crate::Result<Check> {
    let grid = ProjectionGrid::from_scaled(vec![1.0, 2.0, 4.0], DEFAULT_DEDUP_TOL);
    let parity = named_target(NamedTarget::Parity, 3)?;
    let collided = ProjectionGrid::from_scaled(vec![1.0, 1.0, 0.0], DEFAULT_DEDUP_TOL);
    let pass = grid.len() == 8 && grid.gap == 2.0 && !projection_consistent(&parity, &collided);
    Ok(check("projection_grid_dyadic", pass, format!("M = {}, gap = {}", grid.len(), grid.gap)))
}

fn eigen_reconstruction(seed: u64) -> crate::Result<Check> {
    let d = 40;
    let mut rng = stream(seed, 3, Phase::Other);
    let mut a = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let v = rng.random_range(-1.0..1.0);
            a[i * d + j] = v;
            a[j * d + i] = v;
        }
    }
    let eig = jacobi_eigen(&a, d, JACOBI_TOL, JACOBI_MAX_SWEEPS)?;
    let mut diff = 0.0;
    let mut norm = 0.0;
    for i in 0..d {
        for j in 0..d {
            let r: f64 = (0..d).map(|k| eig.vectors[i * d + k] * eig.values[k] * eig.vectors[j * d + k]).sum();
            diff += (r - a[i * d + j]).powi(2);
            norm += a[i * d + j].powi(2);
        }
    }
    let rel = (diff / norm).sqrt();
    Ok(check("eigendecomposition_reconstruction", rel <= 1e-8, format!("relative Frobenius error {rel:.2e}")))
}

fn hermite_example(_: u64) -> crate::Result<Check> {
    let v = hermite_coeff_variance(0, 1.0, 1.0, 2)?;
    Ok(check("hermite_variance_example", (v - 2.0).abs() <= 1e-12, format!("s_0^2 = {v}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        let report = run_selfcheck(0);
        assert_eq!(report.len(), 8);
        for c in &report {
            assert!(c.pass, "{} failed: {}", c.name, c.detail);
        }
    }
}

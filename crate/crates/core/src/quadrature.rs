//! Gauss–Hermite quadrature for expectations under a centered Gaussian.
//!
//! Nodes and weights come from the Golub–Welsch eigenproblem of the
//! probabilists' Hermite Jacobi matrix. Used as an independent check on the
//! closed-form Gaussian-moment paths.

use crate::linalg::jacobi_eigen;

#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// `points`-node rule, exact for polynomials of degree `< 2 * points`
    /// against the standard normal density.
    pub fn new(points: usize) -> Self {
        assert!(points >= 1);
        let n = points;
        let mut jm = vec![0.0; n * n];
        for k in 1..n {
            let b = (k as f64).sqrt();
            jm[(k - 1) * n + k] = b;
            jm[k * n + (k - 1)] = b;
        }
        let eig = jacobi_eigen(&jm, n, 1e-15, 200).expect("hermite jacobi matrix");
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let v0 = eig.vectors[k];
                (eig.values[k], v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        GaussHermite {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        }
    }

    /// `E[g(G)]` for `G ~ N(0, variance)`.
    pub fn expect<F: Fn(f64) -> f64>(&self, variance: f64, g: F) -> f64 {
        let sd = variance.max(0.0).sqrt();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(sd * x))
            .sum()
    }
}

/// Composite rule for integrands with a kink: splits the real line at the
/// given breakpoints (in standard-normal units) and integrates each piece with
/// Gauss–Legendre on the density. Only used in tests of ReLU smoothing.
pub fn normal_expectation_piecewise<F: Fn(f64) -> f64>(g: F, lo: f64, hi: f64, pieces: usize) -> f64 {
    let h = (hi - lo) / pieces as f64;
    // 5-point Gauss–Legendre on each piece.
    const X: [f64; 5] = [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
    const W: [f64; 5] = [0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1, 0.236_926_885_056_189_1];
    let density = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut total = 0.0;
    for p in 0..pieces {
        let a = lo + p as f64 * h;
        let mid = a + 0.5 * h;
        for (x, w) in X.iter().zip(W.iter()) {
            let t = mid + 0.5 * h * x;
            total += 0.5 * h * w * g(t) * density(t);
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_gaussian_moments() {
        let gh = GaussHermite::new(20);
        let v = 2.5;
        assert!((gh.expect(v, |_| 1.0) - 1.0).abs() < 1e-13);
        assert!(gh.expect(v, |x| x).abs() < 1e-12);
        assert!((gh.expect(v, |x| x * x) - v).abs() < 1e-12);
        assert!((gh.expect(v, |x| x.powi(4)) - 3.0 * v * v).abs() < 1e-10);
        assert!((gh.expect(v, |x| x.powi(6)) - 15.0 * v * v * v).abs() < 1e-9);
    }

    #[test]
    fn piecewise_rule_integrates_step() {
        let p = normal_expectation_piecewise(|x| if x >= 0.0 { 1.0 } else { 0.0 }, -10.0, 10.0, 200);
        assert!((p - 0.5).abs() < 1e-12);
    }
}

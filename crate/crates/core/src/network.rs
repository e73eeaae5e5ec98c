//! Two-layer networks `NN(x) = Σ_h a_h σ(w_h·x + b_h)`, their activations and
//! Gaussian smoothing `S_v(t) = E_{G~N(0,v)}[σ'(t + G)]`.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    /// `σ(z) = Σ_ℓ coeffs[ℓ] z^ℓ`.
    Polynomial { coeffs: Vec<f64> },
    Relu,
}

impl Activation {
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        let act = Activation::Polynomial { coeffs };
        act.validate()?;
        Ok(act)
    }

    /// Truncated exponential `Σ_{ℓ=1}^{P} z^ℓ / ℓ!`.
    pub fn truncated_exp(degree: usize) -> Self {
        let mut coeffs = vec![0.0; degree + 1];
        let mut fact = 1.0;
        for (l, c) in coeffs.iter_mut().enumerate().skip(1) {
            fact *= l as f64;
            *c = 1.0 / fact;
        }
        Activation::Polynomial { coeffs }
    }

    pub fn validate(&self) -> Result<()> {
        if let Activation::Polynomial { coeffs } = self {
            if coeffs.len() < 2 {
                return Err(Error::InvalidActivation("polynomial degree must be at least 1".into()));
            }
            if coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidActivation("non-finite coefficient".into()));
            }
            if *coeffs.last().unwrap() == 0.0 {
                return Err(Error::InvalidActivation("leading coefficient is zero".into()));
            }
        }
        Ok(())
    }

    pub fn degree(&self) -> Option<usize> {
        match self {
            Activation::Polynomial { coeffs } => Some(coeffs.len() - 1),
            Activation::Relu => None,
        }
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            Activation::Polynomial { coeffs } => horner(coeffs, z),
            Activation::Relu => z.max(0.0),
        }
    }

    /// `σ'(z)`; the ReLU subgradient at 0 is taken as 0.
    #[inline]
    pub fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for (l, c) in coeffs.iter().enumerate().skip(1).rev() {
                    acc = acc * z + l as f64 * c;
                }
                acc
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `(σ(z), σ'(z))` in one pass.
    #[inline]
    pub fn eval_with_derivative(&self, z: f64) -> (f64, f64) {
        match self {
            Activation::Polynomial { coeffs } => {
                let mut p = 0.0;
                let mut dp = 0.0;
                for c in coeffs.iter().rev() {
                    dp = dp * z + p;
                    p = p * z + c;
                }
                (p, dp)
            }
            Activation::Relu => {
                if z > 0.0 {
                    (z, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
        }
    }
}

#[inline]
pub fn horner(coeffs: &[f64], z: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c)
}

/// Coefficients of `p'`.
pub fn poly_derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs.iter().enumerate().skip(1).map(|(l, c)| l as f64 * c).collect()
}

/// `E[G^k]` for `G ~ N(0, v)`: zero for odd `k`, `v^{k/2} (k-1)!!` otherwise.
pub fn gaussian_moment(v: f64, k: usize) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    let mut acc = 1.0;
    let mut j = 1;
    while j < k {
        acc *= j as f64 * v;
        j += 2;
    }
    acc
}

/// Coefficients of `t ↦ E[p(t + G)]`, `G ~ N(0, v)`.
pub fn smooth_polynomial(coeffs: &[f64], v: f64) -> Vec<f64> {
    let deg = coeffs.len();
    let mut out = vec![0.0; deg];
    for (k, &pk) in coeffs.iter().enumerate() {
        if pk == 0.0 {
            continue;
        }
        // (t + G)^k = Σ_m C(k, m) t^m G^{k-m}
        let mut binom = 1.0;
        for m in (0..=k).rev() {
            // binom = C(k, m) walking m downward from k
            out[m] += pk * binom * gaussian_moment(v, k - m);
            if m > 0 {
                binom = binom * m as f64 / (k - m + 1) as f64;
            }
        }
    }
    out
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `σ` paired with a smoothing variance `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedActivation {
    pub activation: Activation,
    pub variance: f64,
}

impl SmoothedActivation {
    pub fn new(activation: Activation, variance: f64) -> Self {
        SmoothedActivation { activation, variance }
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        smoothed_derivative(&self.activation, self.variance, t)
    }

    pub fn derivative_at_zero(&self, k: usize) -> Result<f64> {
        smoothed_derivative_order(&self.activation, self.variance, k)
    }

    /// Polynomial coefficients of `S_v`, when `σ` is polynomial.
    pub fn polynomial(&self) -> Option<Vec<f64>> {
        match &self.activation {
            Activation::Polynomial { coeffs } => Some(smooth_polynomial(&poly_derivative(coeffs), self.variance)),
            Activation::Relu => None,
        }
    }
}

/// `S_v(t) = E_{G~N(0,v)}[σ'(t + G)]`.
///
/// Polynomials use exact Gaussian moments; ReLU uses `Φ(t/√v)` and rejects
/// `v = 0, t = 0`.
pub fn smoothed_derivative(act: &Activation, v: f64, t: f64) -> Result<f64> {
    match act {
        Activation::Polynomial { coeffs } => Ok(horner(&smooth_polynomial(&poly_derivative(coeffs), v), t)),
        Activation::Relu => {
            if v <= 0.0 {
                if t == 0.0 {
                    return Err(Error::ReluKink);
                }
                return Ok(if t > 0.0 { 1.0 } else { 0.0 });
            }
            Ok(normal_cdf(t / v.sqrt()))
        }
    }
}

/// `S_v^{(k)}(0) = E[σ^{(k+1)}(G)]`. Zero once `k` reaches the polynomial
/// degree.
pub fn smoothed_derivative_order(act: &Activation, v: f64, k: usize) -> Result<f64> {
    match act {
        Activation::Polynomial { coeffs } => {
            let q = smooth_polynomial(&poly_derivative(coeffs), v);
            if k >= q.len() {
                return Ok(0.0);
            }
            let fact: f64 = (1..=k).map(|i| i as f64).product();
            Ok(fact * q[k])
        }
        Activation::Relu => {
            if v <= 0.0 {
                return Err(Error::ReluKink);
            }
            if k == 0 {
                return Ok(0.5);
            }
            // d^k/dt^k Φ(t/√v) at 0 = v^{-k/2} φ^{(k-1)}(0), φ^{(m)}(0) = (-1)^m He_m(0) φ(0).
            let m = k - 1;
            if m % 2 == 1 {
                return Ok(0.0);
            }
            let he0 = if (m / 2) % 2 == 0 { 1.0 } else { -1.0 } * gaussian_moment(1.0, m);
            let phi0 = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
            Ok(he0 * phi0 / v.powf(k as f64 / 2.0))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationReport {
    pub smoothing_variance: f64,
    /// `S^{(k)}_v(0)` for `k = 0..=N`.
    pub values: Vec<f64>,
    pub min_abs: f64,
    pub pass: bool,
    /// Set when the polynomial degree is below `2^N`.
    pub degree_below_requirement: bool,
}

/// Evaluates `|S^{(k)}_{μ + v_sum/d}(0)|` for `k ≤ N` against `c0`.
pub fn check_activation_assumption(
    act: &Activation,
    mu: f64,
    v_sum: f64,
    dim: usize,
    n_clusters: usize,
    c0: f64,
) -> Result<ActivationReport> {
    let v = mu + v_sum / dim as f64;
    let values: Vec<f64> = (0..=n_clusters).map(|k| smoothed_derivative_order(act, v, k)).collect::<Result<_>>()?;
    let min_abs = values.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    let degree_below_requirement = match act.degree() {
        Some(p) => (p as f64) < 2f64.powi(n_clusters as i32),
        None => false,
    };
    if degree_below_requirement {
        log::warn!("activation degree {:?} is below 2^N = {}", act.degree(), 1usize << n_clusters);
    }
    Ok(ActivationReport { smoothing_variance: v, values, min_abs, pass: min_abs >= c0, degree_below_requirement })
}

/// Two-layer network with `n` hidden units on `d` inputs. `w` is row-major
/// `n x d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "NetDocument", try_from = "NetDocument")]
pub struct TwoLayerNet {
    pub n: usize,
    pub d: usize,
    pub w: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetDocument {
    pub n: usize,
    pub d: usize,
    pub activation: Activation,
    #[serde(rename = "W")]
    pub w: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl From<TwoLayerNet> for NetDocument {
    fn from(net: TwoLayerNet) -> Self {
        NetDocument { n: net.n, d: net.d, activation: net.activation, w: net.w, a: net.a, b: net.b }
    }
}

impl TryFrom<NetDocument> for TwoLayerNet {
    type Error = Error;
    fn try_from(doc: NetDocument) -> Result<Self> {
        TwoLayerNet::new(doc.n, doc.d, doc.w, doc.a, doc.b, doc.activation)
    }
}

impl TwoLayerNet {
    pub fn new(n: usize, d: usize, w: Vec<f64>, a: Vec<f64>, b: Vec<f64>, activation: Activation) -> Result<Self> {
        if w.len() != n * d {
            return Err(Error::ShapeMismatch { expected: n * d, got: w.len() });
        }
        if a.len() != n {
            return Err(Error::ShapeMismatch { expected: n, got: a.len() });
        }
        if b.len() != n {
            return Err(Error::ShapeMismatch { expected: n, got: b.len() });
        }
        if w.iter().chain(&a).chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::Config("network parameters must be finite".into()));
        }
        activation.validate()?;
        Ok(TwoLayerNet { n, d, w, a, b, activation })
    }

    #[inline]
    pub fn row(&self, h: usize) -> &[f64] {
        &self.w[h * self.d..(h + 1) * self.d]
    }

    #[inline]
    pub fn row_mut(&mut self, h: usize) -> &mut [f64] {
        &mut self.w[h * self.d..(h + 1) * self.d]
    }

    /// Pre-activations `w_h·x + b_h` into `out`.
    #[inline]
    pub fn pre_activations(&self, x: &[f64], out: &mut [f64]) {
        for (h, o) in out.iter_mut().enumerate().take(self.n) {
            *o = crate::linalg::dot(self.row(h), x) + self.b[h];
        }
    }

    #[inline]
    pub fn forward_unchecked(&self, x: &[f64]) -> f64 {
        (0..self.n)
            .map(|h| self.a[h] * self.activation.eval(crate::linalg::dot(self.row(h), x) + self.b[h]))
            .sum()
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::ShapeMismatch { expected: self.d, got: x.len() });
        }
        Ok(self.forward_unchecked(x))
    }

    /// Outputs for a flat row-major batch of inputs.
    pub fn forward_batch(&self, xs: &[f64]) -> Result<Vec<f64>> {
        if xs.len() % self.d != 0 {
            return Err(Error::ShapeMismatch { expected: self.d, got: xs.len() % self.d });
        }
        Ok(xs.chunks_exact(self.d).map(|x| self.forward_unchecked(x)).collect())
    }
}

/// `W_{hj} ~ N(0, 1/d)`, `a = τ`, `b = 0`.
pub fn init_layerwise(n: usize, d: usize, tau: f64, activation: Activation, rng: &mut Rng) -> Result<TwoLayerNet> {
    let sd = 1.0 / (d as f64).sqrt();
    let w = (0..n * d).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
    TwoLayerNet::new(n, d, w, vec![tau; n], vec![0.0; n], activation)
}

/// Every first-layer entry equal to `1/√d`, `a = τ`, `b = 0`.
pub fn init_deterministic(n: usize, d: usize, tau: f64, activation: Activation) -> Result<TwoLayerNet> {
    let v = 1.0 / (d as f64).sqrt();
    TwoLayerNet::new(n, d, vec![v; n * d], vec![tau; n], vec![0.0; n], activation)
}

/// Fan-in uniform initialization: `W, b ~ U(±1/√d)`, `a ~ U(±1/√n)`.
pub fn init_uniform(n: usize, d: usize, activation: Activation, rng: &mut Rng) -> Result<TwoLayerNet> {
    let k1 = 1.0 / (d as f64).sqrt();
    let k2 = 1.0 / (n as f64).sqrt();
    let w = (0..n * d).map(|_| rng.random_range(-k1..k1)).collect();
    let b = (0..n).map(|_| rng.random_range(-k1..k1)).collect();
    let a = (0..n).map(|_| rng.random_range(-k2..k2)).collect();
    TwoLayerNet::new(n, d, w, a, b, activation)
}

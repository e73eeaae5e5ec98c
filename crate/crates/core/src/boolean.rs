//! Fourier–Walsh analysis on the hypercube `{±1}^N`.
//!
//! Index convention: a sign pattern `s` is stored as an integer whose bit `b`
//! is 1 exactly when `s_b = -1`. A subset `T ⊆ [N]` is stored as the mask with
//! bit `i` set when `i ∈ T`, so `χ_T(s) = (-1)^{popcount(T & s)}`.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_BITS: usize = 20;

/// Two label values closer than this are treated as equal.
pub const LABEL_TOL: f64 = 1e-12;

#[inline]
pub fn sign_at(pattern: usize, bit: usize) -> f64 {
    if (pattern >> bit) & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

#[inline]
pub fn character(subset: usize, pattern: usize) -> f64 {
    if (subset & pattern).count_ones() % 2 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// Pattern index of an explicit sign vector.
pub fn pattern_of(signs: &[f64]) -> usize {
    signs
        .iter()
        .enumerate()
        .fold(0, |acc, (b, &s)| if s < 0.0 { acc | (1 << b) } else { acc })
}

pub fn signs_of(pattern: usize, n: usize) -> Vec<f64> {
    (0..n).map(|b| sign_at(pattern, b)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedTarget {
    Parity,
    Majority,
    Dictator,
    Constant,
}

impl NamedTarget {
    pub fn as_str(self) -> &'static str {
        match self {
            NamedTarget::Parity => "parity",
            NamedTarget::Majority => "majority",
            NamedTarget::Dictator => "dictator",
            NamedTarget::Constant => "constant",
        }
    }
}

impl fmt::Display for NamedTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NamedTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parity" => Ok(NamedTarget::Parity),
            "majority" => Ok(NamedTarget::Majority),
            "dictator" => Ok(NamedTarget::Dictator),
            "constant" => Ok(NamedTarget::Constant),
            other => Err(Error::UnknownTarget(other.to_string())),
        }
    }
}

/// Wire form of a target: either a name or an explicit value table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Named { name: NamedTarget, n: usize },
    Table { n: usize, values: Vec<f64> },
}

/// A real-valued function on `{±1}^N` stored as its value table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "TargetSpec", try_from = "TargetSpec")]
pub struct BooleanFunction {
    n: usize,
    values: Vec<f64>,
    name: Option<NamedTarget>,
    fourier: OnceLock<Vec<f64>>,
}

impl PartialEq for BooleanFunction {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.values == other.values && self.name == other.name
    }
}

impl From<BooleanFunction> for TargetSpec {
    fn from(f: BooleanFunction) -> Self {
        match f.name {
            Some(name) => TargetSpec::Named { name, n: f.n },
            None => TargetSpec::Table { n: f.n, values: f.values },
        }
    }
}

impl TryFrom<TargetSpec> for BooleanFunction {
    type Error = Error;
    fn try_from(spec: TargetSpec) -> Result<Self> {
        match spec {
            TargetSpec::Named { name, n } => named_target(name, n),
            TargetSpec::Table { n, values } => BooleanFunction::from_table(n, values),
        }
    }
}

impl BooleanFunction {
    pub fn from_table(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || n > MAX_BITS {
            return Err(Error::UnsupportedBits(n));
        }
        if values.len() != 1 << n {
            return Err(Error::ShapeMismatch { expected: 1 << n, got: values.len() });
        }
        Ok(BooleanFunction { n, values, name: None, fourier: OnceLock::new() })
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(n: usize, f: F) -> Result<Self> {
        if n == 0 || n > MAX_BITS {
            return Err(Error::UnsupportedBits(n));
        }
        let values = (0..1usize << n).map(|p| f(&signs_of(p, n))).collect();
        Self::from_table(n, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn name(&self) -> Option<NamedTarget> {
        self.name
    }

    #[inline]
    pub fn eval(&self, pattern: usize) -> f64 {
        self.values[pattern]
    }

    pub fn eval_signs(&self, signs: &[f64]) -> f64 {
        self.values[pattern_of(signs)]
    }

    /// Fourier–Walsh coefficients `f̂(T)`, indexed by subset mask.
    pub fn fourier(&self) -> &[f64] {
        self.fourier
            .get_or_init(|| walsh_hadamard(&self.values).expect("table length is a power of two"))
    }

    pub fn coefficient(&self, subset: usize) -> f64 {
        self.fourier()[subset]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.values.len() as f64
    }

    /// `max_s |f(s)|`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|v| (v - self.values[0]).abs() <= LABEL_TOL)
    }

    /// True when every value is `±1`.
    pub fn is_sign_valued(&self) -> bool {
        self.values.iter().all(|v| (v.abs() - 1.0).abs() <= LABEL_TOL)
    }

    /// Rescales deviations from the mean so that `Var(f) = 1`. Constant
    /// functions are returned unchanged.
    pub fn normalize_variance(&self) -> BooleanFunction {
        let var = self.variance();
        if var <= 0.0 {
            return self.clone();
        }
        let m = self.mean();
        let sd = var.sqrt();
        let values = self.values.iter().map(|v| m + (v - m) / sd).collect();
        BooleanFunction { n: self.n, values, name: None, fourier: OnceLock::new() }
    }
}

fn butterfly(data: &mut [f64]) {
    let len = data.len();
    let mut h = 1;
    while h < len {
        for block in (0..len).step_by(2 * h) {
            for i in block..block + h {
                let a = data[i];
                let b = data[i + h];
                data[i] = a + b;
                data[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// Forward transform: `f̂(T) = E_s[f(s) χ_T(s)]`.
pub fn walsh_hadamard(values: &[f64]) -> Result<Vec<f64>> {
    let len = values.len();
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    let mut out = values.to_vec();
    butterfly(&mut out);
    let scale = 1.0 / len as f64;
    out.iter_mut().for_each(|v| *v *= scale);
    Ok(out)
}

/// Inverse transform: `f(s) = Σ_T f̂(T) χ_T(s)`.
pub fn inverse_walsh_hadamard(coefficients: &[f64]) -> Result<Vec<f64>> {
    let len = coefficients.len();
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    let mut out = coefficients.to_vec();
    butterfly(&mut out);
    Ok(out)
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as f64
}

/// Fourier–Walsh coefficient of `Maj_N` on any subset of size `k`.
///
/// Zero for even `k`. For odd `k`:
/// `(-1)^{(k-1)/2} C((N-1)/2, (k-1)/2) / C(N-1, k-1) * 2^{1-N} C(N-1, (N-1)/2)`.
pub fn majority_coefficient(n: usize, k: usize) -> Result<f64> {
    if n % 2 == 0 {
        return Err(Error::EvenMajority(n));
    }
    if k > n {
        return Err(Error::SubsetTooLarge { k, n });
    }
    if k % 2 == 0 {
        return Ok(0.0);
    }
    let half = (n - 1) / 2;
    let j = (k - 1) / 2;
    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
    let central = binomial(n - 1, half);
    let value = sign * binomial(half, j) / binomial(n - 1, k - 1) * 2.0 * central / 2f64.powi(n as i32);
    Ok(value)
}

/// `Maj_N(s) = sign(Σ s_i)` for odd `N`.
pub fn majority(n: usize) -> Result<BooleanFunction> {
    if n % 2 == 0 {
        return Err(Error::EvenMajority(n));
    }
    let mut f = BooleanFunction::from_fn(n, |s| if s.iter().sum::<f64>() > 0.0 { 1.0 } else { -1.0 })?;
    f.name = Some(NamedTarget::Majority);
    Ok(f)
}

pub fn named_target(name: NamedTarget, n: usize) -> Result<BooleanFunction> {
    let mut f = match name {
        NamedTarget::Parity => BooleanFunction::from_fn(n, |s| s.iter().product())?,
        NamedTarget::Majority => return majority(n),
        NamedTarget::Dictator => BooleanFunction::from_fn(n, |s| s[0])?,
        NamedTarget::Constant => BooleanFunction::from_fn(n, |_| 1.0)?,
    };
    f.name = Some(name);
    Ok(f)
}

pub fn named_target_str(name: &str, n: usize) -> Result<BooleanFunction> {
    named_target(name.parse()?, n)
}

/// Table of `c_{T,i}`, indexed `[T * N + i]`.
#[derive(Debug, Clone)]
pub struct CTable {
    pub n: usize,
    values: Vec<f64>,
}

impl CTable {
    #[inline]
    pub fn get(&self, subset: usize, i: usize) -> f64 {
        self.values[subset * self.n + i]
    }
}

/// `c_{T,i}`: 1 if `T = {i}`; `Maĵ_N(|T|-1)` if `i ∈ T` otherwise;
/// `Maĵ_N(|T|+1)` if `i ∉ T`.
pub fn c_table(n: usize) -> Result<CTable> {
    if n % 2 == 0 {
        return Err(Error::EvenMajority(n));
    }
    if n > MAX_BITS {
        return Err(Error::UnsupportedBits(n));
    }
    let maj: Vec<f64> = (0..=n).map(|k| majority_coefficient(n, k)).collect::<Result<_>>()?;
    let mut values = vec![0.0; (1 << n) * n];
    for t in 0..1usize << n {
        let size = t.count_ones() as usize;
        for i in 0..n {
            let v = if t == 1 << i {
                1.0
            } else if (t >> i) & 1 == 1 {
                maj[size - 1]
            } else if size < n {
                maj[size + 1]
            } else {
                0.0
            };
            values[t * n + i] = v;
        }
    }
    Ok(CTable { n, values })
}

/// Minimum of `|u(s) - u(t)|` over pairs with `f(s) ≠ f(t)`, or `+∞` when no
/// such pair exists.
///
/// The closest differently-labelled pair is always adjacent in `u`-order, so
/// this runs in `O(2^N log 2^N)`.
pub fn min_label_separation(u: &[f64], labels: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&a, &b| u[a].total_cmp(&u[b]).then(labels[a].total_cmp(&labels[b])));
    // Within a run of equal u values, any two distinct labels give a zero gap.
    let mut best = f64::INFINITY;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && u[order[j + 1]] == u[order[i]] {
            j += 1;
        }
        if (labels[order[j]] - labels[order[i]]).abs() > LABEL_TOL {
            return 0.0;
        }
        i = j + 1;
    }
    for w in order.windows(2) {
        if (labels[w[0]] - labels[w[1]]).abs() > LABEL_TOL {
            best = best.min((u[w[1]] - u[w[0]]).abs());
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct MarginReport {
    /// `Δ`; `+∞` for constant targets.
    pub delta: f64,
    /// `g_i = Σ_T f̂(T) c_{T,i}`, the weights appearing in the margin.
    pub weights: Vec<f64>,
    /// `α_i = g_i / 2`.
    pub alpha: Vec<f64>,
}

/// Majority-margin of `f`: `min_{f(s)≠f(t)} |Σ_i (s_i - t_i) g_i|` with
/// `g_i = Σ_T f̂(T) c_{T,i}`. Note `Σ_i (s_i - t_i) g_i = 4 (α·s - α·t) / 2`,
/// i.e. the margin equals twice the gap of the projection `s ↦ α·s`.
pub fn majority_margin(f: &BooleanFunction) -> Result<MarginReport> {
    let n = f.n();
    let table = c_table(n)?;
    let fhat = f.fourier();
    let weights: Vec<f64> = (0..n)
        .map(|i| (0..1usize << n).map(|t| fhat[t] * table.get(t, i)).sum())
        .collect();
    let alpha = weights.iter().map(|g| 0.5 * g).collect();
    let u: Vec<f64> = (0..1usize << n)
        .map(|p| (0..n).map(|i| sign_at(p, i) * weights[i]).sum())
        .collect();
    let delta = min_label_separation(&u, f.values());
    Ok(MarginReport { delta, weights, alpha })
}

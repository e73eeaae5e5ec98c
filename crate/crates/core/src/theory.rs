//! Closed-form and Monte Carlo oracles: the population gradient `α`, its
//! Fourier form on the homogeneous BSC, projection grids, interpolating
//! certificates, an anti-concentration probe and Hermite-coefficient
//! variances.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::boolean::{majority_margin, min_label_separation, sign_at, BooleanFunction, LABEL_TOL};
use crate::error::{Error, Result};
use crate::latent_data::{DataModel, NoiseLaw};
use crate::linalg::{cholesky, cholesky_solve, jacobi_eigen, JACOBI_MAX_SWEEPS};
use crate::network::{horner, poly_derivative, smooth_polynomial, smoothed_derivative, Activation, TwoLayerNet};
use crate::quadrature::GaussHermite;
use crate::rng::Rng;

/// Grid values closer than this are merged.
pub const DEFAULT_DEDUP_TOL: f64 = 1e-12;

/// Largest acceptable condition number of `ΦΦᵀ`.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaProvenance {
    PopulationExact,
    HomogeneousFourier,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaVector {
    pub alpha: Vec<f64>,
    /// Smoothing variance `V² = Σ_j w_j² τ_j²`.
    pub variance: f64,
    pub provenance: AlphaProvenance,
}

/// `Δ_m(w)_i = Σ_{j ∈ C_i} m_j w_j`: the conditional mean of `w·x` is
/// `s·Δ_m(w)`.
pub fn cluster_projection(w: &[f64], model: &DataModel) -> Result<Vec<f64>> {
    if w.len() != model.dim() {
        return Err(Error::ShapeMismatch { expected: model.dim(), got: w.len() });
    }
    let mut out = vec![0.0; model.n_clusters()];
    for (j, law) in model.noise().iter().enumerate() {
        out[model.partition().cluster_of(j)] += law.mean() * w[j];
    }
    Ok(out)
}

/// `V² = Σ_j w_j² τ_j²`, the conditional variance of `w·x` given `s`.
pub fn smoothing_variance(w: &[f64], model: &DataModel) -> f64 {
    w.iter().zip(model.noise()).map(|(wj, law)| wj * wj * law.variance()).sum()
}

/// `α_i(w) = E_s[f(s) s_i S_{V²}(s·Δ_m(w))]`, summed exactly over the cube.
/// For ReLU with `V² = 0` the inner expectation is the step `1(t ≥ 0)`.
pub fn alpha_population(w: &[f64], model: &DataModel, act: &Activation) -> Result<AlphaVector> {
    let delta_m = cluster_projection(w, model)?;
    let variance = smoothing_variance(w, model);
    let n = model.n_clusters();
    let f = model.target();
    let smoothed = match act {
        Activation::Polynomial { coeffs } => Some(smooth_polynomial(&poly_derivative(coeffs), variance)),
        Activation::Relu => None,
    };
    let inner = |t: f64| -> f64 {
        match &smoothed {
            Some(q) => horner(q, t),
            None => match smoothed_derivative(act, variance, t) {
                Ok(v) => v,
                Err(_) => 1.0,
            },
        }
    };
    let len = 1usize << n;
    let mut alpha = vec![0.0; n];
    for p in 0..len {
        let t: f64 = (0..n).map(|i| sign_at(p, i) * delta_m[i]).sum();
        let weight = f.eval(p) * inner(t);
        for (i, a) in alpha.iter_mut().enumerate() {
            *a += sign_at(p, i) * weight;
        }
    }
    alpha.iter_mut().for_each(|a| *a /= len as f64);
    Ok(AlphaVector { alpha, variance, provenance: AlphaProvenance::PopulationExact })
}

/// Homogeneous-BSC `α_i = E_s[f(s) s_i 1((1-2δ) Σ_l s_l > 0)]` through its
/// Fourier form: `½ Σ_T f̂(T) c_{T,i}` for `δ < ½`, the mirrored form for
/// `δ > ½`, and zero at `δ = ½`.
pub fn alpha_homogeneous(f: &BooleanFunction, flip_prob: f64) -> Result<AlphaVector> {
    let report = majority_margin(f)?;
    let n = f.n();
    let alpha = (0..n)
        .map(|i| {
            let linear = f.coefficient(1 << i);
            let half = report.weights[i] / 2.0;
            if flip_prob < 0.5 {
                half
            } else if flip_prob > 0.5 {
                linear - half
            } else {
                0.0
            }
        })
        .collect();
    Ok(AlphaVector { alpha, variance: 0.0, provenance: AlphaProvenance::HomogeneousFourier })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
}

/// Monte Carlo estimate of `E[y σ'(w·x) x_j]` for every coordinate `j`.
pub fn population_gradient_mc_all(w: &[f64], model: &DataModel, act: &Activation, n_mc: usize, rng: &mut Rng) -> Result<Vec<McEstimate>> {
    let d = model.dim();
    if w.len() != d {
        return Err(Error::ShapeMismatch { expected: d, got: w.len() });
    }
    if n_mc < 2 {
        return Err(Error::Config("need at least two Monte Carlo samples".into()));
    }
    const CHUNK: usize = 4096;
    let mut sum = vec![0.0; d];
    let mut sum_sq = vec![0.0; d];
    let mut done = 0;
    while done < n_mc {
        let len = CHUNK.min(n_mc - done);
        let batch = model.sample(len, rng);
        for r in 0..len {
            let x = batch.row(r);
            let g = batch.y[r] * act.derivative(crate::linalg::dot(w, x));
            if g == 0.0 {
                continue;
            }
            for j in 0..d {
                let v = g * x[j];
                sum[j] += v;
                sum_sq[j] += v * v;
            }
        }
        done += len;
    }
    let n = n_mc as f64;
    Ok(sum
        .iter()
        .zip(&sum_sq)
        .map(|(s, q)| {
            let mean = s / n;
            let var = ((q / n - mean * mean) * n / (n - 1.0)).max(0.0);
            McEstimate { mean, std_err: (var / n).sqrt() }
        })
        .collect())
}

/// Single-coordinate variant of [`population_gradient_mc_all`].
pub fn population_gradient_mc(w: &[f64], model: &DataModel, act: &Activation, j: usize, n_mc: usize, rng: &mut Rng) -> Result<McEstimate> {
    if j >= model.dim() {
        return Err(Error::ShapeMismatch { expected: model.dim(), got: j });
    }
    let d = model.dim();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut done = 0;
    while done < n_mc {
        let len = 4096.min(n_mc - done);
        let batch = model.sample(len, rng);
        for r in 0..len {
            let x = &batch.x[r * d..(r + 1) * d];
            let v = batch.y[r] * act.derivative(crate::linalg::dot(w, x)) * x[j];
            sum += v;
            sum_sq += v * v;
        }
        done += len;
    }
    let n = n_mc as f64;
    let mean = sum / n;
    let var = ((sum_sq / n - mean * mean) * n / (n - 1.0).max(1.0)).max(0.0);
    Ok(McEstimate { mean, std_err: (var / n).sqrt() })
}

/// Envelope `c1 |w| + c2 w² + c3 √(log d / d)` for the gap between the
/// Monte Carlo gradient and `m_j α_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationEnvelope {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub dim: usize,
}

impl DeviationEnvelope {
    pub fn bound(&self, w: f64) -> f64 {
        let d = self.dim as f64;
        self.c1 * w.abs() + self.c2 * w * w + self.c3 * (d.ln() / d).sqrt()
    }

    /// Nonnegative least-squares fit of `|diff|` on the three envelope terms,
    /// scaled up until at least `coverage` of the fitted points satisfy
    /// `|diff| ≤ 3·se + bound(w)`.
    pub fn fit(w: &[f64], diff: &[f64], std_err: &[f64], dim: usize, coverage: f64) -> Self {
        let d = dim as f64;
        let term = (d.ln() / d).sqrt();
        let rows = w.len();
        let design: Vec<[f64; 3]> = w.iter().map(|&x| [x.abs(), x * x, term]).collect();
        let target: Vec<f64> = diff.iter().map(|v| v.abs()).collect();
        let mut best = [0.0; 3];
        let mut best_sse = f64::INFINITY;
        for mask in 1usize..8 {
            let cols: Vec<usize> = (0..3).filter(|c| mask >> c & 1 == 1).collect();
            let flat: Vec<f64> = design.iter().flat_map(|r| cols.iter().map(move |&c| r[c])).collect();
            let coef = crate::linalg::least_squares(&flat, rows, cols.len(), &target);
            if coef.iter().any(|&c| c < 0.0 || !c.is_finite()) {
                continue;
            }
            let mut full = [0.0; 3];
            for (k, &c) in cols.iter().enumerate() {
                full[c] = coef[k];
            }
            let sse: f64 = design
                .iter()
                .zip(&target)
                .map(|(r, t)| {
                    let e = t - (full[0] * r[0] + full[1] * r[1] + full[2] * r[2]);
                    e * e
                })
                .sum();
            if sse < best_sse {
                best_sse = sse;
                best = full;
            }
        }
        let mut env = DeviationEnvelope { c1: best[0], c2: best[1], c3: best[2], dim };
        if env.c1 + env.c2 + env.c3 == 0.0 {
            env.c3 = target.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE) / term;
        }
        let needed = (coverage * rows as f64).ceil() as usize;
        for _ in 0..200 {
            if env.coverage(w, diff, std_err) >= needed {
                break;
            }
            env.c1 *= 1.1;
            env.c2 *= 1.1;
            env.c3 *= 1.1;
        }
        env
    }

    /// Number of points with `|diff| ≤ 3·se + bound(w)`.
    pub fn coverage(&self, w: &[f64], diff: &[f64], std_err: &[f64]) -> usize {
        w.iter().zip(diff).zip(std_err).filter(|((&w, &e), &se)| e.abs() <= 3.0 * se + self.bound(w)).count()
    }
}

/// Sorted, deduplicated values of `u(s) = s·α̃` over the cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionGrid {
    pub alpha_tilde: Vec<f64>,
    /// Distinct values `u_1 < … < u_M`.
    pub values: Vec<f64>,
    /// Smallest adjacent gap; `+∞` when `M = 1`.
    pub gap: f64,
    /// Grid index of every sign pattern.
    pub index_of: Vec<usize>,
}

impl ProjectionGrid {
    pub fn from_scaled(alpha_tilde: Vec<f64>, tol: f64) -> Self {
        let n = alpha_tilde.len();
        let len = 1usize << n;
        let u: Vec<f64> = (0..len).map(|p| (0..n).map(|i| sign_at(p, i) * alpha_tilde[i]).sum()).collect();
        let mut order: Vec<usize> = (0..len).collect();
        order.sort_by(|&a, &b| u[a].total_cmp(&u[b]));
        let mut values: Vec<f64> = Vec::new();
        let mut index_of = vec![0; len];
        for &p in &order {
            match values.last() {
                Some(&last) if (u[p] - last).abs() <= tol => {}
                _ => values.push(u[p]),
            }
            index_of[p] = values.len() - 1;
        }
        let gap = values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        ProjectionGrid { alpha_tilde, values, gap, index_of }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_bits(&self) -> usize {
        self.alpha_tilde.len()
    }

    pub fn projection(&self, pattern: usize) -> f64 {
        self.values[self.index_of[pattern]]
    }
}

/// Grid for `α̃_i = γ τ α_i v_i`.
pub fn projection_grid(alpha: &[f64], v: &[f64], gamma: f64, tau: f64) -> Result<ProjectionGrid> {
    if alpha.len() != v.len() {
        return Err(Error::ShapeMismatch { expected: alpha.len(), got: v.len() });
    }
    let scaled = alpha.iter().zip(v).map(|(a, vi)| gamma * tau * a * vi).collect();
    Ok(ProjectionGrid::from_scaled(scaled, DEFAULT_DEDUP_TOL))
}

/// True when no grid value carries two different labels.
pub fn projection_consistent(f: &BooleanFunction, grid: &ProjectionGrid) -> bool {
    grid_labels(f, grid).is_ok()
}

/// Label `F_m` attached to each grid value.
pub fn grid_labels(f: &BooleanFunction, grid: &ProjectionGrid) -> Result<Vec<f64>> {
    if f.n() != grid.n_bits() {
        return Err(Error::ShapeMismatch { expected: grid.n_bits(), got: f.n() });
    }
    let mut labels: Vec<Option<f64>> = vec![None; grid.len()];
    for (p, &m) in grid.index_of.iter().enumerate() {
        let y = f.eval(p);
        match labels[m] {
            Some(prev) if (prev - y).abs() > LABEL_TOL => return Err(Error::NotProjectionConsistent),
            Some(_) => {}
            None => labels[m] = Some(y),
        }
    }
    Ok(labels.into_iter().map(|l| l.expect("every grid value has a pattern")).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub a_star: Vec<f64>,
    pub biases: Vec<f64>,
    /// `max_s |f(s) - Σ_h a*_h σ(u(s) + b_h)|`.
    pub residual: f64,
    pub norm2: f64,
    pub norm_inf: f64,
    /// Condition estimate of the (row-equilibrated) Gram matrix, when one was
    /// formed.
    pub condition: Option<f64>,
}

impl Certificate {
    /// `Σ_h a*_h σ(t + b_h)`.
    pub fn eval(&self, act: &Activation, t: f64) -> f64 {
        self.a_star.iter().zip(&self.biases).map(|(a, b)| a * act.eval(t + b)).sum()
    }

    /// Network whose hidden units all share the first-layer row `w`.
    pub fn into_net(&self, w: &[f64], act: &Activation) -> Result<TwoLayerNet> {
        let n = self.a_star.len();
        let rows = w.iter().copied().cycle().take(n * w.len()).collect();
        TwoLayerNet::new(n, w.len(), rows, self.a_star.clone(), self.biases.clone(), act.clone())
    }
}

fn residual_on_grid(values: &[f64], labels: &[f64], a: &[f64], biases: &[f64], act: &Activation) -> f64 {
    values
        .iter()
        .zip(labels)
        .map(|(&u, &y)| {
            let out: f64 = a.iter().zip(biases).map(|(a, b)| a * act.eval(u + b)).sum();
            (y - out).abs()
        })
        .fold(0.0, f64::max)
}

/// Minimum-norm `a*` with `Σ_h a*_h σ(u_m + b_h) = F_m` on every grid value,
/// `a* = Φᵀ(ΦΦᵀ)⁻¹F`. Rows of `Φ` are equilibrated before the Gram matrix is
/// formed (this leaves the solution unchanged) and one step of iterative
/// refinement is applied.
pub fn build_certificate(grid: &ProjectionGrid, f: &BooleanFunction, biases: &[f64], act: &Activation) -> Result<Certificate> {
    let labels = grid_labels(f, grid)?;
    let m = grid.len();
    let n = biases.len();
    let mut phi = vec![0.0; m * n];
    let mut scale = vec![0.0; m];
    for (r, &u) in grid.values.iter().enumerate() {
        let row = &mut phi[r * n..(r + 1) * n];
        for (v, b) in row.iter_mut().zip(biases) {
            *v = act.eval(u + b);
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::RankDeficient { condition: f64::INFINITY });
        }
        row.iter_mut().for_each(|v| *v /= norm);
        scale[r] = 1.0 / norm;
    }
    let mut gram = vec![0.0; m * m];
    crate::linalg::gemm(m, n, m, 1.0, &phi, (n, 1), &phi, (1, n), 0.0, &mut gram, (m, 1));
    let eig = jacobi_eigen(&gram, m, 1e-14, JACOBI_MAX_SWEEPS)?;
    let max = eig.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.values.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(Error::RankDeficient { condition });
    }
    let l = cholesky(&gram, m).ok_or(Error::RankDeficient { condition })?;
    let rhs: Vec<f64> = labels.iter().zip(&scale).map(|(y, s)| y * s).collect();
    let solve = |rhs: &[f64]| -> Vec<f64> {
        let z = cholesky_solve(&l, m, rhs);
        (0..n).map(|h| (0..m).map(|r| phi[r * n + h] * z[r]).sum()).collect()
    };
    let mut a = solve(&rhs);
    // Iterative refinement on the equilibrated system.
    for _ in 0..2 {
        let resid: Vec<f64> = (0..m).map(|r| rhs[r] - crate::linalg::dot(&phi[r * n..(r + 1) * n], &a)).collect();
        let corr = solve(&resid);
        a.iter_mut().zip(&corr).for_each(|(x, c)| *x += c);
    }
    Ok(finish_certificate(grid, &labels, a, biases, act, Some(condition)))
}

fn finish_certificate(grid: &ProjectionGrid, labels: &[f64], a: Vec<f64>, biases: &[f64], act: &Activation, condition: Option<f64>) -> Certificate {
    let residual = residual_on_grid(&grid.values, labels, &a, biases, act);
    let norm2 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let norm_inf = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Certificate { a_star: a, biases: biases.to_vec(), residual, norm2, norm_inf, condition }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangularCertificate {
    pub certificate: Certificate,
    /// Hidden unit chosen for each grid value.
    pub selected: Vec<usize>,
    /// `2 max|f| / Δ`.
    pub bound: f64,
}

impl TriangularCertificate {
    pub fn within_bound(&self) -> bool {
        self.certificate.norm_inf <= self.bound
    }
}

/// ReLU certificate from one bias per interval `I_j = [-u_j + δ'/2, -u_j + δ']`,
/// `δ' = width_fraction · Δ` with `width_fraction ∈ (0, ½)`. The matrix
/// `M_{lj} = ReLU(u_l + b_j)` is lower triangular with positive diagonal and
/// is solved by forward substitution; unselected units get `a = 0`.
pub fn build_certificate_triangular(grid: &ProjectionGrid, f: &BooleanFunction, biases: &[f64], width_fraction: f64) -> Result<TriangularCertificate> {
    if !(width_fraction > 0.0 && width_fraction < 0.5) {
        return Err(Error::Config(format!("interval width fraction {width_fraction} must lie in (0, 1/2)")));
    }
    let labels = grid_labels(f, grid)?;
    let m = grid.len();
    let sup = labels.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let gap = if m > 1 { grid.gap } else { 1.0 };
    let width = width_fraction * gap;
    let mut selected = Vec::with_capacity(m);
    let mut missing = 0;
    for &u in &grid.values {
        let lo = -u + width / 2.0;
        let hi = -u + width;
        match biases.iter().position(|&b| b >= lo && b <= hi) {
            Some(h) => selected.push(h),
            None => missing += 1,
        }
    }
    if missing > 0 {
        return Err(Error::UnhitIntervals { missing });
    }
    let mut c = vec![0.0; m];
    for l in 0..m {
        let mut s = labels[l];
        for j in 0..l {
            s -= (grid.values[l] + biases[selected[j]]).max(0.0) * c[j];
        }
        c[l] = s / (grid.values[l] + biases[selected[l]]);
    }
    let mut a = vec![0.0; biases.len()];
    for (j, &h) in selected.iter().enumerate() {
        a[h] = c[j];
    }
    let certificate = finish_certificate(grid, &labels, a, biases, &Activation::Relu, None);
    Ok(TriangularCertificate { certificate, selected, bound: 2.0 * sup / gap })
}

/// First-layer row after one population-gradient step from `w0`:
/// `w¹_j = w⁰_j + η m_j α_{c(j)}`.
pub fn warm_start_row(w0: &[f64], alpha: &[f64], model: &DataModel, eta: f64) -> Result<Vec<f64>> {
    if w0.len() != model.dim() {
        return Err(Error::ShapeMismatch { expected: model.dim(), got: w0.len() });
    }
    Ok(w0
        .iter()
        .zip(model.noise())
        .enumerate()
        .map(|(j, (w, law))| w + eta * law.mean() * alpha[model.partition().cluster_of(j)])
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    /// Per-trial `min_{f(t) ≠ f(y)} |α·(t - y)|`; `+∞` for constant targets.
    pub gaps: Vec<f64>,
    /// `(q, quantile)` for `q ∈ {0.05, 0.25, 0.5, 0.75, 0.95}`.
    pub quantiles: Vec<(f64, f64)>,
}

impl ProbeReport {
    pub fn fraction_below(&self, eps: f64) -> f64 {
        self.gaps.iter().filter(|&&g| g < eps).count() as f64 / self.gaps.len().max(1) as f64
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["trial", "gap"])?;
        for (t, g) in self.gaps.iter().enumerate() {
            w.write_record([t.to_string(), g.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if sorted[hi].is_infinite() || sorted[lo].is_infinite() {
        return sorted[if frac > 0.0 { hi } else { lo }];
    }
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Distribution over Gaussian initializations `w ~ N(0, I/d)` of the label
/// margin of `s ↦ α(w)·s`.
pub fn anti_concentration_probe(model: &DataModel, act: &Activation, f: &BooleanFunction, trials: usize, rng: &mut Rng) -> Result<ProbeReport> {
    if trials == 0 {
        return Err(Error::Config("probe needs at least one trial".into()));
    }
    let model = model.with_target(f.clone())?;
    let d = model.dim();
    let sd = 1.0 / (d as f64).sqrt();
    let n = model.n_clusters();
    let mut gaps = Vec::with_capacity(trials);
    for _ in 0..trials {
        let w: Vec<f64> = (0..d).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
        let alpha = alpha_population(&w, &model, act)?.alpha;
        let u: Vec<f64> = (0..1usize << n).map(|p| (0..n).map(|i| sign_at(p, i) * alpha[i]).sum()).collect();
        gaps.push(min_label_separation(&u, f.values()));
    }
    let mut sorted = gaps.clone();
    sorted.sort_by(f64::total_cmp);
    let quantiles = [0.05, 0.25, 0.5, 0.75, 0.95].iter().map(|&q| (q, quantile(&sorted, q))).collect();
    Ok(ProbeReport { gaps, quantiles })
}

/// `s_k² = a^k Σ_{r=0}^{⌊(M-k)/2⌋} [((k+2r)!/k!) ((μ/2)^r / r!)]²`.
pub fn hermite_coeff_variance(k: usize, a: f64, mu: f64, m: usize) -> Result<f64> {
    if k > m {
        return Err(Error::Config(format!("order {k} exceeds expansion degree {m}")));
    }
    let mut total = 0.0;
    for r in 0..=(m - k) / 2 {
        let falling: f64 = ((k + 1)..=(k + 2 * r)).map(|i| i as f64).product();
        let r_fact: f64 = (1..=r).map(|i| i as f64).product();
        let term = falling * (mu / 2.0).powi(r as i32) / r_fact;
        total += term * term;
    }
    Ok(a.powi(k as i32) * total)
}

/// `(N + 1) √(2/π) τ / s_min`.
pub fn small_ball_bound(n_bits: usize, tau: f64, s_min: f64) -> f64 {
    (n_bits as f64 + 1.0) * (2.0 / std::f64::consts::PI).sqrt() * tau / s_min
}

/// Monomial coefficients of the probabilists' Hermite polynomial `He_n`.
pub fn hermite_monomials(n: usize) -> Vec<f64> {
    let mut prev = vec![1.0];
    if n == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 1.0];
    for k in 1..n {
        // He_{k+1} = x He_k - k He_{k-1}
        let mut next = vec![0.0; k + 2];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += c;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= k as f64 * c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// Monomial coefficients of `Σ_n coeffs[n] a^{n/2} He_n(x/√a)`.
pub fn hermite_series_monomials(coeffs: &[f64], a: f64) -> Vec<f64> {
    let mut out = vec![0.0; coeffs.len().max(1)];
    for (n, &c) in coeffs.iter().enumerate() {
        // a^{n/2} He_n(x/√a) = Σ_i h_i a^{(n-i)/2} x^i; only i ≡ n (mod 2) survive.
        for (i, h) in hermite_monomials(n).iter().enumerate() {
            if *h != 0.0 {
                out[i] += c * h * a.powf((n - i) as f64 / 2.0);
            }
        }
    }
    out
}

/// `β_k = (1/k!) E_X[ψ(√a X) He_k(X)]` for a polynomial `ψ`, by quadrature.
pub fn hermite_projection(psi: &[f64], a: f64, k: usize, rule: &GaussHermite) -> f64 {
    let he = hermite_monomials(k);
    let k_fact: f64 = (1..=k).map(|i| i as f64).product();
    rule.expect(1.0, |x| horner(psi, a.sqrt() * x) * horner(&he, x)) / k_fact
}

/// `β_0..β_max_k` of the smoothed derivative `ψ_μ = E[σ'(· + G)]`, where
/// `σ'` has Hermite coefficients `coeffs` in the variance-`a` basis.
pub fn smoothed_hermite_projections(coeffs: &[f64], a: f64, mu: f64, max_k: usize, rule: &GaussHermite) -> Vec<f64> {
    let sigma_prime = hermite_series_monomials(coeffs, a);
    let psi = smooth_polynomial(&sigma_prime, mu);
    (0..=max_k).map(|k| hermite_projection(&psi, a, k, rule)).collect()
}

/// Noise-model variance helper used by probes: `τ_j²` of every coordinate.
pub fn noise_variances(model: &DataModel) -> Vec<f64> {
    model.noise().iter().map(NoiseLaw::variance).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolean::{named_target, NamedTarget};
    use crate::latent_data::make_bsc_model;
    use crate::rng::seeded;

    fn brute_alpha_homogeneous(f: &BooleanFunction, delta: f64) -> Vec<f64> {
        let n = f.n();
        let len = 1usize << n;
        (0..n)
            .map(|i| {
                (0..len)
                    .map(|p| {
                        let total: f64 = (0..n).map(|l| sign_at(p, l)).sum();
                        let ind = if (1.0 - 2.0 * delta) * total > 0.0 { 1.0 } else { 0.0 };
                        f.eval(p) * sign_at(p, i) * ind
                    })
                    .sum::<f64>()
                    / len as f64
            })
            .collect()
    }

    #[test]
    fn alpha_homogeneous_matches_cube_sum() {
        let dict = named_target(NamedTarget::Dictator, 3).unwrap();
        assert_eq!(alpha_homogeneous(&dict, 0.1).unwrap().alpha, vec![0.5, 0.0, 0.0]);
        let parity = named_target(NamedTarget::Parity, 3).unwrap();
        assert_eq!(alpha_homogeneous(&parity, 0.1).unwrap().alpha, vec![0.0; 3]);
        let mut rng = seeded(2);
        for n in [1, 3, 5] {
            let maj = named_target(NamedTarget::Majority, n).unwrap();
            let rand_f = BooleanFunction::from_table(n, (0..1 << n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            for f in [maj, rand_f] {
                for delta in [0.0, 0.2, 0.5, 0.7, 1.0] {
                    let got = alpha_homogeneous(&f, delta).unwrap().alpha;
                    let want = brute_alpha_homogeneous(&f, delta);
                    for (g, w) in got.iter().zip(&want) {
                        assert!((g - w).abs() < 1e-12, "n={n} delta={delta}");
                    }
                }
            }
        }
        let maj3 = named_target(NamedTarget::Majority, 3).unwrap();
        assert_eq!(alpha_homogeneous(&maj3, 0.1).unwrap().alpha, vec![0.25; 3]);
    }

    #[test]
    fn alpha_population_linear_is_degree_one_fourier() {
        let lin = Activation::polynomial(vec![0.3, 1.0]).unwrap();
        let mut rng = seeded(8);
        let f = BooleanFunction::from_table(3, (0..8).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let model = make_bsc_model(3, 9, 0.15, f.clone()).unwrap();
        let w: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let alpha = alpha_population(&w, &model, &lin).unwrap();
        for i in 0..3 {
            assert!((alpha.alpha[i] - f.coefficient(1 << i)).abs() < 1e-14);
        }
    }

    #[test]
    fn alpha_population_relu_single_bit() {
        // N = 1 with Δ = Σ m_j w_j, V² = Σ w_j² τ_j², r = Δ/V:
        // f(s) = s gives E_s[Φ(s r)] = ½; f ≡ 1 gives E_s[s Φ(s r)] = Φ(r) - ½.
        for (d, delta) in [(100, 0.2), (4, 0.4)] {
            let m = 1.0 - 2.0 * delta;
            let var = d as f64 * 0.01 * 4.0 * delta * (1.0 - delta);
            let r = d as f64 * 0.1 * m / var.sqrt();
            let w = vec![0.1; d];
            let model = make_bsc_model(1, d, delta, named_target(NamedTarget::Dictator, 1).unwrap()).unwrap();
            let alpha = alpha_population(&w, &model, &Activation::Relu).unwrap();
            assert!((alpha.alpha[0] - 0.5).abs() < 1e-14);
            assert!((alpha.variance - var).abs() < 1e-12);
            let model = model.with_target(BooleanFunction::from_table(1, vec![1.0, 1.0]).unwrap()).unwrap();
            let alpha = alpha_population(&w, &model, &Activation::Relu).unwrap();
            let want = crate::network::normal_cdf(r) - 0.5;
            assert!((alpha.alpha[0] - want).abs() < 1e-14, "{} vs {want}", alpha.alpha[0]);
        }
    }

    #[test]
    fn grid_examples() {
        let g = ProjectionGrid::from_scaled(vec![1.0, 2.0, 4.0], DEFAULT_DEDUP_TOL);
        assert_eq!(g.values, vec![-7.0, -5.0, -3.0, -1.0, 1.0, 3.0, 5.0, 7.0]);
        assert_eq!(g.gap, 2.0);
        let parity = named_target(NamedTarget::Parity, 3).unwrap();
        assert!(projection_consistent(&parity, &g));
        let g = ProjectionGrid::from_scaled(vec![1.0, 1.0, 0.0], DEFAULT_DEDUP_TOL);
        assert!(!projection_consistent(&parity, &g));
        let constant = named_target(NamedTarget::Constant, 3).unwrap();
        let g = ProjectionGrid::from_scaled(vec![0.0; 3], DEFAULT_DEDUP_TOL);
        assert_eq!(g.len(), 1);
        assert!(g.gap.is_infinite());
        assert!(projection_consistent(&constant, &g));
        let g = projection_grid(&[0.5, 1.0, 2.0], &[2.0, 2.0, 2.0], 0.5, 2.0).unwrap();
        assert_eq!(g.alpha_tilde, vec![1.0, 2.0, 4.0]);
    }

    #[test]
    fn certificate_constant_target() {
        let constant = named_target(NamedTarget::Constant, 3).unwrap();
        let g = ProjectionGrid::from_scaled(vec![0.0; 3], DEFAULT_DEDUP_TOL);
        let c = build_certificate(&g, &constant, &[0.5], &Activation::Relu).unwrap();
        assert!(c.residual <= 1e-12);
        assert!((c.a_star[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn certificate_rank_deficiency_is_reported() {
        let parity = named_target(NamedTarget::Parity, 3).unwrap();
        let g = ProjectionGrid::from_scaled(vec![1.0, 2.0, 4.0], DEFAULT_DEDUP_TOL);
        // Two biases cannot interpolate eight values.
        let err = build_certificate(&g, &parity, &[0.1, 0.2], &Activation::truncated_exp(8)).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }));
        let err = build_certificate(&ProjectionGrid::from_scaled(vec![1.0, 1.0, 0.0], 1e-12), &parity, &[0.1; 8], &Activation::Relu).unwrap_err();
        assert!(matches!(err, Error::NotProjectionConsistent));
    }

    #[test]
    fn triangular_two_point_hand_solve() {
        // Grid (-1, 1), labels (0, 2): Δ = 2, δ' = 0.9 → I_1 = [1.45, 1.9], I_2 = [-0.55, -0.1].
        let f = BooleanFunction::from_table(1, vec![2.0, 0.0]).unwrap();
        let g = ProjectionGrid::from_scaled(vec![1.0], DEFAULT_DEDUP_TOL);
        assert_eq!(g.values, vec![-1.0, 1.0]);
        let biases = [1.8, -0.2, 5.0];
        let t = build_certificate_triangular(&g, &f, &biases, 0.45).unwrap();
        assert_eq!(t.selected, vec![0, 1]);
        // M = [[0.8, 0], [2.8, 0.8]]: c1 = 0, c2 = 2/0.8.
        assert!(t.certificate.a_star[0].abs() < 1e-15);
        assert!((t.certificate.a_star[1] - 2.5).abs() < 1e-12);
        assert_eq!(t.certificate.a_star[2], 0.0);
        assert!(t.certificate.residual < 1e-12);
        let err = build_certificate_triangular(&g, &f, &[5.0], 0.45).unwrap_err();
        assert!(matches!(err, Error::UnhitIntervals { missing: 2 }));
    }

    #[test]
    fn hermite_variance_examples() {
        assert_eq!(hermite_coeff_variance(4, 3.0, 1.0, 4).unwrap(), 81.0);
        assert!((hermite_coeff_variance(0, 1.0, 1.0, 2).unwrap() - 2.0).abs() < 1e-15);
        for k in 0..4 {
            let mut prev = 0.0;
            for m in k..12 {
                let v = hermite_coeff_variance(k, 1.3, 0.7, m).unwrap();
                assert!(v >= prev);
                prev = v;
            }
        }
        assert!(hermite_coeff_variance(3, 1.0, 1.0, 2).is_err());
    }

    #[test]
    fn hermite_projection_recovers_linear_map() {
        // β_k is linear in the Hermite coefficients with the closed-form weights.
        let rule = GaussHermite::new(24);
        let (a, mu, m) = (1.7, 0.6, 7);
        for n in 0..=m {
            let mut coeffs = vec![0.0; m + 1];
            coeffs[n] = 1.0;
            let beta = smoothed_hermite_projections(&coeffs, a, mu, 3, &rule);
            for (k, b) in beta.iter().enumerate() {
                let want = if n >= k && (n - k) % 2 == 0 {
                    let r = (n - k) / 2;
                    let falling: f64 = ((k + 1)..=n).map(|i| i as f64).product();
                    let r_fact: f64 = (1..=r).map(|i| i as f64).product();
                    a.powf(k as f64 / 2.0) * falling * (mu / 2.0).powi(r as i32) / r_fact
                } else {
                    0.0
                };
                assert!((b - want).abs() < 1e-9 * want.abs().max(1.0), "n={n} k={k}: {b} vs {want}");
            }
        }
    }

    #[test]
    fn hermite_monomials_low_orders() {
        assert_eq!(hermite_monomials(0), vec![1.0]);
        assert_eq!(hermite_monomials(2), vec![-1.0, 0.0, 1.0]);
        assert_eq!(hermite_monomials(3), vec![0.0, -3.0, 0.0, 1.0]);
        assert_eq!(hermite_monomials(4), vec![3.0, 0.0, -6.0, 0.0, 1.0]);
    }

    #[test]
    fn envelope_fit_covers_requested_fraction() {
        let mut rng = seeded(4);
        let w: Vec<f64> = (0..50).map(|_| rng.random_range(-0.2..0.2)).collect();
        let diff: Vec<f64> = w.iter().map(|x| 0.5 * x.abs() + rng.random_range(-0.01..0.01)).collect();
        let se = vec![0.001; 50];
        let env = DeviationEnvelope::fit(&w, &diff, &se, 400, 0.95);
        assert!(env.coverage(&w, &diff, &se) >= 48);
        assert!(env.c1 > 0.3);
    }

    #[test]
    fn probe_constant_and_linear() {
        let model = make_bsc_model(3, 30, 0.1, named_target(NamedTarget::Parity, 3).unwrap()).unwrap();
        let mut rng = seeded(0);
        let constant = named_target(NamedTarget::Constant, 3).unwrap();
        let rep = anti_concentration_probe(&model, &Activation::truncated_exp(8), &constant, 10, &mut rng).unwrap();
        assert!(rep.gaps.iter().all(|g| g.is_infinite()));
        let dict = named_target(NamedTarget::Dictator, 3).unwrap();
        let lin = Activation::polynomial(vec![0.0, 1.0]).unwrap();
        let rep = anti_concentration_probe(&model, &lin, &dict, 10, &mut rng).unwrap();
        assert!(rep.gaps.iter().all(|&g| (g - 2.0).abs() < 1e-14));
    }
}

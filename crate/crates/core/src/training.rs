//! Layerwise SGD (one first-layer step with the output layer frozen, then the
//! convex output-layer phase on frozen random biases) and plain joint SGD.
//! Every step draws a fresh batch from the data model.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent_data::{signal_stats, Batch, DataModel};
use crate::linalg::gemm;
use crate::network::{init_deterministic, init_layerwise, init_uniform, Activation, TwoLayerNet};
use crate::rng::{stream, Phase, Rng};

/// A run is declared divergent once its batch loss exceeds this multiple of
/// the first batch loss.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

/// Rows per chunk when evaluating on large test sets.
const EVAL_CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// `W_{hj} ~ N(0, 1/d)`.
    #[default]
    Gaussian,
    /// Every `W_{hj} = 1/√d`.
    Deterministic,
}

/// Layerwise SGD settings. Unset values fall back to [`theory_scalings`]
/// (`tau`, `gamma1`, `batch_size`) or are picked at the start of phase 2
/// (`bias_range`, `gamma2`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayerwiseConfig {
    pub n: usize,
    /// Output-layer initial value (also called the init scale κ).
    pub tau: Option<f64>,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
    pub t1: usize,
    pub t2: usize,
    pub batch_size: Option<usize>,
    /// Biases are drawn from `U[-A, A]`.
    pub bias_range: Option<f64>,
    pub average_iterates: bool,
    pub activation: Activation,
    pub init: InitScheme,
    pub eval_every: usize,
    pub test_size: usize,
}

impl Default for LayerwiseConfig {
    fn default() -> Self {
        LayerwiseConfig {
            n: 64,
            tau: None,
            gamma1: None,
            gamma2: None,
            t1: 1,
            t2: 2000,
            batch_size: None,
            bias_range: None,
            average_iterates: false,
            activation: Activation::truncated_exp(8),
            init: InitScheme::Gaussian,
            eval_every: 100,
            test_size: 10_000,
        }
    }
}

impl LayerwiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.t1 == 0 || self.eval_every == 0 || self.test_size == 0 {
            return Err(Error::Config("layerwise: n, t1, eval_every and test_size must be positive".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("layerwise: batch_size must be positive".into()));
        }
        for (name, v) in [("tau", self.tau), ("gamma1", self.gamma1), ("gamma2", self.gamma2), ("bias_range", self.bias_range)] {
            if let Some(v) = v {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Config(format!("layerwise: {name} must be finite and nonnegative")));
                }
            }
        }
        self.activation.validate()
    }
}

/// Joint SGD on all parameters with the mean squared error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JointConfig {
    pub n: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_steps: usize,
    pub eval_every: usize,
    /// Stop once the test MSE drops below this value.
    pub threshold: Option<f64>,
    pub test_size: usize,
    pub activation: Activation,
}

impl Default for JointConfig {
    fn default() -> Self {
        JointConfig {
            n: 256,
            batch_size: 64,
            learning_rate: 1e-3,
            max_steps: 100_000,
            eval_every: 50,
            threshold: Some(0.05),
            test_size: 10_000,
            activation: Activation::Relu,
        }
    }
}

impl JointConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.batch_size == 0 || self.eval_every == 0 || self.test_size == 0 {
            return Err(Error::Config("joint: n, batch_size, eval_every and test_size must be positive".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::Config("joint: learning_rate must be finite and nonnegative".into()));
        }
        self.activation.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainerConfig {
    Layerwise(LayerwiseConfig),
    Joint(JointConfig),
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            TrainerConfig::Layerwise(c) => c.validate(),
            TrainerConfig::Joint(c) => c.validate(),
        }
    }

    pub fn test_size(&self) -> usize {
        match self {
            TrainerConfig::Layerwise(c) => c.test_size,
            TrainerConfig::Joint(c) => c.test_size,
        }
    }
}

/// Default layerwise hyperparameters with unit constants:
/// `γ₁ = 1/√v_sum`, `τ = √v_sum/(√d log d)`,
/// `B = ⌈N log(d log(1/ε))² d / v_sum⌉` with `ε = 0.01`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryScalings {
    pub tau: f64,
    pub gamma1: f64,
    pub batch_size: usize,
}

pub const DEFAULT_EPSILON: f64 = 0.01;

pub fn theory_scalings(model: &DataModel) -> Result<TheoryScalings> {
    let st = signal_stats(model);
    if st.v_sum <= 0.0 {
        return Err(Error::Config("theory scalings need a model with nonzero signal".into()));
    }
    let d = model.dim() as f64;
    let log_d = d.ln().max(1.0);
    let tau = st.v_sum.sqrt() / (d.sqrt() * log_d);
    let gamma1 = 1.0 / st.v_sum.sqrt();
    let l = (d * (1.0 / DEFAULT_EPSILON).ln()).ln();
    let batch = (model.n_clusters() as f64 * l * l * d / st.v_sum).ceil().max(1.0) as usize;
    Ok(TheoryScalings { tau, gamma1, batch_size: batch })
}

/// Independent generator streams for one training run.
#[derive(Debug, Clone)]
pub struct TrainStreams {
    pub init: Rng,
    pub first: Rng,
    pub second: Rng,
    pub biases: Rng,
    pub test: Rng,
}

impl TrainStreams {
    pub fn new(seed: u64, trial: u64) -> Self {
        TrainStreams {
            init: stream(seed, trial, Phase::Init),
            first: stream(seed, trial, Phase::FirstLayer),
            second: stream(seed, trial, Phase::SecondLayer),
            biases: stream(seed, trial, Phase::Biases),
            test: stream(seed, trial, Phase::TestSet),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub samples: usize,
    pub mse: f64,
    pub abs_err: f64,
    /// Sign accuracy, only for `±1`-valued targets.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    ReachedThreshold,
    Diverged { step: usize, loss: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<EvalPoint>,
    pub outcome: Outcome,
    pub samples_consumed: usize,
    pub net: TwoLayerNet,
}

impl TrainTrace {
    pub fn final_point(&self) -> Option<&EvalPoint> {
        self.records.last()
    }

    /// First recorded sample count whose test MSE is below `threshold`.
    pub fn first_below(&self, threshold: f64) -> Option<usize> {
        self.records.iter().find(|r| r.mse < threshold).map(|r| r.samples)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["samples", "mse", "abs_err", "acc"])?;
        for r in &self.records {
            w.write_record([
                r.samples.to_string(),
                r.mse.to_string(),
                r.abs_err.to_string(),
                r.accuracy.map(|a| a.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Which squared loss a gradient refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossScale {
    /// `½ mean (y - ŷ)²`, the layerwise convention.
    Half,
    /// `mean (y - ŷ)²`, the joint-SGD convention.
    Mean,
}

impl LossScale {
    fn factor(self) -> f64 {
        match self {
            LossScale::Half => 1.0,
            LossScale::Mean => 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl Gradients {
    pub fn is_finite(&self) -> bool {
        self.w.iter().chain(&self.a).chain(&self.b).all(|v| v.is_finite())
    }
}

/// `Z = X Wᵀ + b` for `rows` inputs stored row-major in `x`.
pub fn pre_activations(net: &TwoLayerNet, x: &[f64], rows: usize, z: &mut Vec<f64>) {
    let (n, d) = (net.n, net.d);
    z.clear();
    z.resize(rows * n, 0.0);
    gemm(rows, d, n, 1.0, x, (d, 1), &net.w, (1, d), 0.0, z, (n, 1));
    for zr in z.chunks_exact_mut(n) {
        for (v, b) in zr.iter_mut().zip(&net.b) {
            *v += b;
        }
    }
}

/// Hidden-layer outputs `σ(X Wᵀ + b)`, row-major `rows x n`.
pub fn hidden_features(net: &TwoLayerNet, x: &[f64], rows: usize) -> Vec<f64> {
    let mut z = Vec::new();
    pre_activations(net, x, rows, &mut z);
    for v in z.iter_mut() {
        *v = net.activation.eval(*v);
    }
    z
}

/// Batched outputs through the matrix-product path.
pub fn predict(net: &TwoLayerNet, x: &[f64], rows: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows);
    let mut z = Vec::new();
    for start in (0..rows).step_by(EVAL_CHUNK) {
        let len = EVAL_CHUNK.min(rows - start);
        pre_activations(net, &x[start * net.d..(start + len) * net.d], len, &mut z);
        for zr in z.chunks_exact(net.n) {
            out.push(zr.iter().zip(&net.a).map(|(&v, a)| a * net.activation.eval(v)).sum());
        }
    }
    out
}

/// Test metrics of `net` on a held-out batch.
pub fn evaluate(net: &TwoLayerNet, test: &Batch, sign_target: bool, samples: usize) -> EvalPoint {
    let pred = predict(net, &test.x, test.len());
    let len = test.len().max(1) as f64;
    let mut mse = 0.0;
    let mut abs_err = 0.0;
    let mut correct = 0usize;
    for (p, y) in pred.iter().zip(&test.y) {
        let e = y - p;
        mse += e * e;
        abs_err += e.abs();
        if (*p >= 0.0) == (*y >= 0.0) {
            correct += 1;
        }
    }
    EvalPoint { samples, mse: mse / len, abs_err: abs_err / len, accuracy: sign_target.then(|| correct as f64 / len) }
}

/// Loss and full gradient on a batch; `x` is row-major `y.len() x d`.
pub fn loss_and_grad(net: &TwoLayerNet, x: &[f64], y: &[f64], scale: LossScale) -> (f64, Gradients) {
    let (n, d) = (net.n, net.d);
    let rows = y.len();
    let mut z = Vec::new();
    pre_activations(net, x, rows, &mut z);
    let mut ga = vec![0.0; n];
    let mut gb = vec![0.0; n];
    let mut loss = 0.0;
    let c = scale.factor() / rows as f64;
    // z becomes dL/dz in place.
    let mut h = vec![0.0; n];
    for (r, zr) in z.chunks_exact_mut(n).enumerate() {
        let mut out = 0.0;
        for k in 0..n {
            let (s, ds) = net.activation.eval_with_derivative(zr[k]);
            h[k] = s;
            zr[k] = ds;
            out += net.a[k] * s;
        }
        let e = y[r] - out;
        loss += e * e;
        let g_out = -c * e;
        for k in 0..n {
            ga[k] += g_out * h[k];
            zr[k] *= g_out * net.a[k];
            gb[k] += zr[k];
        }
    }
    let mut gw = vec![0.0; n * d];
    gemm(n, rows, d, 1.0, &z, (1, n), x, (d, 1), 0.0, &mut gw, (d, 1));
    let loss = loss / rows as f64 * if scale == LossScale::Half { 0.5 } else { 1.0 };
    (loss, Gradients { w: gw, a: ga, b: gb })
}

/// Norm-wise relative error `‖analytic - numeric‖ / ‖numeric‖` per layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub w: f64,
    pub a: f64,
    pub b: f64,
}

impl GradientCheck {
    pub fn max(&self) -> f64 {
        self.w.max(self.a).max(self.b)
    }
}

/// Compares [`loss_and_grad`] with central finite differences of step `h`.
pub fn finite_difference_check(net: &TwoLayerNet, x: &[f64], y: &[f64], scale: LossScale, h: f64) -> GradientCheck {
    let (_, g) = loss_and_grad(net, x, y, scale);
    let mut probe = net.clone();
    let mut numeric = |select: fn(&mut TwoLayerNet) -> &mut Vec<f64>, len: usize| -> Vec<f64> {
        (0..len)
            .map(|k| {
                let orig = select(&mut probe)[k];
                select(&mut probe)[k] = orig + h;
                let plus = loss_and_grad(&probe, x, y, scale).0;
                select(&mut probe)[k] = orig - h;
                let minus = loss_and_grad(&probe, x, y, scale).0;
                select(&mut probe)[k] = orig;
                (plus - minus) / (2.0 * h)
            })
            .collect()
    };
    let nw = numeric(|n| &mut n.w, net.w.len());
    let na = numeric(|n| &mut n.a, net.a.len());
    let nb = numeric(|n| &mut n.b, net.b.len());
    let rel = |an: &[f64], nu: &[f64]| {
        let diff = an.iter().zip(nu).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        let norm = nu.iter().map(|q| q * q).sum::<f64>().sqrt();
        if norm > 0.0 {
            diff / norm
        } else {
            diff
        }
    };
    GradientCheck { w: rel(&g.w, &nw), a: rel(&g.a, &na), b: rel(&g.b, &nb) }
}

/// One first-layer step on a fresh batch of `batch_size` samples with the
/// `½(y - NN)²` loss. Output weights and biases are untouched.
pub fn phase1_step(net: &mut TwoLayerNet, model: &DataModel, batch_size: usize, gamma1: f64, rng: &mut Rng, step: usize) -> Result<()> {
    let batch = model.sample(batch_size, rng);
    let (_, g) = loss_and_grad(net, &batch.x, &batch.y, LossScale::Half);
    if !g.w.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteGradient { step, detail: "first-layer gradient".into() });
    }
    for (w, gw) in net.w.iter_mut().zip(&g.w) {
        *w -= gamma1 * gw;
    }
    Ok(())
}

/// `2 max_h Σ_i |Σ_{j ∈ C_i} m_j w_{hj}|`: twice the largest noiseless
/// pre-activation magnitude over all latent patterns.
pub fn auto_bias_range(net: &TwoLayerNet, model: &DataModel) -> f64 {
    let means = model.means();
    let part = model.partition();
    let mut best: f64 = 0.0;
    for h in 0..net.n {
        let row = net.row(h);
        let total: f64 = (0..part.n_clusters())
            .map(|i| part.members(i).iter().map(|&j| means[j] * row[j]).sum::<f64>().abs())
            .sum();
        best = best.max(total);
    }
    if best > 0.0 {
        2.0 * best
    } else {
        1.0
    }
}

pub fn draw_biases(n: usize, range: f64, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| if range > 0.0 { rng.random_range(-range..=range) } else { 0.0 }).collect()
}

/// Output-layer phase: draws biases once, freezes the first layer and runs
/// `cfg.t2` SGD steps on `a` with fresh batches. `samples_before` offsets the
/// recorded sample counts.
pub fn phase2_train(
    net: &mut TwoLayerNet,
    model: &DataModel,
    cfg: &LayerwiseConfig,
    batch_size: usize,
    streams: &mut TrainStreams,
    test: &Batch,
    samples_before: usize,
) -> Result<TrainTrace> {
    let range = cfg.bias_range.unwrap_or_else(|| auto_bias_range(net, model));
    net.b = draw_biases(net.n, range, &mut streams.biases);
    let sign_target = model.target().is_sign_valued();
    let n = net.n;
    let mut records = Vec::new();
    let mut a_sum = vec![0.0; n];
    let mut gamma2 = cfg.gamma2;
    let mut initial_loss = None;
    let mut outcome = Outcome::Completed;
    let mut steps_done = 0;
    let mut averaged = net.clone();
    for step in 1..=cfg.t2 {
        let batch = model.sample(batch_size, &mut streams.second);
        let phi = hidden_features(net, &batch.x, batch_size);
        let g2 = *gamma2.get_or_insert_with(|| {
            let mean_sq = phi.iter().map(|v| v * v).sum::<f64>() / batch_size as f64;
            if mean_sq > 0.0 {
                0.5 / mean_sq
            } else {
                0.0
            }
        });
        let mut grad = vec![0.0; n];
        let mut loss = 0.0;
        for (r, pr) in phi.chunks_exact(n).enumerate() {
            let e = batch.y[r] - crate::linalg::dot(pr, &net.a);
            loss += e * e;
            for (g, p) in grad.iter_mut().zip(pr) {
                *g += e * p;
            }
        }
        let loss = 0.5 * loss / batch_size as f64;
        let init = *initial_loss.get_or_insert(loss);
        if !loss.is_finite() || loss > DIVERGENCE_FACTOR * init.max(1e-8) {
            outcome = Outcome::Diverged { step, loss };
            break;
        }
        for (a, g) in net.a.iter_mut().zip(&grad) {
            *a += g2 * g / batch_size as f64;
        }
        if !net.a.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteGradient { step, detail: "output-layer update".into() });
        }
        for (s, a) in a_sum.iter_mut().zip(&net.a) {
            *s += a;
        }
        steps_done = step;
        if step % cfg.eval_every == 0 || step == cfg.t2 {
            let current = if cfg.average_iterates {
                averaged.clone_from(net);
                averaged.a = a_sum.iter().map(|s| s / step as f64).collect();
                &averaged
            } else {
                &*net
            };
            records.push(evaluate(current, test, sign_target, samples_before + step * batch_size));
        }
    }
    if cfg.average_iterates && steps_done > 0 {
        net.a = a_sum.iter().map(|s| s / steps_done as f64).collect();
    }
    Ok(TrainTrace { records, outcome, samples_consumed: samples_before + steps_done * batch_size, net: net.clone() })
}

/// Full layerwise run: init, `t1` first-layer steps, then the output-layer
/// phase. Sample counts include every fresh batch.
pub fn layerwise_train(model: &DataModel, cfg: &LayerwiseConfig, streams: &mut TrainStreams) -> Result<TrainTrace> {
    cfg.validate()?;
    let needs_defaults = cfg.tau.is_none() || cfg.gamma1.is_none() || cfg.batch_size.is_none();
    let scalings = if needs_defaults { Some(theory_scalings(model)?) } else { None };
    let tau = cfg.tau.unwrap_or_else(|| scalings.unwrap().tau);
    let gamma1 = cfg.gamma1.unwrap_or_else(|| scalings.unwrap().gamma1);
    let batch_size = cfg.batch_size.unwrap_or_else(|| scalings.unwrap().batch_size);
    let d = model.dim();
    let mut net = match cfg.init {
        InitScheme::Gaussian => init_layerwise(cfg.n, d, tau, cfg.activation.clone(), &mut streams.init)?,
        InitScheme::Deterministic => init_deterministic(cfg.n, d, tau, cfg.activation.clone())?,
    };
    let test = model.sample(cfg.test_size, &mut streams.test);
    for step in 1..=cfg.t1 {
        phase1_step(&mut net, model, batch_size, gamma1, &mut streams.first, step)?;
    }
    let after_phase1 = batch_size * cfg.t1;
    let first = evaluate(&net, &test, model.target().is_sign_valued(), after_phase1);
    if cfg.t2 == 0 {
        return Ok(TrainTrace { records: vec![first], outcome: Outcome::Completed, samples_consumed: after_phase1, net });
    }
    let mut trace = phase2_train(&mut net, model, cfg, batch_size, streams, &test, after_phase1)?;
    trace.records.insert(0, first);
    Ok(trace)
}

/// Joint SGD with the mean squared error and fan-in uniform initialization.
pub fn joint_sgd_train(model: &DataModel, cfg: &JointConfig, streams: &mut TrainStreams) -> Result<TrainTrace> {
    cfg.validate()?;
    let mut net = init_uniform(cfg.n, model.dim(), cfg.activation.clone(), &mut streams.init)?;
    let test = model.sample(cfg.test_size, &mut streams.test);
    let sign_target = model.target().is_sign_valued();
    let below = |p: &EvalPoint| cfg.threshold.is_some_and(|t| p.mse < t);
    let first = evaluate(&net, &test, sign_target, 0);
    let mut records = vec![first];
    if below(&records[0]) {
        return Ok(TrainTrace { records, outcome: Outcome::ReachedThreshold, samples_consumed: 0, net });
    }
    let lr = cfg.learning_rate;
    let mut initial_loss = None;
    let mut outcome = Outcome::Completed;
    let mut steps_done = 0;
    for step in 1..=cfg.max_steps {
        let batch = model.sample(cfg.batch_size, &mut streams.first);
        let (loss, g) = loss_and_grad(&net, &batch.x, &batch.y, LossScale::Mean);
        let init = *initial_loss.get_or_insert(loss);
        if !loss.is_finite() || loss > DIVERGENCE_FACTOR * init.max(1e-8) {
            outcome = Outcome::Diverged { step, loss };
            break;
        }
        if !g.is_finite() {
            return Err(Error::NonFiniteGradient { step, detail: "joint gradient".into() });
        }
        for (p, gp) in net.w.iter_mut().zip(&g.w) {
            *p -= lr * gp;
        }
        for (p, gp) in net.a.iter_mut().zip(&g.a) {
            *p -= lr * gp;
        }
        for (p, gp) in net.b.iter_mut().zip(&g.b) {
            *p -= lr * gp;
        }
        steps_done = step;
        if step % cfg.eval_every == 0 || step == cfg.max_steps {
            let point = evaluate(&net, &test, sign_target, step * cfg.batch_size);
            let hit = below(&point);
            records.push(point);
            if hit {
                outcome = Outcome::ReachedThreshold;
                break;
            }
        }
    }
    Ok(TrainTrace { records, outcome, samples_consumed: steps_done * cfg.batch_size, net })
}

pub fn train(model: &DataModel, cfg: &TrainerConfig, streams: &mut TrainStreams) -> Result<TrainTrace> {
    match cfg {
        TrainerConfig::Layerwise(c) => layerwise_train(model, c, streams),
        TrainerConfig::Joint(c) => joint_sgd_train(model, c, streams),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult {
    /// `None` when the run was censored at `max_samples`.
    pub samples: Option<usize>,
    pub trace: TrainTrace,
}

/// Fresh samples consumed before the held-out MSE first drops below
/// `threshold`, capped at `max_samples`.
pub fn samples_to_threshold(
    model: &DataModel,
    cfg: &TrainerConfig,
    threshold: f64,
    streams: &mut TrainStreams,
    max_samples: usize,
) -> Result<ThresholdResult> {
    if !(threshold > 0.0) {
        return Err(Error::Config("threshold must be positive".into()));
    }
    let trace = match cfg {
        TrainerConfig::Joint(c) => {
            let mut c = c.clone();
            c.threshold = Some(threshold);
            c.max_steps = c.max_steps.min(max_samples / c.batch_size);
            joint_sgd_train(model, &c, streams)?
        }
        TrainerConfig::Layerwise(c) => {
            let mut c = c.clone();
            let b = match c.batch_size {
                Some(b) => b,
                None => theory_scalings(model)?.batch_size,
            };
            c.t2 = c.t2.min((max_samples / b).saturating_sub(c.t1));
            layerwise_train(model, &c, streams)?
        }
    };
    let samples = trace.first_below(threshold).filter(|&s| s <= max_samples);
    Ok(ThresholdResult { samples, trace })
}

/// `½ mean (y - Φ a)²` for a row-major feature matrix `phi` (`y.len() x n`).
pub fn output_layer_loss(phi: &[f64], n: usize, y: &[f64], a: &[f64]) -> f64 {
    phi.chunks_exact(n)
        .zip(y)
        .map(|(row, y)| {
            let e = y - crate::linalg::dot(row, a);
            e * e
        })
        .sum::<f64>()
        * 0.5
        / y.len() as f64
}

/// Exact minimizer of [`output_layer_loss`] through the normal equations.
pub fn output_layer_optimum(phi: &[f64], n: usize, y: &[f64]) -> Vec<f64> {
    crate::linalg::least_squares(phi, y.len(), n, y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedSampleSgd {
    /// Defaults to `0.5 / mean ‖φ‖²`.
    pub learning_rate: Option<f64>,
    pub epochs: usize,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedSampleResult {
    pub best_a: Vec<f64>,
    pub best_loss: f64,
    /// Loss of the running average at the end of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Minibatch SGD over a fixed sample with per-epoch reshuffling and a
/// running average of the iterates; the best of the current and averaged
/// iterates (by full-sample loss at epoch ends) is returned.
pub fn sgd_fixed_sample(phi: &[f64], n: usize, y: &[f64], cfg: &FixedSampleSgd, rng: &mut Rng) -> FixedSampleResult {
    let rows = y.len();
    let lr = cfg.learning_rate.unwrap_or_else(|| {
        let mean_sq = phi.iter().map(|v| v * v).sum::<f64>() / rows as f64;
        0.5 / mean_sq.max(1e-300)
    });
    let mut a = vec![0.0; n];
    let mut avg = vec![0.0; n];
    let mut count = 0.0;
    let mut order: Vec<usize> = (0..rows).collect();
    let mut best_a = a.clone();
    let mut best_loss = output_layer_loss(phi, n, y, &a);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut grad = vec![0.0; n];
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &r in chunk {
                let row = &phi[r * n..(r + 1) * n];
                let e = y[r] - crate::linalg::dot(row, &a);
                for (g, p) in grad.iter_mut().zip(row) {
                    *g += e * p;
                }
            }
            let step = lr / chunk.len() as f64;
            for (ak, g) in a.iter_mut().zip(&grad) {
                *ak += step * g;
            }
            count += 1.0;
            for (m, ak) in avg.iter_mut().zip(&a) {
                *m += (ak - *m) / count;
            }
        }
        let avg_loss = output_layer_loss(phi, n, y, &avg);
        epoch_losses.push(avg_loss);
        let cur_loss = output_layer_loss(phi, n, y, &a);
        if avg_loss < best_loss {
            best_loss = avg_loss;
            best_a.clone_from(&avg);
        }
        if cur_loss < best_loss {
            best_loss = cur_loss;
            best_a.clone_from(&a);
        }
    }
    FixedSampleResult { best_a, best_loss, epoch_losses }
}

//! Multiclass linear classifiers over the seen classes.
//!
//! Three objectives share one linear model `z = W x + b`:
//!
//! * multinomial cross-entropy (softmax), the probabilistic classifier
//!   ConSE builds on,
//! * one-vs-rest squared hinge, `Σ_c max(0, 1 - t_c z_c)²` with `t_c = ±1`,
//! * Crammer-Singer structured hinge, `max_{c≠y} [1 + z_c - z_y]_+`.
//!
//! Every objective is the mean per-sample loss plus `λ‖W‖²_F` (biases are
//! not regularized). Training is seeded mini-batch gradient descent.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::linalg::{self, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossKind {
    #[serde(rename = "softmax")]
    Softmax,
    #[serde(rename = "ovr_sq_hinge")]
    OvrSquaredHinge,
    #[serde(rename = "struct")]
    Struct,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Softmax => "softmax",
            LossKind::OvrSquaredHinge => "ovr_sq_hinge",
            LossKind::Struct => "struct",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "softmax" => Ok(LossKind::Softmax),
            "ovr_sq_hinge" => Ok(LossKind::OvrSquaredHinge),
            "struct" => Ok(LossKind::Struct),
            other => Err(Error::Argument(format!(
                "unknown loss kind {other:?} (expected softmax, ovr_sq_hinge or struct)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Initial step size; epoch `e` uses `learning_rate / sqrt(e)`.
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2_lambda: f64,
    pub seed: u64,
    pub batch_size: usize,
    pub fit_bias: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 100,
            l2_lambda: 1e-4,
            seed: 0,
            batch_size: 32,
            fit_bias: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Argument(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Argument("epochs must be at least 1".into()));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(Error::Argument(format!(
                "l2_lambda must be non-negative, got {}",
                self.l2_lambda
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Argument("batch_size must be at least 1".into()));
        }
        Ok(())
    }

    /// Step size for a 1-based epoch.
    pub fn step_size(&self, epoch: usize) -> f64 {
        self.learning_rate / (epoch as f64).sqrt()
    }
}

/// One weight row and bias per seen class; row `r` scores class
/// `class_index_map[r]`. The map is sorted ascending, so row order is class order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub loss_kind: LossKind,
    pub class_index_map: Vec<usize>,
    pub bias: Vec<f64>,
    pub weights: Matrix,
}

impl LinearModel {
    pub fn zeros(loss_kind: LossKind, classes: Vec<usize>, dims: usize) -> Self {
        let c = classes.len();
        LinearModel {
            loss_kind,
            class_index_map: classes,
            bias: vec![0.0; c],
            weights: Matrix::zeros(c, dims),
        }
    }

    pub fn class_count(&self) -> usize {
        self.class_index_map.len()
    }

    pub fn dims(&self) -> usize {
        self.weights.cols()
    }

    pub fn row_of(&self, class: usize) -> Option<usize> {
        self.class_index_map.binary_search(&class).ok()
    }

    pub fn check_dims(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dims() {
            return Err(Error::Argument(format!(
                "input has {} dims, model expects {}",
                x.len(),
                self.dims()
            )));
        }
        Ok(())
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(x)?;
        Ok(self.logits_unchecked(x))
    }

    fn logits_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter_rows()
            .zip(&self.bias)
            .map(|(w, b)| linalg::dot(w, x) + b)
            .collect()
    }

    /// Class with the highest logit (ties to the lowest class index).
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let z = self.logits(x)?;
        linalg::argmax(&z)
            .map(|r| self.class_index_map[r])
            .ok_or_else(|| Error::Scoring("model has no classes".into()))
    }

    pub fn accuracy(&self, x: &Matrix, y: &[usize]) -> Result<f64> {
        if x.rows() == 0 {
            return Ok(0.0);
        }
        let mut hits = 0usize;
        for (row, &label) in x.iter_rows().zip(y) {
            if self.predict(row)? == label {
                hits += 1;
            }
        }
        Ok(hits as f64 / x.rows() as f64)
    }

    pub fn is_finite(&self) -> bool {
        self.weights.is_finite() && self.bias.iter().all(|b| b.is_finite())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }
}

/// Softmax probabilities over the model's classes, in row order.
pub fn predict_proba(model: &LinearModel, x: &[f64]) -> Result<Vec<f64>> {
    Ok(linalg::softmax(&model.logits(x)?))
}

/// Gradient of an objective with respect to the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Per-sample loss and its derivative with respect to the logits `z`.
/// `target` is the row of the true class. `dz` must be zeroed by the caller.
fn sample_loss(kind: LossKind, z: &[f64], target: usize, dz: &mut [f64]) -> f64 {
    match kind {
        LossKind::Softmax => {
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = z.iter().map(|&v| (v - max).exp()).sum();
            let log_norm = max + sum.ln();
            for (d, &v) in dz.iter_mut().zip(z) {
                *d = (v - log_norm).exp();
            }
            dz[target] -= 1.0;
            log_norm - z[target]
        }
        LossKind::OvrSquaredHinge => {
            let mut loss = 0.0;
            for (c, (&v, d)) in z.iter().zip(dz.iter_mut()).enumerate() {
                let t = if c == target { 1.0 } else { -1.0 };
                let slack = 1.0 - t * v;
                if slack > 0.0 {
                    loss += slack * slack;
                    *d = -2.0 * t * slack;
                }
            }
            loss
        }
        LossKind::Struct => {
            // most violating competitor, lowest index on ties
            let mut worst: Option<(usize, f64)> = None;
            for (c, &v) in z.iter().enumerate() {
                if c == target {
                    continue;
                }
                let violation = 1.0 + v - z[target];
                if worst.is_none_or(|(_, w)| violation > w) {
                    worst = Some((c, violation));
                }
            }
            match worst {
                Some((c, violation)) if violation > 0.0 => {
                    dz[c] = 1.0;
                    dz[target] = -1.0;
                    violation
                }
                _ => 0.0,
            }
        }
    }
}

fn class_rows(model: &LinearModel, y: &[usize]) -> Result<Vec<usize>> {
    y.iter()
        .map(|&l| {
            model.row_of(l).ok_or_else(|| {
                Error::Argument(format!("label {l} is not one of the model's classes"))
            })
        })
        .collect()
}

/// Objective value and (sub)gradient over the listed samples; the data
/// term is the mean over `samples`.
fn objective(
    kind: LossKind,
    model: &LinearModel,
    x: &Matrix,
    rows: &[usize],
    samples: &[usize],
    lambda: f64,
) -> (f64, Gradient) {
    let c = model.class_count();
    let mut grad = Gradient {
        weights: Matrix::zeros(c, model.dims()),
        bias: vec![0.0; c],
    };
    let mut loss = 0.0;
    let mut dz = vec![0.0; c];
    for &n in samples {
        let xn = x.row(n);
        let z = model.logits_unchecked(xn);
        dz.iter_mut().for_each(|d| *d = 0.0);
        loss += sample_loss(kind, &z, rows[n], &mut dz);
        for (r, &d) in dz.iter().enumerate() {
            if d != 0.0 {
                linalg::axpy(d, xn, grad.weights.row_mut(r));
                grad.bias[r] += d;
            }
        }
    }
    let count = samples.len().max(1) as f64;
    loss /= count;
    for g in grad.weights.as_mut_slice() {
        *g /= count;
    }
    for g in &mut grad.bias {
        *g /= count;
    }
    loss += lambda * model.weights.frobenius_sq();
    for (g, &w) in grad
        .weights
        .as_mut_slice()
        .iter_mut()
        .zip(model.weights.as_slice())
    {
        *g += 2.0 * lambda * w;
    }
    (loss, grad)
}

/// Exact objective `mean_n loss_n + λ‖W‖²_F` and its (sub)gradient.
pub fn loss_and_gradient(
    kind: LossKind,
    model: &LinearModel,
    x: &Matrix,
    y: &[usize],
    lambda: f64,
) -> Result<(f64, Gradient)> {
    if x.rows() != y.len() {
        return Err(Error::Argument(format!(
            "{} rows but {} labels",
            x.rows(),
            y.len()
        )));
    }
    if x.cols() != model.dims() && x.rows() > 0 {
        return Err(Error::Argument(format!(
            "inputs have {} dims, model expects {}",
            x.cols(),
            model.dims()
        )));
    }
    if model.bias.len() != model.class_count() || model.weights.rows() != model.class_count() {
        return Err(Error::Argument("model shape is inconsistent".into()));
    }
    let rows = class_rows(model, y)?;
    let samples: Vec<usize> = (0..x.rows()).collect();
    Ok(objective(kind, model, x, &rows, &samples, lambda))
}

/// Same as [`loss_and_gradient`] with the loss kind given by name.
pub fn loss_and_gradient_named(
    kind: &str,
    model: &LinearModel,
    x: &Matrix,
    y: &[usize],
    lambda: f64,
) -> Result<(f64, Gradient)> {
    loss_and_gradient(kind.parse()?, model, x, y, lambda)
}

/// Trains a linear model for `classes` (any order; stored sorted).
pub fn train(
    kind: LossKind,
    x: &Matrix,
    y: &[usize],
    classes: &[usize],
    cfg: &TrainConfig,
) -> Result<LinearModel> {
    cfg.validate()?;
    if x.rows() != y.len() {
        return Err(Error::Argument(format!(
            "{} rows but {} labels",
            x.rows(),
            y.len()
        )));
    }
    let mut classes = classes.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.is_empty() {
        return Err(Error::Training("no classes to train".into()));
    }
    let dims = x.cols();
    if dims == 0 {
        return Err(Error::Training("inputs have zero dimensions".into()));
    }

    let mut model = LinearModel::zeros(kind, classes, dims);
    let rows = class_rows(&model, y).map_err(|e| Error::Training(e.to_string()))?;
    let mut counts = vec![0usize; model.class_count()];
    for &r in &rows {
        counts[r] += 1;
    }
    if let Some(r) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Training(format!(
            "seen class {} has no training samples",
            model.class_index_map[r]
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = Normal::new(0.0, 0.01 / (dims as f64).sqrt()).expect("positive std");
    for w in model.weights.as_mut_slice() {
        *w = init.sample(&mut rng);
    }

    let mut order: Vec<usize> = (0..x.rows()).collect();
    for epoch in 1..=cfg.epochs {
        let step = cfg.step_size(epoch);
        // The L2 term is applied as the implicit (proximal) step, which stays
        // stable for any λ·step.
        let shrink = 1.0 / (1.0 + 2.0 * step * cfg.l2_lambda);
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let (_, grad) = objective(kind, &model, x, &rows, batch, 0.0);
            for (w, g) in model
                .weights
                .as_mut_slice()
                .iter_mut()
                .zip(grad.weights.as_slice())
            {
                *w = (*w - step * g) * shrink;
            }
            if cfg.fit_bias {
                for (b, g) in model.bias.iter_mut().zip(&grad.bias) {
                    *b -= step * g;
                }
            }
        }
    }
    if !model.is_finite() {
        return Err(Error::Training(format!(
            "{kind} training diverged; lower the learning rate"
        )));
    }
    Ok(model)
}

pub fn train_softmax(x: &Matrix, y: &[usize], classes: &[usize], cfg: &TrainConfig) -> Result<LinearModel> {
    train(LossKind::Softmax, x, y, classes, cfg)
}

pub fn train_ovr_squared_hinge(
    x: &Matrix,
    y: &[usize],
    classes: &[usize],
    cfg: &TrainConfig,
) -> Result<LinearModel> {
    train(LossKind::OvrSquaredHinge, x, y, classes, cfg)
}

pub fn train_struct_svm(x: &Matrix, y: &[usize], classes: &[usize], cfg: &TrainConfig) -> Result<LinearModel> {
    train(LossKind::Struct, x, y, classes, cfg)
}

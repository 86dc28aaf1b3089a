//! Multinomial logistic regression and one-vs-rest linear SVM.
//!
//! Both learners work on a flat parameter vector laid out class by class as
//! `[w_c (d values), b_c]`. The bias is penalized together with the weights,
//! so a class missing from the training data still gets finite parameters.
//!
//! Logistic: `sum_i CE_i + l2/2 * |theta|^2`, minimized with L-BFGS.
//! SVM, per class: `1/2 |theta_c|^2 + C * sum_i max(0, 1 - y_ic * theta_c . [x_i, 1])`,
//! minimized by seeded epoch-wise Pegasos subgradient steps; after every
//! epoch the better of the last and the averaged iterate is kept if it beats
//! the best objective so far.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::optim::lbfgs;
use super::{log_sum_exp, softmax, tree::check_width};
use crate::dataset::{DatasetTable, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearKind {
    SoftmaxLogistic,
    OvrHingeSvm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub l2: f64,
    pub max_iters: usize,
    pub tolerance: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self { l2: 1.0, max_iters: 1000, tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub c: f64,
    /// Epochs.
    pub max_iters: usize,
    pub tolerance: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self { c: 1.0, max_iters: 100, tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: LinearKind,
    pub n_features: usize,
    /// `weights[class][feature]`
    pub weights: Vec<Vec<f64>>,
    pub biases: [f64; NUM_CLASSES],
    /// `l2` for logistic, `C` for the SVM.
    pub regularization: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Logistic: final objective. SVM: best objective after each epoch.
    pub objective_trace: Vec<f64>,
}

impl LinearModel {
    fn from_params(kind: LinearKind, d: usize, params: &[f64], regularization: f64) -> Self {
        let mut weights = Vec::with_capacity(NUM_CLASSES);
        let mut biases = [0.0; NUM_CLASSES];
        for (c, b) in biases.iter_mut().enumerate() {
            let block = &params[c * (d + 1)..(c + 1) * (d + 1)];
            weights.push(block[..d].to_vec());
            *b = block[d];
        }
        Self {
            kind,
            n_features: d,
            weights,
            biases,
            regularization,
            converged: false,
            iterations: 0,
            objective_trace: Vec::new(),
        }
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(NUM_CLASSES * (self.n_features + 1));
        for (w, b) in self.weights.iter().zip(self.biases) {
            out.extend_from_slice(w);
            out.push(b);
        }
        out
    }

    /// Per-class linear scores (SVM margins, logistic logits).
    pub fn decision_scores(&self, x: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        check_width(self.n_features, x)?;
        Ok(core::array::from_fn(|c| dot(&self.weights[c], x) + self.biases[c]))
    }

    /// Softmax of the decision scores. For the SVM this is a calibration
    /// convention for ranking, not a fitted probability model.
    pub fn predict_proba(&self, x: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        Ok(softmax(&self.decision_scores(x)?))
    }

    pub fn weight_norm(&self) -> f64 {
        libm::sqrt(self.weights.iter().flatten().map(|w| w * w).sum())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn require_two_classes(table: &DatasetTable) -> Result<()> {
    if table.is_empty() {
        return Err(Error::NoRows);
    }
    if table.class_distribution().iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::SingleClass);
    }
    Ok(())
}

fn n_params(table: &DatasetTable) -> usize {
    NUM_CLASSES * (table.n_features() + 1)
}

/// Logistic objective; writes the gradient into `grad`.
pub fn logistic_objective_grad(table: &DatasetTable, l2: f64, params: &[f64], grad: &mut [f64]) -> f64 {
    let d = table.n_features();
    grad.iter_mut().zip(params).for_each(|(g, p)| *g = l2 * p);
    let mut value = 0.5 * l2 * dot(params, params);
    for (row, &y) in table.rows().zip(table.labels()) {
        let z: [f64; NUM_CLASSES] =
            core::array::from_fn(|c| dot(&params[c * (d + 1)..c * (d + 1) + d], row) + params[c * (d + 1) + d]);
        value += log_sum_exp(&z) - z[usize::from(y)];
        let p = softmax(&z);
        for c in 0..NUM_CLASSES {
            let r = p[c] - if usize::from(y) == c { 1.0 } else { 0.0 };
            let block = &mut grad[c * (d + 1)..(c + 1) * (d + 1)];
            for (g, &x) in block[..d].iter_mut().zip(row) {
                *g += r * x;
            }
            block[d] += r;
        }
    }
    value
}

pub fn logistic_objective(table: &DatasetTable, l2: f64, params: &[f64]) -> f64 {
    let mut g = vec![0.0; params.len()];
    logistic_objective_grad(table, l2, params, &mut g)
}

pub fn logistic_gradient(table: &DatasetTable, l2: f64, params: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; params.len()];
    logistic_objective_grad(table, l2, params, &mut g);
    g
}

pub fn train_logistic(table: &DatasetTable, config: &LogisticConfig) -> Result<LinearModel> {
    require_two_classes(table)?;
    if config.max_iters == 0 {
        return Err(Error::InvalidParameter("max_iters must be ≥ 1".into()));
    }
    if config.l2.is_nan() || config.l2 < 0.0 {
        return Err(Error::InvalidParameter("l2 must be non-negative".into()));
    }
    let min = lbfgs(
        |p, g| logistic_objective_grad(table, config.l2, p, g),
        vec![0.0; n_params(table)],
        config.max_iters,
        config.tolerance,
    )?;
    let mut model = LinearModel::from_params(LinearKind::SoftmaxLogistic, table.n_features(), &min.x, config.l2);
    model.converged = min.converged;
    model.iterations = min.iterations;
    model.objective_trace = vec![min.value];
    Ok(model)
}

fn sign(label: u8, class: usize) -> f64 {
    if usize::from(label) == class {
        1.0
    } else {
        -1.0
    }
}

fn margin(theta: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    dot(&theta[..d], x) + theta[d]
}

fn binary_svm_objective(table: &DatasetTable, c: f64, class: usize, theta: &[f64]) -> f64 {
    let hinge: f64 = table
        .rows()
        .zip(table.labels())
        .map(|(x, &y)| (1.0 - sign(y, class) * margin(theta, x)).max(0.0))
        .sum();
    0.5 * dot(theta, theta) + c * hinge
}

/// Sum of the per-class SVM objectives.
pub fn svm_objective(table: &DatasetTable, c: f64, params: &[f64]) -> f64 {
    let w = table.n_features() + 1;
    (0..NUM_CLASSES).map(|k| binary_svm_objective(table, c, k, &params[k * w..(k + 1) * w])).sum()
}

/// Subgradient of [`svm_objective`], taking zero for samples exactly on the margin.
pub fn svm_gradient(table: &DatasetTable, c: f64, params: &[f64]) -> Vec<f64> {
    let d = table.n_features();
    let mut g = params.to_vec();
    for k in 0..NUM_CLASSES {
        let theta = &params[k * (d + 1)..(k + 1) * (d + 1)];
        let block = &mut g[k * (d + 1)..(k + 1) * (d + 1)];
        for (x, &y) in table.rows().zip(table.labels()) {
            let s = sign(y, k);
            if s * margin(theta, x) < 1.0 {
                for (gj, &xj) in block[..d].iter_mut().zip(x) {
                    *gj -= c * s * xj;
                }
                block[d] -= c * s;
            }
        }
    }
    g
}

struct BinaryFit {
    theta: Vec<f64>,
    trace: Vec<f64>,
    converged: bool,
}

fn train_binary_svm(table: &DatasetTable, config: &SvmConfig, class: usize, seed: u64) -> BinaryFit {
    let n = table.n_rows();
    let d = table.n_features();
    let lambda = 1.0 / (config.c * n as f64);
    let radius = 1.0 / libm::sqrt(lambda);
    let mut theta = vec![0.0; d + 1];
    let mut avg = vec![0.0; d + 1];
    let mut best = theta.clone();
    let mut best_obj = binary_svm_objective(table, config.c, class, &theta);
    let mut trace = Vec::with_capacity(config.max_iters);
    let mut rng = rng::seeded(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0u64;
    let mut converged = false;

    for _ in 0..config.max_iters {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let x = table.row(i);
            let y = sign(table.labels()[i], class);
            let eta = 1.0 / (lambda * t as f64);
            let active = y * margin(&theta, x) < 1.0;
            let shrink = 1.0 - 1.0 / t as f64;
            for v in &mut theta {
                *v *= shrink;
            }
            if active {
                for (v, &xj) in theta[..d].iter_mut().zip(x) {
                    *v += eta * y * xj;
                }
                theta[d] += eta * y;
            }
            let norm = libm::sqrt(dot(&theta, &theta));
            if norm > radius {
                let s = radius / norm;
                for v in &mut theta {
                    *v *= s;
                }
            }
            let w = 1.0 / t as f64;
            for (a, &v) in avg.iter_mut().zip(&theta) {
                *a += (v - *a) * w;
            }
        }
        let previous = best_obj;
        for candidate in [&theta, &avg] {
            let obj = binary_svm_objective(table, config.c, class, candidate);
            if obj < best_obj {
                best_obj = obj;
                best.clone_from(candidate);
            }
        }
        converged = previous - best_obj <= config.tolerance * best_obj.abs().max(1.0);
        trace.push(best_obj);
    }
    BinaryFit { theta: best, trace, converged }
}

pub fn train_svm(table: &DatasetTable, config: &SvmConfig, seed: u64) -> Result<LinearModel> {
    require_two_classes(table)?;
    if config.c.is_nan() || config.c <= 0.0 {
        return Err(Error::InvalidParameter("C must be positive".into()));
    }
    if config.max_iters == 0 {
        return Err(Error::InvalidParameter("max_iters must be ≥ 1".into()));
    }
    let d = table.n_features();
    let mut params = Vec::with_capacity(n_params(table));
    let mut trace = vec![0.0; config.max_iters];
    let mut converged = true;
    for k in 0..NUM_CLASSES {
        let fit = train_binary_svm(table, config, k, rng::derive_seed(seed, k as u64));
        params.extend_from_slice(&fit.theta);
        for (acc, v) in trace.iter_mut().zip(&fit.trace) {
            *acc += v;
        }
        converged &= fit.converged;
    }
    if let Some(e) = trace.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "loss", iteration: e + 1 });
    }
    let mut model = LinearModel::from_params(LinearKind::OvrHingeSvm, d, &params, config.c);
    model.converged = converged;
    model.iterations = config.max_iters;
    model.objective_trace = trace;
    Ok(model)
}

//! Multiclass gradient boosting with softmax loss.
//!
//! Each round fits one regression tree per class to the residuals
//! `onehot - p` (the negative gradient of the log-loss). Leaves take the
//! multiclass Newton step `(K-1)/K * sum(r) / sum(p(1-p))`, and the round is
//! added with shrinkage `learning_rate`. If that update would raise the
//! training log-loss, the round's step is halved until it does not (down to
//! zero), which keeps the recorded loss trace non-increasing.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::tree::{self, Builder, NewtonObjective, RegressionTree, TreeConfig};
use super::{log_sum_exp, softmax};
use crate::dataset::{DatasetTable, NUM_CLASSES};
use crate::error::{Error, Result};

const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtConfig {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self { n_rounds: 200, learning_rate: 0.1, max_depth: 3, min_samples_leaf: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtRound {
    /// Multiplier applied to every tree of the round (learning rate after damping).
    pub step: f64,
    /// One tree per class.
    pub trees: Vec<RegressionTree>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub config: GbtConfig,
    pub n_features: usize,
    /// Log of the smoothed class priors `(count + 1) / (n + K)`.
    pub initial_scores: [f64; NUM_CLASSES],
    pub rounds: Vec<GbtRound>,
    pub initial_loss: f64,
    /// Mean training log-loss after each round.
    pub loss_trace: Vec<f64>,
}

fn mean_log_loss(scores: &[[f64; NUM_CLASSES]], labels: &[u8]) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(f, &y)| log_sum_exp(f) - f[usize::from(y)])
        .sum();
    total / labels.len() as f64
}

pub fn train_gbt(table: &DatasetTable, config: &GbtConfig) -> Result<GbtModel> {
    if config.n_rounds == 0 {
        return Err(Error::InvalidParameter("n_rounds must be ≥ 1".into()));
    }
    if !(config.learning_rate > 0.0 && config.learning_rate <= 1.0) {
        return Err(Error::InvalidParameter("learning_rate must lie in (0, 1]".into()));
    }
    if table.is_empty() {
        return Err(Error::NoRows);
    }
    let tree_config = TreeConfig {
        max_depth: Some(config.max_depth),
        min_samples_leaf: config.min_samples_leaf,
        max_features: None,
        seed: 0,
    };
    tree_config.validate()?;

    let n = table.n_rows();
    let labels = table.labels();
    let counts = table.class_distribution();
    let initial_scores =
        counts.map(|c| libm::log((c as f64 + 1.0) / (n as f64 + NUM_CLASSES as f64)));
    let mut scores = vec![initial_scores; n];
    let initial_loss = mean_log_loss(&scores, labels);
    let mut loss = initial_loss;

    let rows: Vec<usize> = (0..n).collect();
    let orders = Builder::<NewtonObjective>::presort(table, &rows);
    let leaf_scale = (NUM_CLASSES as f64 - 1.0) / NUM_CLASSES as f64;
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut rounds = Vec::with_capacity(config.n_rounds);
    let mut loss_trace = Vec::with_capacity(config.n_rounds);

    for round in 0..config.n_rounds {
        let probs: Vec<[f64; NUM_CLASSES]> = scores.iter().map(softmax).collect();
        let mut trees = Vec::with_capacity(NUM_CLASSES);
        let mut updates = vec![[0.0; NUM_CLASSES]; n];
        for k in 0..NUM_CLASSES {
            for i in 0..n {
                let p = probs[i][k];
                let y = if usize::from(labels[i]) == k { 1.0 } else { 0.0 };
                grad[i] = y - p;
                hess[i] = p * (1.0 - p);
            }
            let objective = NewtonObjective { grad: &grad, hess: &hess, leaf_scale };
            let tree = Builder::new(table, &rows, objective, &tree_config).build(orders.clone());
            for (i, u) in updates.iter_mut().enumerate() {
                u[k] = *tree.leaf(table.row(i));
            }
            trees.push(tree);
        }

        let mut step = config.learning_rate;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate: Vec<[f64; NUM_CLASSES]> = scores
                .iter()
                .zip(&updates)
                .map(|(f, u)| core::array::from_fn(|k| f[k] + step * u[k]))
                .collect();
            let new_loss = mean_log_loss(&candidate, labels);
            if !new_loss.is_finite() {
                return Err(Error::NonFinite { what: "probabilities", iteration: round });
            }
            if new_loss <= loss {
                accepted = Some((candidate, new_loss));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((candidate, new_loss)) => {
                scores = candidate;
                loss = new_loss;
            }
            None => step = 0.0,
        }
        rounds.push(GbtRound { step, trees });
        loss_trace.push(loss);
    }

    Ok(GbtModel {
        config: config.clone(),
        n_features: table.n_features(),
        initial_scores,
        rounds,
        initial_loss,
        loss_trace,
    })
}

impl GbtModel {
    pub fn raw_scores(&self, x: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        tree::check_width(self.n_features, x)?;
        let mut f = self.initial_scores;
        for round in &self.rounds {
            for (fk, t) in f.iter_mut().zip(&round.trees) {
                *fk += round.step * *t.leaf(x);
            }
        }
        Ok(f)
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        Ok(softmax(&self.raw_scores(x)?))
    }

    pub fn feature_importance(&self) -> Vec<f64> {
        let mut raw = vec![0.0; self.n_features];
        for round in &self.rounds {
            for t in &round.trees {
                t.accumulate_gains(&mut raw);
            }
        }
        tree::normalize_importance(raw)
    }
}

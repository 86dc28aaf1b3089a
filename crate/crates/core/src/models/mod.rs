//! Base learners and the model enum that wraps them.
//!
//! | kind       | probabilities                         | importance |
//! |------------|---------------------------------------|------------|
//! | `logistic` | softmax of the logits                 | no         |
//! | `forest`   | mean of the trees' leaf class ratios  | Gini gain  |
//! | `svm`      | softmax of the one-vs-rest margins    | no         |
//! | `gbt`      | softmax of the boosted scores         | loss gain  |
//! | `stack`    | meta GBT over out-of-fold base probs  | GBT base   |
//!
//! SVM probabilities are a calibration convention for ranking and ROC
//! curves, not a fitted probability model. Linear learners expect
//! standardized inputs.

use alloc::boxed::Box;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{stratified_kfold, DatasetTable, NUM_CLASSES};
use crate::ensemble::{stack_predict, stack_train, StackConfig, StackModel};
use crate::error::{Error, Result};
use crate::metrics::classification_report;

pub mod forest;
pub mod gbt;
pub mod linear;
pub mod optim;
pub mod tree;

pub use forest::{train_random_forest, ForestConfig, ForestModel, MaxFeatures};
pub use gbt::{train_gbt, GbtConfig, GbtModel};
pub use linear::{train_logistic, train_svm, LinearKind, LinearModel, LogisticConfig, SvmConfig};
pub use tree::{train_tree, ClassificationTree, Node, RegressionTree, Tree, TreeConfig};

pub type Probabilities = [f64; NUM_CLASSES];

pub fn log_sum_exp(z: &[f64; NUM_CLASSES]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + libm::log(z.iter().map(|v| libm::exp(v - m)).sum())
}

pub fn softmax(z: &[f64; NUM_CLASSES]) -> Probabilities {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = z.map(|v| libm::exp(v - m));
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

/// Most probable class, ties to the lowest index.
pub fn argmax(p: &Probabilities) -> u8 {
    let mut best = 0;
    for c in 1..NUM_CLASSES {
        if p[c] > p[best] {
            best = c;
        }
    }
    best as u8
}

/// What to train, with hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Logistic(LogisticConfig),
    Forest(ForestConfig),
    Svm(SvmConfig),
    Gbt(GbtConfig),
    Stack(StackConfig),
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Gbt(GbtConfig::default())
    }
}

impl ModelSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::Logistic(_) => "logistic",
            ModelSpec::Forest(_) => "forest",
            ModelSpec::Svm(_) => "svm",
            ModelSpec::Gbt(_) => "gbt",
            ModelSpec::Stack(_) => "stack",
        }
    }

    /// Default hyperparameters for a kind name.
    pub fn from_kind(kind: &str) -> Option<Self> {
        Some(match kind {
            "logistic" => ModelSpec::Logistic(LogisticConfig::default()),
            "forest" => ModelSpec::Forest(ForestConfig::default()),
            "svm" => ModelSpec::Svm(SvmConfig::default()),
            "gbt" => ModelSpec::Gbt(GbtConfig::default()),
            "stack" => ModelSpec::Stack(StackConfig::default()),
            _ => return None,
        })
    }
}

/// A trained model of any kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum Model {
    Logistic(LinearModel),
    Forest(ForestModel),
    Svm(LinearModel),
    Gbt(GbtModel),
    Stack(Box<StackModel>),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Logistic(_) => "logistic",
            Model::Forest(_) => "forest",
            Model::Svm(_) => "svm",
            Model::Gbt(_) => "gbt",
            Model::Stack(_) => "stack",
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::Logistic(m) | Model::Svm(m) => m.n_features,
            Model::Forest(m) => m.n_features(),
            Model::Gbt(m) => m.n_features,
            Model::Stack(m) => m.n_features(),
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Probabilities> {
        match self {
            Model::Logistic(m) | Model::Svm(m) => m.predict_proba(x),
            Model::Forest(m) => m.predict_proba(x),
            Model::Gbt(m) => m.predict_proba(x),
            Model::Stack(m) => Ok(stack_predict(m, x)?.1),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        Ok(argmax(&self.predict_proba(x)?))
    }

    pub fn predict_table(&self, table: &DatasetTable) -> Result<Vec<Probabilities>> {
        table.rows().map(|x| self.predict_proba(x)).collect()
    }

    /// Normalized split-gain importance. A stack reports its GBT base.
    pub fn feature_importance(&self) -> Result<Vec<f64>> {
        match self {
            Model::Forest(m) => Ok(m.feature_importance()),
            Model::Gbt(m) => Ok(m.feature_importance()),
            Model::Stack(m) => m
                .tree_base_importance()
                .ok_or_else(|| Error::InvalidParameter("stack has no tree-based base model".into())),
            Model::Logistic(_) | Model::Svm(_) => Err(Error::InvalidParameter(alloc::format!(
                "feature importance needs a tree-based model, not {}",
                self.kind()
            ))),
        }
    }
}

/// Train `spec` on `table`. The seed drives every stochastic choice.
pub fn train_model(spec: &ModelSpec, table: &DatasetTable, seed: u64) -> Result<Model> {
    Ok(match spec {
        ModelSpec::Logistic(c) => Model::Logistic(train_logistic(table, c)?),
        ModelSpec::Forest(c) => Model::Forest(train_random_forest(table, c, seed)?),
        ModelSpec::Svm(c) => Model::Svm(train_svm(table, c, seed)?),
        ModelSpec::Gbt(c) => Model::Gbt(train_gbt(table, c)?),
        ModelSpec::Stack(c) => Model::Stack(Box::new(stack_train(table, c, seed)?.0)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    /// Mean held-out macro F1 per candidate, in input order.
    pub mean_f1: Vec<f64>,
    /// First candidate with the highest score.
    pub best: usize,
}

/// Score every candidate by stratified k-fold macro F1 on `table`.
pub fn grid_search(candidates: &[ModelSpec], table: &DatasetTable, k: usize, seed: u64) -> Result<GridSearchResult> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("grid search needs at least one candidate".into()));
    }
    let plan = stratified_kfold(table, k, seed)?;
    let mut mean_f1 = Vec::with_capacity(candidates.len());
    for spec in candidates {
        let mut total = 0.0;
        for fold in 0..k {
            let train = table.subset(&plan.training(fold));
            let test = table.subset(plan.held_out(fold));
            let score = (|| {
                let model = train_model(spec, &train, seed)?;
                let pred = test.rows().map(|x| model.predict(x)).collect::<Result<Vec<_>>>()?;
                Ok::<_, Error>(classification_report(test.labels(), &pred)?.macro_f1)
            })()
            .map_err(|e| e.in_fold(fold))?;
            total += score;
        }
        mean_f1.push(total / k as f64);
    }
    let mut best = 0;
    for (i, &s) in mean_f1.iter().enumerate() {
        if s > mean_f1[best] {
            best = i;
        }
    }
    Ok(GridSearchResult { mean_f1, best })
}

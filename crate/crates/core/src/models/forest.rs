//! Bagged Gini trees with per-split feature subsampling.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{self, grow_classifier, ClassificationTree, TreeConfig};
use crate::dataset::{DatasetTable, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `ceil(sqrt(d))`
    #[default]
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => (libm::ceil(libm::sqrt(d as f64)) as usize).clamp(1, d.max(1)),
            MaxFeatures::All => d.max(1),
            MaxFeatures::Count(k) => k.clamp(1, d.max(1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { n_trees: 200, max_depth: None, min_samples_leaf: 1, max_features: MaxFeatures::Sqrt, bootstrap: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub config: ForestConfig,
    pub seed: u64,
    /// Seed behind each tree's bootstrap draw and feature sampling.
    pub tree_seeds: Vec<u64>,
    pub feature_subsample_size: usize,
    pub trees: Vec<ClassificationTree>,
}

pub fn train_random_forest(table: &DatasetTable, config: &ForestConfig, seed: u64) -> Result<ForestModel> {
    if config.n_trees == 0 {
        return Err(Error::InvalidParameter("n_trees must be ≥ 1".into()));
    }
    if table.is_empty() {
        return Err(Error::NoRows);
    }
    let m = config.max_features.resolve(table.n_features());
    let n = table.n_rows();
    let mut tree_seeds = Vec::with_capacity(config.n_trees);
    let mut trees = Vec::with_capacity(config.n_trees);
    for t in 0..config.n_trees {
        let tree_seed = rng::derive_seed(seed, t as u64);
        let tc = TreeConfig {
            max_depth: config.max_depth,
            min_samples_leaf: config.min_samples_leaf,
            max_features: Some(m),
            seed: rng::derive_seed(tree_seed, 1),
        };
        tc.validate()?;
        let rows: Vec<usize> = if config.bootstrap {
            let mut r = rng::seeded(tree_seed);
            (0..n).map(|_| r.gen_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        trees.push(grow_classifier(table, &rows, &tc));
        tree_seeds.push(tree_seed);
    }
    Ok(ForestModel { config: config.clone(), seed, tree_seeds, feature_subsample_size: m, trees })
}

impl ForestModel {
    pub fn n_features(&self) -> usize {
        self.trees[0].n_features
    }

    /// Mean of the trees' leaf class frequencies.
    pub fn predict_proba(&self, x: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        tree::check_width(self.n_features(), x)?;
        let mut p = [0.0; NUM_CLASSES];
        for t in &self.trees {
            for (acc, v) in p.iter_mut().zip(t.predict_proba(x)) {
                *acc += v;
            }
        }
        let k = self.trees.len() as f64;
        Ok(p.map(|v| v / k))
    }

    pub fn feature_importance(&self) -> Vec<f64> {
        let mut raw = alloc::vec![0.0; self.n_features()];
        for t in &self.trees {
            t.accumulate_gains(&mut raw);
        }
        tree::normalize_importance(raw)
    }
}

//! Two-layer stacking.
//!
//! Base learners are trained on the complement of each stratified fold and
//! predict class probabilities for the held-out rows. The resulting
//! out-of-fold matrix (one row per training row, `n_bases * 4` columns) is
//! the training set of a GBT meta-learner. Finally every base is refit on
//! the full table; those refits produce the meta-features at inference.
//!
//! Bases are kept in a canonical order (logistic, forest, svm, gbt)
//! whatever order the configuration lists them in, and each base draws its
//! seed from its kind, so permuting the configuration changes nothing.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{stratified_kfold, DatasetTable, FoldPlan, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::models::{
    argmax, train_gbt, train_logistic, train_random_forest, train_svm, ForestConfig, GbtConfig, GbtModel,
    LogisticConfig, Model, Probabilities, SvmConfig,
};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseSpec {
    Logistic(LogisticConfig),
    Forest(ForestConfig),
    Svm(SvmConfig),
    Gbt(GbtConfig),
}

impl BaseSpec {
    pub fn name(&self) -> &'static str {
        ["logistic", "forest", "svm", "gbt"][self.rank()]
    }

    fn rank(&self) -> usize {
        match self {
            BaseSpec::Logistic(_) => 0,
            BaseSpec::Forest(_) => 1,
            BaseSpec::Svm(_) => 2,
            BaseSpec::Gbt(_) => 3,
        }
    }

    fn train(&self, table: &DatasetTable, seed: u64) -> Result<Model> {
        Ok(match self {
            BaseSpec::Logistic(c) => Model::Logistic(train_logistic(table, c)?),
            BaseSpec::Forest(c) => Model::Forest(train_random_forest(table, c, seed)?),
            BaseSpec::Svm(c) => Model::Svm(train_svm(table, c, seed)?),
            BaseSpec::Gbt(c) => Model::Gbt(train_gbt(table, c)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StackConfig {
    pub bases: Vec<BaseSpec>,
    pub meta: GbtConfig,
    pub oof_folds: usize,
}

impl Default for StackConfig {
    fn default() -> Self {
        Self {
            bases: alloc::vec![
                BaseSpec::Logistic(LogisticConfig::default()),
                BaseSpec::Forest(ForestConfig::default()),
                BaseSpec::Svm(SvmConfig::default()),
                BaseSpec::Gbt(GbtConfig::default()),
            ],
            meta: GbtConfig::default(),
            oof_folds: 5,
        }
    }
}

impl StackConfig {
    #[cfg(test)]
    pub(crate) fn quick() -> Self {
        Self {
            bases: alloc::vec![
                BaseSpec::Logistic(LogisticConfig::default()),
                BaseSpec::Forest(ForestConfig { n_trees: 10, ..Default::default() }),
                BaseSpec::Svm(SvmConfig { max_iters: 20, ..Default::default() }),
                BaseSpec::Gbt(GbtConfig { n_rounds: 10, ..Default::default() }),
            ],
            meta: GbtConfig { n_rounds: 20, ..Default::default() },
            oof_folds: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackModel {
    /// Refit on the full table, canonical order.
    pub base_models: Vec<Model>,
    pub meta_model: GbtModel,
    /// `{base}_p{class}` for every base and class, in meta-feature order.
    pub meta_feature_layout: Vec<String>,
    pub oof_folds: usize,
    pub seed: u64,
}

/// Audit trail of one stacking fit.
#[derive(Debug, Clone, PartialEq)]
pub struct StackTrace {
    pub folds: FoldPlan,
    /// Rows each fold's base models were trained on.
    pub fold_train_indices: Vec<Vec<usize>>,
    /// Out-of-fold meta-features, one row per input row.
    pub meta_features: DatasetTable,
}

fn canonical(bases: &[BaseSpec]) -> Result<Vec<&BaseSpec>> {
    if bases.is_empty() {
        return Err(Error::InvalidParameter("stack needs at least one base learner".into()));
    }
    let mut sorted: Vec<&BaseSpec> = bases.iter().collect();
    sorted.sort_by_key(|b| b.rank());
    for w in sorted.windows(2) {
        if w[0].rank() == w[1].rank() {
            return Err(Error::InvalidParameter(format!("base learner {} listed twice", w[0].name())));
        }
    }
    Ok(sorted)
}

fn layout(bases: &[&BaseSpec]) -> Vec<String> {
    bases
        .iter()
        .flat_map(|b| (0..NUM_CLASSES).map(move |c| format!("{}_p{c}", b.name())))
        .collect()
}

pub fn stack_train(table: &DatasetTable, config: &StackConfig, seed: u64) -> Result<(StackModel, StackTrace)> {
    if config.oof_folds < 2 {
        return Err(Error::InvalidParameter(format!("oof_folds must be ≥ 2, got {}", config.oof_folds)));
    }
    let bases = canonical(&config.bases)?;
    let names = layout(&bases);
    let width = names.len();
    let folds = stratified_kfold(table, config.oof_folds, seed)?;
    let base_seed = |b: &BaseSpec| derive_seed(seed, b.rank() as u64);

    let mut meta = alloc::vec![0.0; table.n_rows() * width];
    let mut fold_train_indices = Vec::with_capacity(config.oof_folds);
    for fold in 0..config.oof_folds {
        let train_idx = folds.training(fold);
        let train = table.subset(&train_idx);
        for (slot, base) in bases.iter().enumerate() {
            let model = base
                .train(&train, derive_seed(base_seed(base), fold as u64 + 1))
                .map_err(|e| e.in_fold(fold))?;
            for &row in folds.held_out(fold) {
                let p = model.predict_proba(table.row(row)).map_err(|e| e.in_fold(fold))?;
                let at = row * width + slot * NUM_CLASSES;
                meta[at..at + NUM_CLASSES].copy_from_slice(&p);
            }
        }
        fold_train_indices.push(train_idx);
    }

    let meta_features =
        DatasetTable::from_flat(names.clone(), meta, table.labels().to_vec(), table.row_ids().map(<[String]>::to_vec))?;
    let meta_model = train_gbt(&meta_features, &config.meta)?;
    let base_models =
        bases.iter().map(|b| b.train(table, base_seed(b))).collect::<Result<Vec<_>>>()?;

    let model = StackModel { base_models, meta_model, meta_feature_layout: names, oof_folds: config.oof_folds, seed };
    Ok((model, StackTrace { folds, fold_train_indices, meta_features }))
}

impl StackModel {
    pub fn n_features(&self) -> usize {
        self.base_models.first().map_or(0, Model::n_features)
    }

    pub fn meta_features(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.meta_feature_layout.len());
        for m in &self.base_models {
            out.extend_from_slice(&m.predict_proba(x)?);
        }
        Ok(out)
    }

    /// Importance from the GBT base, else the forest base.
    pub fn tree_base_importance(&self) -> Option<Vec<f64>> {
        let pick = |kind| self.base_models.iter().find(|m| m.kind() == kind);
        pick("gbt").or_else(|| pick("forest")).and_then(|m| m.feature_importance().ok())
    }
}

pub fn stack_predict(model: &StackModel, x: &[f64]) -> Result<(u8, Probabilities)> {
    let p = model.meta_model.predict_proba(&model.meta_features(x)?)?;
    Ok((argmax(&p), p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    /// Four separable clusters plus one noise column.
    fn clusters(n_per: usize) -> DatasetTable {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n_per {
            for c in 0..4u8 {
                let t = (i * 4 + c as usize) as f64;
                rows.push(vec![c as f64 * 3.0 + 0.3 * libm::sin(t), libm::cos(t * 7.1)]);
                labels.push(c);
            }
        }
        DatasetTable::new(vec!["x".into(), "noise".into()], rows, labels, None).unwrap()
    }

    #[test]
    fn meta_matrix_shape_and_sums() {
        let t = clusters(12);
        let (model, trace) = stack_train(&t, &StackConfig::quick(), 5).unwrap();
        assert_eq!(trace.meta_features.n_rows(), t.n_rows());
        assert_eq!(trace.meta_features.n_features(), 16);
        assert_eq!(model.meta_feature_layout[0], "logistic_p0");
        assert_eq!(model.meta_feature_layout[15], "gbt_p3");
        for row in trace.meta_features.rows() {
            assert!((row.iter().sum::<f64>() - 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn out_of_fold_rows_never_seen() {
        let t = clusters(10);
        let (_, trace) = stack_train(&t, &StackConfig::quick(), 2).unwrap();
        for (fold, train) in trace.fold_train_indices.iter().enumerate() {
            for row in trace.folds.held_out(fold) {
                assert!(train.binary_search(row).is_err());
            }
        }
        let covered: usize = trace.folds.folds.iter().map(Vec::len).sum();
        assert_eq!(covered, t.n_rows());
    }

    #[test]
    fn base_order_is_irrelevant() {
        let t = clusters(9);
        let cfg = StackConfig::quick();
        let mut rev = cfg.clone();
        rev.bases.reverse();
        let (a, _) = stack_train(&t, &cfg, 11).unwrap();
        let (b, _) = stack_train(&t, &rev, 11).unwrap();
        assert_eq!(a, b);
        let (c, _) = stack_train(&t, &cfg, 11).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn duplicate_base_rejected() {
        let mut cfg = StackConfig::quick();
        cfg.bases.push(BaseSpec::Gbt(GbtConfig::default()));
        assert!(stack_train(&clusters(6), &cfg, 0).is_err());
        cfg.bases.clear();
        assert!(stack_train(&clusters(6), &cfg, 0).is_err());
    }

    #[test]
    fn single_base_stack_follows_its_base() {
        let t = clusters(10);
        let cfg = StackConfig {
            bases: vec![BaseSpec::Logistic(LogisticConfig::default())],
            meta: GbtConfig { n_rounds: 30, ..Default::default() },
            oof_folds: 5,
        };
        let (model, trace) = stack_train(&t, &cfg, 1).unwrap();
        assert_eq!(trace.meta_features.n_features(), 4);
        let base = &model.base_models[0];
        let agree = t
            .rows()
            .filter(|x| stack_predict(&model, x).unwrap().0 == base.predict(x).unwrap())
            .count();
        assert!(agree as f64 / t.n_rows() as f64 >= 0.9);
    }

    #[test]
    fn classes_must_fill_every_fold() {
        let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let t = DatasetTable::new(vec!["x".into()], rows, vec![0, 0, 1, 1], None).unwrap();
        let cfg = StackConfig {
            bases: vec![BaseSpec::Logistic(LogisticConfig::default())],
            meta: GbtConfig { n_rounds: 2, ..Default::default() },
            oof_folds: 2,
        };
        assert!(stack_train(&t, &cfg, 0).is_ok());
        let t1 = DatasetTable::new(vec!["x".into()], vec![vec![0.0], vec![1.0], vec![2.0]], vec![0, 0, 1], None)
            .unwrap();
        assert_eq!(
            stack_train(&t1, &cfg, 0).unwrap_err(),
            Error::ClassTooSmall { class: 1, count: 1, required: 2 }
        );
    }
}

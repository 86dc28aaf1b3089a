//! Experiment orchestration: features, split, SMOTE, standardization,
//! training, evaluation and cross-validation, averaged over split seeds.
//!
//! SMOTE placement is explicit. `global` oversamples the whole table before
//! splitting (synthetic rows derived from test rows can then sit in the
//! training set, and the report flags it as leakage-prone); `train_only`
//! oversamples the training rows of each split or fold. Standardization is
//! always fit on training rows only.
//!
//! Work is split into [`prepare`], [`evaluate_seed`] and [`cv_fold`] so
//! callers can run seeds and folds concurrently; [`assemble`] reduces the
//! results in seed and fold order, which keeps the report deterministic.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{stratified_kfold, stratified_split, DatasetTable, FoldPlan, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::features::{build_matrix, feature_manifest, ColumnProvenance, DescriptorRecord, FeatureConfig, StandardizationParams};
use crate::formula::MassTable;
use crate::metrics::{auc_summary, average_reports, classification_report, roc_curves, AveragedReport, ClassReport, RocCurve};
use crate::models::{argmax, train_model, ModelSpec};
use crate::resample::{smote, SmoteConfig, SyntheticSample};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    #[default]
    OriginalOnly,
    WithInteractions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoteMode {
    #[default]
    Off,
    Global,
    TrainOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub seeds: Vec<u64>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { test_fraction: 0.2, seeds: (0..5).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    pub k: usize,
    pub seed: u64,
    /// Model to cross-validate; the experiment's model when absent.
    pub model: Option<ModelSpec>,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self { k: 5, seed: 0, model: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub feature_mode: FeatureMode,
    pub smote_mode: SmoteMode,
    pub smote: SmoteConfig,
    pub model: ModelSpec,
    pub split: SplitConfig,
    pub cv: Option<CvConfig>,
    /// Extra `a * b` interaction columns, by column name.
    pub extra_products: Vec<(String, String)>,
}

impl ExperimentConfig {
    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            include_interactions: self.feature_mode == FeatureMode::WithInteractions,
            extra_products: self.extra_products.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.split.seeds.is_empty() {
            return Err(Error::InvalidParameter("seed list must not be empty".into()));
        }
        if !(self.split.test_fraction > 0.0 && self.split.test_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "test fraction must lie in (0, 1), got {}",
                self.split.test_fraction
            )));
        }
        if let Some(cv) = &self.cv {
            if cv.k < 2 {
                return Err(Error::InvalidParameter(format!("k must be ≥ 2, got {}", cv.k)));
            }
        }
        Ok(())
    }
}

/// Synthetic rows whose base or neighbor row ended up on the other side of
/// a train/test boundary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageAudit {
    pub synthetic_rows: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub train_rows: usize,
    pub test_rows: usize,
    /// Class counts the model was trained on, after any oversampling.
    pub train_distribution: [usize; NUM_CLASSES],
    pub report: ClassReport,
    pub auc: BTreeMap<u8, f64>,
    pub roc: Vec<RocCurve>,
    pub leakage_audit: Option<LeakageAudit>,
    #[serde(skip)]
    pub importance: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub model: String,
    pub fold_f1: Vec<f64>,
    pub mean_f1: f64,
    /// `max - min` of the fold scores.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub importance: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset_sha256: Option<String>,
    pub version: String,
    pub smote_mode: SmoteMode,
    pub leakage_prone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config: ExperimentConfig,
    pub feature_names: Vec<String>,
    pub input_distribution: [usize; NUM_CLASSES],
    pub per_seed: Vec<SeedResult>,
    pub averaged: AveragedReport,
    /// Per-class AUC averaged over the seeds in which the class had a curve.
    pub mean_auc: BTreeMap<u8, f64>,
    pub feature_importance: Option<Vec<FeatureImportance>>,
    pub cv: Option<CvReport>,
    pub provenance: Provenance,
}

/// Featurize descriptor records according to the experiment's feature mode.
pub fn featurize(
    config: &ExperimentConfig,
    records: &[DescriptorRecord],
    labels: Vec<u8>,
    row_ids: Option<Vec<String>>,
    masses: &MassTable,
) -> Result<DatasetTable> {
    build_matrix(records, masses, &config.feature_config())
        .and_then(|m| m.into_table(labels, row_ids))
        .map_err(|e| e.in_stage("features", 0))
}

/// Keep the columns the feature mode asks for. In `original_only` mode the
/// interaction columns (named interactions and configured extra products)
/// are dropped; other columns pass through untouched.
pub fn select_features(config: &ExperimentConfig, table: &DatasetTable) -> Result<DatasetTable> {
    if config.feature_mode == FeatureMode::WithInteractions {
        return Ok(table.clone());
    }
    let mut with = config.feature_config();
    with.include_interactions = true;
    let interaction: Vec<String> = feature_manifest(&with)?
        .into_iter()
        .filter(|c| c.provenance == ColumnProvenance::Interaction)
        .map(|c| c.name)
        .collect();
    let keep: Vec<usize> = (0..table.n_features())
        .filter(|&j| !interaction.contains(&table.feature_names()[j]))
        .collect();
    if keep.len() == table.n_features() {
        return Ok(table.clone());
    }
    let names = keep.iter().map(|&j| table.feature_names()[j].clone()).collect();
    let values = table.rows().flat_map(|r| keep.iter().map(move |&j| r[j])).collect();
    DatasetTable::from_flat(names, values, table.labels().to_vec(), table.row_ids().map(<[String]>::to_vec))
}

/// The table every seed and fold draws from.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub input_distribution: [usize; NUM_CLASSES],
    /// Feature-selected, and globally oversampled in `global` mode.
    pub table: DatasetTable,
    /// Number of original rows at the start of `table`.
    pub n_original: usize,
    /// Global-mode provenance; indices refer to rows of `table`.
    pub synthetic: Vec<SyntheticSample>,
}

pub fn prepare(config: &ExperimentConfig, table: &DatasetTable) -> Result<Prepared> {
    config.validate()?;
    let selected = select_features(config, table).map_err(|e| e.in_stage("features", 0))?;
    let n_original = selected.n_rows();
    let input_distribution = selected.class_distribution();
    if config.smote_mode == SmoteMode::Global {
        let out = smote(&selected, &config.smote).map_err(|e| e.in_stage("smote", config.smote.seed))?;
        return Ok(Prepared { input_distribution, table: out.table, n_original, synthetic: out.synthetic });
    }
    Ok(Prepared { input_distribution, table: selected, n_original, synthetic: Vec::new() })
}

/// Audit the global-mode synthetic rows against one partition.
fn global_audit(prepared: &Prepared, in_test: &[bool]) -> LeakageAudit {
    let violations = prepared
        .synthetic
        .iter()
        .enumerate()
        .filter(|(j, s)| {
            let side = in_test[prepared.n_original + j];
            in_test[s.base_index] != side || in_test[s.neighbor_index] != side
        })
        .count();
    LeakageAudit { synthetic_rows: prepared.synthetic.len(), violations }
}

struct Fitted {
    report: ClassReport,
    probs: Vec<[f64; NUM_CLASSES]>,
    train_distribution: [usize; NUM_CLASSES],
    train_rows: usize,
    audit: Option<LeakageAudit>,
    importance: Option<Vec<f64>>,
}

/// Oversample (train-only mode), standardize, train and score one partition.
fn fit_and_score(
    config: &ExperimentConfig,
    spec: &ModelSpec,
    prepared: &Prepared,
    train_idx: &[usize],
    test_idx: &[usize],
    seed: u64,
    smote_seed: u64,
) -> Result<Fitted> {
    let table = &prepared.table;
    let mut in_test = alloc::vec![false; table.n_rows()];
    for &i in test_idx {
        in_test[i] = true;
    }
    let mut train = table.subset(train_idx);
    let test = table.subset(test_idx);
    let audit = match config.smote_mode {
        SmoteMode::Off => None,
        SmoteMode::Global => Some(global_audit(prepared, &in_test)),
        SmoteMode::TrainOnly => {
            let cfg = SmoteConfig { seed: smote_seed, ..config.smote.clone() };
            let out = smote(&train, &cfg).map_err(|e| e.in_stage("smote", seed))?;
            let violations = out
                .synthetic
                .iter()
                .filter(|s| in_test[train_idx[s.base_index]] || in_test[train_idx[s.neighbor_index]])
                .count();
            let audit = LeakageAudit { synthetic_rows: out.synthetic.len(), violations };
            train = out.table;
            Some(audit)
        }
    };
    let scaler = StandardizationParams::fit(&train).map_err(|e| e.in_stage("standardize", seed))?;
    let train_z = scaler.apply(&train).map_err(|e| e.in_stage("standardize", seed))?;
    let test_z = scaler.apply(&test).map_err(|e| e.in_stage("standardize", seed))?;
    let model = train_model(spec, &train_z, seed).map_err(|e| e.in_stage("train", seed))?;
    let probs = model.predict_table(&test_z).map_err(|e| e.in_stage("predict", seed))?;
    let predicted: Vec<u8> = probs.iter().map(argmax).collect();
    let report = classification_report(test.labels(), &predicted).map_err(|e| e.in_stage("metrics", seed))?;
    Ok(Fitted {
        report,
        probs,
        train_distribution: train.class_distribution(),
        train_rows: train.n_rows(),
        audit,
        importance: model.feature_importance().ok(),
    })
}

pub fn evaluate_seed(config: &ExperimentConfig, prepared: &Prepared, seed: u64) -> Result<SeedResult> {
    let plan = stratified_split(&prepared.table, config.split.test_fraction, seed)
        .map_err(|e| e.in_stage("split", seed))?;
    let fit = fit_and_score(
        config,
        &config.model,
        prepared,
        &plan.train_indices,
        &plan.test_indices,
        seed,
        derive_seed(config.smote.seed, seed),
    )?;
    let truth: Vec<u8> = plan.test_indices.iter().map(|&i| prepared.table.labels()[i]).collect();
    let roc = roc_curves(&truth, &fit.probs).map_err(|e| e.in_stage("metrics", seed))?;
    Ok(SeedResult {
        seed,
        train_rows: fit.train_rows,
        test_rows: plan.test_indices.len(),
        train_distribution: fit.train_distribution,
        report: fit.report,
        auc: auc_summary(&roc),
        roc,
        leakage_audit: fit.audit,
        importance: fit.importance,
    })
}

pub fn cv_plan(config: &ExperimentConfig, prepared: &Prepared) -> Result<Option<FoldPlan>> {
    config
        .cv
        .as_ref()
        .map(|cv| stratified_kfold(&prepared.table, cv.k, cv.seed).map_err(|e| e.in_stage("cv", cv.seed)))
        .transpose()
}

/// Held-out macro F1 of one cross-validation fold.
pub fn cv_fold(config: &ExperimentConfig, prepared: &Prepared, plan: &FoldPlan, fold: usize) -> Result<f64> {
    let cv = config.cv.clone().unwrap_or_default();
    let spec = cv.model.as_ref().unwrap_or(&config.model);
    let smote_seed = derive_seed(derive_seed(config.smote.seed, cv.seed), fold as u64);
    fit_and_score(config, spec, prepared, &plan.training(fold), plan.held_out(fold), cv.seed, smote_seed)
        .map(|f| f.report.macro_f1)
        .map_err(|e| e.in_fold(fold))
}

pub fn cv_summary(config: &ExperimentConfig, fold_f1: Vec<f64>) -> CvReport {
    let cv = config.cv.clone().unwrap_or_default();
    let model = cv.model.as_ref().unwrap_or(&config.model).kind().into();
    let mean_f1 = fold_f1.iter().sum::<f64>() / fold_f1.len() as f64;
    let max = fold_f1.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = fold_f1.iter().copied().fold(f64::INFINITY, f64::min);
    CvReport { k: cv.k, seed: cv.seed, model, fold_f1, mean_f1, spread: max - min }
}

/// Reduce per-seed results (in seed-list order) into the report.
pub fn assemble(
    config: &ExperimentConfig,
    prepared: &Prepared,
    per_seed: Vec<SeedResult>,
    cv: Option<CvReport>,
) -> Result<EvaluationReport> {
    let reports: Vec<ClassReport> = per_seed.iter().map(|s| s.report.clone()).collect();
    let averaged = average_reports(&reports)?;

    let mut auc_sums: BTreeMap<u8, (f64, usize)> = BTreeMap::new();
    for s in &per_seed {
        for (&c, &a) in &s.auc {
            let e = auc_sums.entry(c).or_insert((0.0, 0));
            e.0 += a;
            e.1 += 1;
        }
    }
    let mean_auc = auc_sums.into_iter().map(|(c, (s, n))| (c, s / n as f64)).collect();

    let feature_names = prepared.table.feature_names().to_vec();
    let feature_importance = if per_seed.iter().all(|s| s.importance.is_some()) {
        let mut acc = alloc::vec![0.0; feature_names.len()];
        for s in &per_seed {
            for (a, v) in acc.iter_mut().zip(s.importance.as_deref().unwrap_or_default()) {
                *a += v;
            }
        }
        let n = per_seed.len() as f64;
        Some(
            feature_names
                .iter()
                .zip(acc)
                .map(|(f, a)| FeatureImportance { feature: f.clone(), importance: a / n })
                .collect(),
        )
    } else {
        None
    };

    Ok(EvaluationReport {
        config: config.clone(),
        feature_names,
        input_distribution: prepared.input_distribution,
        per_seed,
        averaged,
        mean_auc,
        feature_importance,
        cv,
        provenance: Provenance {
            dataset_sha256: None,
            version: String::from(env!("CARGO_PKG_VERSION")),
            smote_mode: config.smote_mode,
            leakage_prone: config.smote_mode == SmoteMode::Global,
        },
    })
}

/// Cross-validate on a featurized table.
pub fn cross_validate(config: &ExperimentConfig, table: &DatasetTable) -> Result<CvReport> {
    let mut config = config.clone();
    config.cv.get_or_insert_with(CvConfig::default);
    let prepared = prepare(&config, table)?;
    let plan = cv_plan(&config, &prepared)?.unwrap_or_else(|| unreachable!());
    let folds = (0..plan.k).map(|f| cv_fold(&config, &prepared, &plan, f)).collect::<Result<Vec<_>>>()?;
    Ok(cv_summary(&config, folds))
}

/// Full experiment on a featurized table, sequentially.
pub fn run_experiment(config: &ExperimentConfig, table: &DatasetTable) -> Result<EvaluationReport> {
    let prepared = prepare(config, table)?;
    let per_seed = config
        .split
        .seeds
        .iter()
        .map(|&s| evaluate_seed(config, &prepared, s))
        .collect::<Result<Vec<_>>>()?;
    let cv = match cv_plan(config, &prepared)? {
        Some(plan) => Some(cv_summary(
            config,
            (0..plan.k).map(|f| cv_fold(config, &prepared, &plan, f)).collect::<Result<Vec<_>>>()?,
        )),
        None => None,
    };
    assemble(config, &prepared, per_seed, cv)
}

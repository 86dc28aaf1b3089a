//! In-memory tables plus stratified splits and folds.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Structural dimensionality classes 0D, 1D, 2D and 3D.
pub const NUM_CLASSES: usize = 4;

/// Per-class counts indexed by label.
pub type ClassCounts = [usize; NUM_CLASSES];

/// Feature matrix with class labels. Rows are stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetTable {
    feature_names: Vec<String>,
    values: Vec<f64>,
    labels: Vec<u8>,
    row_ids: Option<Vec<String>>,
}

impl DatasetTable {
    pub fn new(
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<u8>,
        row_ids: Option<Vec<String>>,
    ) -> Result<Self> {
        let width = feature_names.len();
        let mut values = Vec::with_capacity(rows.len() * width);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::InvalidTable(format!(
                    "row {i} has {} values, expected {width}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(feature_names, values, labels, row_ids)
    }

    pub fn from_flat(
        feature_names: Vec<String>,
        values: Vec<f64>,
        labels: Vec<u8>,
        row_ids: Option<Vec<String>>,
    ) -> Result<Self> {
        let width = feature_names.len();
        let mut seen = BTreeSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidTable(format!("duplicate feature name `{name}`")));
            }
        }
        let expected = labels.len() * width;
        if values.len() != expected {
            return Err(Error::InvalidTable(format!(
                "{} values for {} rows of width {width}",
                values.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| usize::from(l) >= NUM_CLASSES) {
            return Err(Error::InvalidLabel { label: u64::from(bad) });
        }
        if let Some(ids) = &row_ids {
            if ids.len() != labels.len() {
                return Err(Error::InvalidTable(format!(
                    "{} row ids for {} rows",
                    ids.len(),
                    labels.len()
                )));
            }
        }
        Ok(Self { feature_names, values, labels, row_ids })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn row_ids(&self) -> Option<&[String]> {
        self.row_ids.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.n_features();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks_exact on a zero width would panic.
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.values[row * self.n_features() + feature]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Rows at `indices`, in that order; duplicates allowed.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.n_features());
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self {
            feature_names: self.feature_names.clone(),
            values,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            row_ids: self
                .row_ids
                .as_ref()
                .map(|ids| indices.iter().map(|&i| ids[i].clone()).collect()),
        }
    }

    /// Same rows with feature values replaced.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::from_flat(
            self.feature_names.clone(),
            values,
            self.labels.clone(),
            self.row_ids.clone(),
        )
    }

    /// Keep only the first `n` feature columns.
    pub fn prefix_columns(&self, n: usize) -> Self {
        let n = n.min(self.n_features());
        let mut values = Vec::with_capacity(self.n_rows() * n);
        for row in self.rows() {
            values.extend_from_slice(&row[..n]);
        }
        Self {
            feature_names: self.feature_names[..n].to_vec(),
            values,
            labels: self.labels.clone(),
            row_ids: self.row_ids.clone(),
        }
    }

    /// Members of `class` in row order.
    pub fn class_members(&self, class: u8) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.labels[i] == class).collect()
    }

    pub fn class_distribution(&self) -> ClassCounts {
        class_distribution(&self.labels)
    }
}

pub fn class_distribution(labels: &[u8]) -> ClassCounts {
    let mut counts = [0; NUM_CLASSES];
    for &l in labels {
        counts[usize::from(l)] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
    pub test_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn held_out(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    /// Every row index outside `fold`, ascending.
    pub fn training(&self, fold: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(f, _)| f != fold)
            .flat_map(|(_, rows)| rows.iter().copied())
            .collect();
        idx.sort_unstable();
        idx
    }

    /// Fold number of every row.
    pub fn assignment(&self, n_rows: usize) -> Vec<usize> {
        let mut out = alloc::vec![usize::MAX; n_rows];
        for (f, rows) in self.folds.iter().enumerate() {
            for &r in rows {
                out[r] = f;
            }
        }
        out
    }
}

fn round(x: f64) -> usize {
    libm::round(x) as usize
}

/// Stratified train/test split.
///
/// Each class contributes `round(count * test_fraction)` test rows, kept
/// within `[1, count - 1]`; the total is then nudged to
/// `round(n * test_fraction)` by adjusting the classes whose rounding was
/// furthest off, ties to the lower class.
pub fn stratified_split(table: &DatasetTable, test_fraction: f64, seed: u64) -> Result<SplitPlan> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let counts = table.class_distribution();
    let present: Vec<usize> = (0..NUM_CLASSES).filter(|&c| counts[c] > 0).collect();
    if present.is_empty() {
        return Err(Error::NoRows);
    }
    for &c in &present {
        if counts[c] < 2 {
            return Err(Error::ClassTooSmall { class: c as u8, count: counts[c], required: 2 });
        }
    }

    let n = table.n_rows();
    let quota = |c: usize| counts[c] as f64 * test_fraction;
    let mut take = [0usize; NUM_CLASSES];
    for &c in &present {
        take[c] = round(quota(c)).clamp(1, counts[c] - 1);
    }
    let target = round(n as f64 * test_fraction).clamp(present.len(), n - present.len());
    loop {
        let total: usize = take.iter().sum();
        if total == target {
            break;
        }
        // Pick the class whose rounding moved furthest in the direction we must undo.
        let pick = if total > target {
            present
                .iter()
                .copied()
                .filter(|&c| take[c] > 1)
                .fold(None, |best: Option<usize>, c| match best {
                    Some(b) if take[b] as f64 - quota(b) >= take[c] as f64 - quota(c) => Some(b),
                    _ => Some(c),
                })
        } else {
            present
                .iter()
                .copied()
                .filter(|&c| take[c] + 1 < counts[c])
                .fold(None, |best: Option<usize>, c| match best {
                    Some(b) if quota(b) - take[b] as f64 >= quota(c) - take[c] as f64 => Some(b),
                    _ => Some(c),
                })
        };
        match pick {
            Some(c) if total > target => take[c] -= 1,
            Some(c) => take[c] += 1,
            None => break,
        }
    }

    let mut rng = rng::seeded(seed);
    let mut test = Vec::with_capacity(target);
    let mut train = Vec::with_capacity(n - target);
    for c in 0..NUM_CLASSES {
        let mut members = table.class_members(c as u8);
        members.shuffle(&mut rng);
        test.extend_from_slice(&members[..take[c]]);
        train.extend_from_slice(&members[take[c]..]);
    }
    test.sort_unstable();
    train.sort_unstable();
    Ok(SplitPlan { train_indices: train, test_indices: test, seed, test_fraction })
}

/// Stratified k-fold partition. Within each class the shuffled members are
/// dealt out in contiguous blocks; the `count % k` leftover rows go to the
/// lowest-numbered folds.
pub fn stratified_kfold(table: &DatasetTable, k: usize, seed: u64) -> Result<FoldPlan> {
    stratified_kfold_labels(table.labels(), k, seed)
}

pub fn stratified_kfold_labels(labels: &[u8], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be ≥ 2, got {k}")));
    }
    if labels.is_empty() {
        return Err(Error::NoRows);
    }
    let counts = class_distribution(labels);
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 && count < k {
            return Err(Error::ClassTooSmall { class: c as u8, count, required: k });
        }
    }
    let mut rng = rng::seeded(seed);
    let mut folds = alloc::vec![Vec::new(); k];
    for c in 0..NUM_CLASSES {
        let mut members: Vec<usize> =
            (0..labels.len()).filter(|&i| usize::from(labels[i]) == c).collect();
        members.shuffle(&mut rng);
        let base = members.len() / k;
        let extra = members.len() % k;
        let mut at = 0;
        for (f, fold) in folds.iter_mut().enumerate() {
            let size = base + usize::from(f < extra);
            fold.extend_from_slice(&members[at..at + size]);
            at += size;
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(FoldPlan { k, folds, seed })
}

//! SMOTE oversampling.
//!
//! Synthetic rows are `x_new = x_base + lambda * (x_neighbor - x_base)` with
//! `lambda ~ U[0, 1)`, where the neighbor is one of the base row's k nearest
//! same-class rows. Neighbors are searched in standardized space; the
//! interpolation itself happens in the original feature units.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetTable, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::features::StandardizationParams;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoteTarget {
    /// The majority class count.
    Auto,
    Count(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceSpace {
    #[default]
    StandardizedEuclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseSelection {
    /// Walk the minority rows in index order, repeatedly, until the target is met.
    #[default]
    Cycle,
    /// Draw every base row uniformly at random.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    pub target_per_class: SmoteTarget,
    pub seed: u64,
    pub distance_space: DistanceSpace,
    pub base_selection: BaseSelection,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            target_per_class: SmoteTarget::Auto,
            seed: 0,
            distance_space: DistanceSpace::StandardizedEuclidean,
            base_selection: BaseSelection::Cycle,
        }
    }
}

/// Provenance of one synthetic row. Indices refer to rows of the input table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSample {
    pub base_index: usize,
    pub neighbor_index: usize,
    pub lambda: f64,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoteOutput {
    /// Original rows first, in their original order, then synthetic rows.
    pub table: DatasetTable,
    pub synthetic: Vec<SyntheticSample>,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn standardized_rows(table: &DatasetTable) -> Result<Vec<f64>> {
    if table.n_rows() < 2 {
        return Ok(table.values().to_vec());
    }
    let params = StandardizationParams::fit(table)?;
    Ok(params.apply(table)?.values().to_vec())
}

fn neighbors_of(members: &[usize], z: &[f64], width: usize, k: usize) -> Vec<Vec<usize>> {
    let row = |i: usize| &z[i * width..(i + 1) * width];
    members
        .iter()
        .map(|&i| {
            let mut cand: Vec<(f64, usize)> = members
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| (squared_distance(row(i), row(j)), j))
                .collect();
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

fn check_class_size(class: u8, count: usize, k: usize) -> Result<()> {
    if count < k + 1 {
        return Err(Error::ClassTooSmall { class, count, required: k + 1 });
    }
    Ok(())
}

/// The k nearest same-class rows of every member of `class`, nearest first,
/// ties to the lower row index. Returned in member (row) order.
pub fn knn_within_class(table: &DatasetTable, class: u8, k: usize) -> Result<Vec<(usize, Vec<usize>)>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k_neighbors must be ≥ 1".into()));
    }
    let members = table.class_members(class);
    check_class_size(class, members.len(), k)?;
    let z = standardized_rows(table)?;
    let lists = neighbors_of(&members, &z, table.n_features(), k);
    Ok(members.into_iter().zip(lists).collect())
}

/// Oversample every class present in `table` up to the target count.
/// Classes with no rows stay empty.
pub fn smote(table: &DatasetTable, config: &SmoteConfig) -> Result<SmoteOutput> {
    let k = config.k_neighbors;
    if k == 0 {
        return Err(Error::InvalidParameter("k_neighbors must be ≥ 1".into()));
    }
    if table.is_empty() {
        return Err(Error::NoRows);
    }
    let counts = table.class_distribution();
    let majority = counts.iter().copied().max().unwrap_or(0);
    let target = match config.target_per_class {
        SmoteTarget::Auto => majority,
        SmoteTarget::Count(t) => {
            if t < majority {
                return Err(Error::InvalidParameter(format!(
                    "target {t} is below the existing class count {majority}"
                )));
            }
            t
        }
    };
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 && count < target {
            check_class_size(c as u8, count, k)?;
        }
    }

    let width = table.n_features();
    let z = standardized_rows(table)?;
    let mut rng = rng::seeded(config.seed);
    let mut synthetic = Vec::new();
    for (c, &count) in counts.iter().enumerate().take(NUM_CLASSES) {
        let needed = target - count;
        if count == 0 || needed == 0 {
            continue;
        }
        let members = table.class_members(c as u8);
        let neighbors = neighbors_of(&members, &z, width, k);
        for step in 0..needed {
            let slot = match config.base_selection {
                BaseSelection::Cycle => step % members.len(),
                BaseSelection::Random => rng.gen_range(0..members.len()),
            };
            let base = members[slot];
            let neighbor = neighbors[slot][rng.gen_range(0..k)];
            let lambda: f64 = rng.gen();
            let features = interpolate(table.row(base), table.row(neighbor), lambda);
            synthetic.push(SyntheticSample { base_index: base, neighbor_index: neighbor, lambda, features });
        }
    }

    let mut values = table.values().to_vec();
    let mut labels = table.labels().to_vec();
    for s in &synthetic {
        values.extend_from_slice(&s.features);
        labels.push(table.labels()[s.base_index]);
    }
    let row_ids = table.row_ids().map(|ids| {
        let mut ids: Vec<String> = ids.to_vec();
        ids.extend((0..synthetic.len()).map(|j| format!("synthetic-{j}")));
        ids
    });
    let table = DatasetTable::from_flat(table.feature_names().to_vec(), values, labels, row_ids)?;
    Ok(SmoteOutput { table, synthetic })
}

/// `base + lambda * (neighbor - base)`, clamped to the segment so rounding
/// can never leave it.
pub fn interpolate(base: &[f64], neighbor: &[f64], lambda: f64) -> Vec<f64> {
    base.iter()
        .zip(neighbor)
        .map(|(&b, &n)| {
            let x = b + lambda * (n - b);
            x.clamp(b.min(n), b.max(n))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::string::ToString;

    fn table(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> DatasetTable {
        let names = (0..rows[0].len()).map(|j| format!("f{j}")).collect();
        DatasetTable::new(names, rows, labels, None).unwrap()
    }

    #[test]
    fn collinear_neighbors() {
        let t = table(vec![vec![0.0], vec![1.0], vec![10.0], vec![3.0]], vec![1, 1, 1, 0]);
        let nn = knn_within_class(&t, 1, 1).unwrap();
        assert_eq!(nn, vec![(0, vec![1]), (1, vec![0]), (2, vec![1])]);
    }

    #[test]
    fn knn_class_too_small() {
        let t = table(vec![vec![0.0], vec![1.0], vec![2.0]], vec![1, 1, 0]);
        assert_eq!(
            knn_within_class(&t, 1, 2),
            Err(Error::ClassTooSmall { class: 1, count: 2, required: 3 })
        );
    }

    #[test]
    fn duplicate_points_tie_to_lower_index() {
        let t = table(vec![vec![5.0], vec![5.0], vec![5.0], vec![0.0]], vec![2, 2, 2, 2]);
        let nn = knn_within_class(&t, 2, 2).unwrap();
        assert_eq!(nn[0].1, vec![1, 2]);
        assert_eq!(nn[1].1, vec![0, 2]);
        assert_eq!(nn[2].1, vec![0, 1]);
    }

    #[test]
    fn interpolation_endpoints() {
        let b = [1.0, -2.0, 3.5];
        let n = [4.0, 2.0, 3.5];
        assert_eq!(interpolate(&b, &n, 0.0), b.to_vec());
        assert_eq!(interpolate(&b, &n, 1.0), n.to_vec());
        assert_eq!(interpolate(&[0.0, 0.0], &[2.0, 2.0], 0.5), vec![1.0, 1.0]);
    }

    #[test]
    fn balances_to_majority() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, n) in [(0u8, 25usize), (1, 49), (2, 334), (3, 86)] {
            for i in 0..n {
                rows.push(vec![c as f64 + i as f64 * 0.01, (i % 7) as f64]);
                labels.push(c);
            }
        }
        let t = table(rows, labels);
        let out = smote(&t, &SmoteConfig::default()).unwrap();
        assert_eq!(out.table.n_rows(), 1336);
        assert_eq!(out.table.class_distribution(), [334; 4]);
        for i in 0..t.n_rows() {
            assert_eq!(out.table.row(i), t.row(i));
        }
        for (j, s) in out.synthetic.iter().enumerate() {
            let row = out.table.row(t.n_rows() + j);
            assert_eq!(row, &s.features[..]);
            assert_eq!(t.labels()[s.base_index], t.labels()[s.neighbor_index]);
            assert_eq!(out.table.labels()[t.n_rows() + j], t.labels()[s.base_index]);
        }
        let again = smote(&t, &SmoteConfig::default()).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn cycle_covers_every_minority_row() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let labels: Vec<u8> = (0..20).map(|i| if i < 6 { 0 } else { 1 }).collect();
        let out = smote(&table(rows, labels), &SmoteConfig { k_neighbors: 2, ..Default::default() }).unwrap();
        let bases: Vec<usize> = out.synthetic.iter().map(|s| s.base_index).collect();
        assert_eq!(bases, vec![0, 1, 2, 3, 4, 5, 0, 1]);
    }

    #[test]
    fn smote_errors() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let labels: Vec<u8> = (0..10).map(|i| if i < 3 { 0 } else { 1 }).collect();
        let t = table(rows, labels);
        assert_eq!(
            smote(&t, &SmoteConfig::default()),
            Err(Error::ClassTooSmall { class: 0, count: 3, required: 6 })
        );
        let err = smote(&t, &SmoteConfig { k_neighbors: 2, target_per_class: SmoteTarget::Count(5), ..Default::default() })
            .unwrap_err();
        assert!(err.to_string().contains("below"));
    }
}

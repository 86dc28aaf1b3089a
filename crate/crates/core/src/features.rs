//! Descriptor records, interaction features and standardization.
//!
//! Column order of a featurized matrix is fixed: the nine numeric original
//! descriptors, then the ten composition features derived from the two
//! formula strings, then (when enabled) the nine interaction features and any
//! configured extra pairwise products. Turning interactions off therefore
//! yields a prefix of the full matrix.
//!
//! Interaction formulas (`chain+1` guards every per-chain denominator):
//!
//! | name | formula |
//! |------|---------|
//! | `total_alkyl_chain_weight` | `num_alkyl_chains * longest_chain_c_count * m(CH2)` |
//! | `ring_length_interaction` | `num_cation_rings * longest_alkyl_chain` |
//! | `terminal_n_per_chain` | `terminal_nitrogens / (longest_chain_c_count + 1)` |
//! | `mw_per_chain_length` | `organic_mw / (longest_chain_c_count + 1)` |
//! | `cation_complexity` | `num_cation_rings + num_alkyl_chains + terminal_nitrogens` |
//! | `nitrogen_weight_ratio` | `organic_n_count * m(N) / organic_mw` |
//! | `compactness` | `(ring_c_count + ring_non_c_count) / max(1, organic_heavy_atom_count)` |
//! | `hydrophilicity_index` | `(terminal_nitrogens + water_present) / (longest_chain_c_count + 1)` |
//! | `size_complexity` | `organic_heavy_atom_count * num_same_cations` |

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetTable;
use crate::error::{Error, Result};
use crate::formula::{composition_features, parse_formula, CompositionFeatures, MassTable};

/// The eleven original descriptors of one compound.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptorRecord {
    pub organic_formula: String,
    pub inorganic_formula: String,
    pub num_cation_rings: u32,
    pub ring_c_count: u32,
    pub ring_non_c_count: u32,
    pub longest_alkyl_chain: u32,
    pub num_alkyl_chains: u32,
    pub water_present: bool,
    /// Nitrogens bonded to exactly one non-hydrogen atom.
    pub terminal_nitrogens: u32,
    pub longest_chain_c_count: u32,
    pub num_same_cations: u32,
}

impl DescriptorRecord {
    pub const NUMERIC_NAMES: [&'static str; 9] = [
        "num_cation_rings",
        "ring_c_count",
        "ring_non_c_count",
        "longest_alkyl_chain",
        "num_alkyl_chains",
        "water_present",
        "terminal_nitrogens",
        "longest_chain_c_count",
        "num_same_cations",
    ];

    pub fn validate(&self) -> Result<()> {
        if self.num_cation_rings == 0 && self.ring_c_count + self.ring_non_c_count != 0 {
            return Err(Error::InvalidRecord(
                "ring atom counts must be zero when there are no cation rings".into(),
            ));
        }
        if self.longest_chain_c_count > self.longest_alkyl_chain {
            return Err(Error::InvalidRecord(format!(
                "longest chain C count {} exceeds longest alkyl chain {}",
                self.longest_chain_c_count, self.longest_alkyl_chain
            )));
        }
        if self.num_same_cations == 0 {
            return Err(Error::InvalidRecord("num_same_cations must be positive".into()));
        }
        Ok(())
    }

    pub fn numeric_values(&self) -> [f64; 9] {
        [
            f64::from(self.num_cation_rings),
            f64::from(self.ring_c_count),
            f64::from(self.ring_non_c_count),
            f64::from(self.longest_alkyl_chain),
            f64::from(self.num_alkyl_chains),
            if self.water_present { 1.0 } else { 0.0 },
            f64::from(self.terminal_nitrogens),
            f64::from(self.longest_chain_c_count),
            f64::from(self.num_same_cations),
        ]
    }
}

pub const INTERACTION_NAMES: [&str; 9] = [
    "total_alkyl_chain_weight",
    "ring_length_interaction",
    "terminal_n_per_chain",
    "mw_per_chain_length",
    "cation_complexity",
    "nitrogen_weight_ratio",
    "compactness",
    "hydrophilicity_index",
    "size_complexity",
];

const INTERACTION_FORMULAS: [&str; 9] = [
    "num_alkyl_chains * longest_chain_c_count * mass(CH2)",
    "num_cation_rings * longest_alkyl_chain",
    "terminal_nitrogens / (longest_chain_c_count + 1)",
    "organic_mw / (longest_chain_c_count + 1)",
    "num_cation_rings + num_alkyl_chains + terminal_nitrogens",
    "organic_n_count * mass(N) / organic_mw",
    "(ring_c_count + ring_non_c_count) / max(1, organic_heavy_atom_count)",
    "(terminal_nitrogens + water_present) / (longest_chain_c_count + 1)",
    "organic_heavy_atom_count * num_same_cations",
];

const COMPOSITION_FORMULAS: [&str; 10] = [
    "count(C) in organic formula",
    "count(H) in organic formula",
    "count(N) in organic formula",
    "count(O) in organic formula",
    "non-hydrogen atoms in organic formula",
    "sum(count * mass) over organic formula",
    "non-halide metal atoms in inorganic formula",
    "count(F + Cl + Br + I) in inorganic formula",
    "inorganic_halide_count / max(1, inorganic_metal_count)",
    "sum(count * mass) over inorganic formula",
];

/// Interaction features for one record. Every denominator is guarded, so the
/// output is finite for any valid record.
pub fn engineer_features(
    record: &DescriptorRecord,
    comp: &CompositionFeatures,
    masses: &MassTable,
) -> Result<Vec<(&'static str, f64)>> {
    let ch2 = masses.mass("C")? + 2.0 * masses.mass("H")?;
    let n_mass = masses.mass("N")?;
    let rings = f64::from(record.num_cation_rings);
    let chains = f64::from(record.num_alkyl_chains);
    let terminal_n = f64::from(record.terminal_nitrogens);
    let chain_c = f64::from(record.longest_chain_c_count);
    let water = if record.water_present { 1.0 } else { 0.0 };
    let ring_atoms = f64::from(record.ring_c_count) + f64::from(record.ring_non_c_count);
    let nitrogen_weight_ratio =
        if comp.organic_mw > 0.0 { comp.organic_n_count * n_mass / comp.organic_mw } else { 0.0 };
    let values = [
        chains * chain_c * ch2,
        rings * f64::from(record.longest_alkyl_chain),
        terminal_n / (chain_c + 1.0),
        comp.organic_mw / (chain_c + 1.0),
        rings + chains + terminal_n,
        nitrogen_weight_ratio,
        ring_atoms / comp.organic_heavy_atom_count.max(1.0),
        (terminal_n + water) / (chain_c + 1.0),
        comp.organic_heavy_atom_count * f64::from(record.num_same_cations),
    ];
    Ok(INTERACTION_NAMES.iter().copied().zip(values).collect())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub include_interactions: bool,
    /// Extra `a * b` columns appended after the named interactions; only
    /// used when interactions are on.
    #[serde(default)]
    pub extra_products: Vec<(String, String)>,
}

impl FeatureConfig {
    pub fn original_only() -> Self {
        Self { include_interactions: false, extra_products: Vec::new() }
    }

    pub fn with_interactions() -> Self {
        Self { include_interactions: true, extra_products: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnProvenance {
    Original,
    Composition,
    Interaction,
}

/// One entry of the feature manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    pub formula: String,
    pub provenance: ColumnProvenance,
}

fn base_columns(include_interactions: bool) -> Vec<FeatureColumn> {
    let mut cols = Vec::new();
    for name in DescriptorRecord::NUMERIC_NAMES {
        let formula = if name == "water_present" {
            "descriptor column (boolean as 0/1; may be fractional after SMOTE)".to_string()
        } else {
            "descriptor column".to_string()
        };
        cols.push(FeatureColumn { name: name.to_string(), formula, provenance: ColumnProvenance::Original });
    }
    for (name, formula) in CompositionFeatures::NAMES.iter().zip(COMPOSITION_FORMULAS) {
        cols.push(FeatureColumn {
            name: name.to_string(),
            formula: formula.to_string(),
            provenance: ColumnProvenance::Composition,
        });
    }
    if include_interactions {
        for (name, formula) in INTERACTION_NAMES.iter().zip(INTERACTION_FORMULAS) {
            cols.push(FeatureColumn {
                name: name.to_string(),
                formula: formula.to_string(),
                provenance: ColumnProvenance::Interaction,
            });
        }
    }
    cols
}

/// Every output column, its formula and where it comes from.
pub fn feature_manifest(config: &FeatureConfig) -> Result<Vec<FeatureColumn>> {
    let mut cols = base_columns(config.include_interactions);
    if config.include_interactions {
        let extras = resolve_extras(&cols, &config.extra_products)?;
        for (a, b) in extras {
            let (na, nb) = (cols[a].name.clone(), cols[b].name.clone());
            cols.push(FeatureColumn {
                name: format!("{na}_x_{nb}"),
                formula: format!("{na} * {nb}"),
                provenance: ColumnProvenance::Interaction,
            });
        }
    }
    Ok(cols)
}

fn resolve_extras(cols: &[FeatureColumn], extras: &[(String, String)]) -> Result<Vec<(usize, usize)>> {
    let find = |name: &str| {
        cols.iter().position(|c| c.name == name).ok_or_else(|| {
            Error::InvalidParameter(format!("extra product refers to unknown column `{name}`"))
        })
    };
    extras.iter().map(|(a, b)| Ok((find(a)?, find(b)?))).collect()
}

/// Feature columns without labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn into_table(self, labels: Vec<u8>, row_ids: Option<Vec<String>>) -> Result<DatasetTable> {
        DatasetTable::new(self.names, self.rows, labels, row_ids)
    }
}

pub fn featurize_record(
    record: &DescriptorRecord,
    masses: &MassTable,
    config: &FeatureConfig,
    extras: &[(usize, usize)],
) -> Result<Vec<f64>> {
    record.validate()?;
    let organic = parse_formula(&record.organic_formula)?;
    let inorganic = parse_formula(&record.inorganic_formula)?;
    let comp = composition_features(&organic, &inorganic, masses)?;
    let mut row = Vec::with_capacity(28 + extras.len());
    row.extend_from_slice(&record.numeric_values());
    row.extend_from_slice(&comp.values());
    if config.include_interactions {
        row.extend(engineer_features(record, &comp, masses)?.into_iter().map(|(_, v)| v));
        for &(a, b) in extras {
            row.push(row[a] * row[b]);
        }
    }
    Ok(row)
}

/// Featurize every record. Errors carry the offending record index.
pub fn build_matrix(records: &[DescriptorRecord], masses: &MassTable, config: &FeatureConfig) -> Result<FeatureMatrix> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("empty record list".into()));
    }
    let columns = feature_manifest(config)?;
    let extras = if config.include_interactions {
        resolve_extras(&base_columns(true), &config.extra_products)?
    } else {
        Vec::new()
    };
    let rows = records
        .iter()
        .enumerate()
        .map(|(i, r)| featurize_record(r, masses, config, &extras).map_err(|e| e.at_row(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureMatrix { names: columns.into_iter().map(|c| c.name).collect(), rows })
}

/// Per-column mean and population standard deviation. Constant columns keep
/// a unit scale, so they standardize to all zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl StandardizationParams {
    pub fn fit(table: &DatasetTable) -> Result<Self> {
        let n = table.n_rows();
        if n < 2 {
            return Err(Error::InvalidParameter(format!("standardization needs at least 2 rows, got {n}")));
        }
        let d = table.n_features();
        let mut means = alloc::vec![0.0; d];
        for row in table.rows() {
            for (m, &x) in means.iter_mut().zip(row) {
                *m += x;
            }
        }
        for m in &mut means {
            *m /= n as f64;
        }
        let mut vars = alloc::vec![0.0; d];
        for row in table.rows() {
            for ((v, &m), &x) in vars.iter_mut().zip(&means).zip(row) {
                *v += (x - m) * (x - m);
            }
        }
        let stds = vars
            .iter()
            .zip(&means)
            .map(|(&v, &m): (&f64, &f64)| {
                let s = libm::sqrt(v / n as f64);
                if s > f64::EPSILON * m.abs().max(1.0) {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { means, stds })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    fn check(&self, got: usize) -> Result<()> {
        if got == self.len() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.len(), got })
        }
    }

    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check(row.len())?;
        Ok(row.iter().zip(&self.means).zip(&self.stds).map(|((&x, &m), &s)| (x - m) / s).collect())
    }

    pub fn invert_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check(row.len())?;
        Ok(row.iter().zip(&self.means).zip(&self.stds).map(|((&z, &m), &s)| z * s + m).collect())
    }

    pub fn apply(&self, table: &DatasetTable) -> Result<DatasetTable> {
        self.check(table.n_features())?;
        let mut values = Vec::with_capacity(table.values().len());
        for row in table.rows() {
            values.extend(row.iter().zip(&self.means).zip(&self.stds).map(|((&x, &m), &s)| (x - m) / s));
        }
        table.with_values(values)
    }

    pub fn invert(&self, table: &DatasetTable) -> Result<DatasetTable> {
        self.check(table.n_features())?;
        let mut values = Vec::with_capacity(table.values().len());
        for row in table.rows() {
            values.extend(row.iter().zip(&self.means).zip(&self.stds).map(|((&z, &m), &s)| z * s + m));
        }
        table.with_values(values)
    }
}

pub fn standardize_fit(table: &DatasetTable) -> Result<StandardizationParams> {
    StandardizationParams::fit(table)
}

pub fn standardize_apply(table: &DatasetTable, params: &StandardizationParams) -> Result<DatasetTable> {
    params.apply(table)
}

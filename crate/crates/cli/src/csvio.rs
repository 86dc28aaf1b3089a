//! CSV ingestion and export.
//!
//! Every column has a role. With a schema file (JSON object mapping column
//! name to role) each header must be listed; without one the roles are
//! inferred: `label` or `dimensionality` is the label, `id` the row id,
//! `*_formula` a formula column, columns holding only true/false/yes/no a
//! boolean feature, everything else numeric. Empty cells are rejected.
//!
//! A file with formula columns is a descriptor file: it must hold exactly
//! the descriptor columns and is featurized by the core crate. Anything else
//! is read as a ready feature table.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use hmdim_core::features::{DescriptorRecord, FeatureConfig};
use hmdim_core::formula::MassTable;
use hmdim_core::{DatasetTable, NUM_CLASSES};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, json_err, CliError, Result, StageExt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    FeatureNumeric,
    FeatureBoolean,
    FeatureTextFormula,
    Label,
    Id,
    Ignore,
}

pub type Schema = BTreeMap<String, Role>;

pub fn load_schema(path: &Path) -> Result<Schema> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(json_err(path))
}

/// Parsed CSV content, columns grouped by role.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCsv {
    pub path: PathBuf,
    /// Numeric and boolean feature columns, in header order.
    pub features: Vec<(String, Vec<f64>)>,
    pub formulas: BTreeMap<String, Vec<String>>,
    /// All zeros when the file has no label column.
    pub labels: Vec<u8>,
    pub has_labels: bool,
    pub ids: Option<Vec<String>>,
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

fn parse_label(s: &str) -> std::result::Result<u8, String> {
    let digits = s.strip_suffix(['D', 'd']).unwrap_or(s);
    let v: u64 = digits.parse().map_err(|_| format!("label `{s}` is not a class index"))?;
    if v >= NUM_CLASSES as u64 {
        return Err(format!("label {v} outside the class set {{0,1,2,3}}"));
    }
    Ok(v as u8)
}

fn infer_role(name: &str, cells: &[&str]) -> Role {
    match name {
        "label" | "dimensionality" => Role::Label,
        "id" => Role::Id,
        _ if name.ends_with("_formula") => Role::FeatureTextFormula,
        _ if !cells.is_empty()
            && cells.iter().all(|c| matches!(c.to_ascii_lowercase().as_str(), "true" | "false" | "yes" | "no")) =>
        {
            Role::FeatureBoolean
        }
        _ => Role::FeatureNumeric,
    }
}

pub fn read_csv(path: &Path, schema: Option<&Schema>) -> Result<RawCsv> {
    read_csv_opts(path, schema, true)
}

/// Like [`read_csv`], but a missing label column is allowed when
/// `require_label` is false.
pub fn read_csv_opts(path: &Path, schema: Option<&Schema>, require_label: bool) -> Result<RawCsv> {
    let input = |reason: String| CliError::Input { path: path.to_path_buf(), reason };
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|source| CliError::Csv { path: path.to_path_buf(), source })?
        .iter()
        .map(str::to_string)
        .collect();
    for (i, h) in headers.iter().enumerate() {
        if headers[..i].contains(h) {
            return Err(input(format!("duplicate column name `{h}`")));
        }
    }
    let mut records = Vec::new();
    for r in reader.records() {
        records.push(r.map_err(|source| CliError::Csv { path: path.to_path_buf(), source })?);
    }
    if records.is_empty() {
        return Err(input("no data rows".into()));
    }

    let column = |j: usize| records.iter().map(|r| r.get(j).unwrap_or("")).collect::<Vec<_>>();
    let roles: Vec<Role> = match schema {
        Some(schema) => {
            for name in schema.keys() {
                if !headers.contains(name) {
                    return Err(input(format!("schema column `{name}` not found in the header")));
                }
            }
            headers
                .iter()
                .map(|h| schema.get(h).copied().ok_or_else(|| input(format!("column `{h}` has no role in the schema"))))
                .collect::<Result<_>>()?
        }
        None => (0..headers.len()).map(|j| infer_role(&headers[j], &column(j))).collect(),
    };
    let label_cols: Vec<usize> = (0..headers.len()).filter(|&j| roles[j] == Role::Label).collect();
    if label_cols.len() > 1 || (require_label && label_cols.is_empty()) {
        return Err(input(format!("expected exactly one label column, found {}", label_cols.len())));
    }
    if roles.iter().filter(|&&r| r == Role::Id).count() > 1 {
        return Err(input("more than one id column".into()));
    }

    let mut out = RawCsv {
        path: path.to_path_buf(),
        features: Vec::new(),
        formulas: BTreeMap::new(),
        labels: vec![0; records.len()],
        has_labels: !label_cols.is_empty(),
        ids: None,
    };
    for (j, (name, role)) in headers.iter().zip(&roles).enumerate() {
        let cells = column(j);
        let cell_err = |row: usize, reason: String| CliError::Cell {
            path: path.to_path_buf(),
            row: row + 1,
            column: name.clone(),
            reason,
        };
        if *role != Role::Ignore {
            if let Some(row) = cells.iter().position(|c| c.is_empty()) {
                return Err(cell_err(row, "missing value".into()));
            }
        }
        match role {
            Role::FeatureNumeric => {
                let values = cells
                    .iter()
                    .enumerate()
                    .map(|(i, c)| match c.parse::<f64>() {
                        Ok(v) if v.is_finite() => Ok(v),
                        Ok(_) => Err(cell_err(i, format!("non-finite value `{c}`"))),
                        Err(_) => Err(cell_err(i, format!("cannot parse `{c}` as a number"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                out.features.push((name.clone(), values));
            }
            Role::FeatureBoolean => {
                let values = cells
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        parse_bool(c)
                            .map(|b| if b { 1.0 } else { 0.0 })
                            .ok_or_else(|| cell_err(i, format!("cannot parse `{c}` as a boolean")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                out.features.push((name.clone(), values));
            }
            Role::FeatureTextFormula => {
                out.formulas.insert(name.clone(), cells.iter().map(|c| c.to_string()).collect());
            }
            Role::Label => {
                out.labels = cells
                    .iter()
                    .enumerate()
                    .map(|(i, c)| parse_label(c).map_err(|r| cell_err(i, r)))
                    .collect::<Result<_>>()?;
            }
            Role::Id => out.ids = Some(cells.iter().map(|c| c.to_string()).collect()),
            Role::Ignore => {}
        }
    }
    Ok(out)
}

impl RawCsv {
    pub fn is_descriptor_file(&self) -> bool {
        !self.formulas.is_empty()
    }

    /// Numeric and boolean columns as a feature table.
    pub fn into_table(self) -> Result<DatasetTable> {
        if self.features.is_empty() {
            return Err(CliError::Input { path: self.path, reason: "no feature columns".into() });
        }
        let names = self.features.iter().map(|(n, _)| n.clone()).collect();
        let n = self.labels.len();
        let values = (0..n).flat_map(|i| self.features.iter().map(move |(_, col)| col[i])).collect();
        DatasetTable::from_flat(names, values, self.labels, self.ids).stage("load")
    }

    pub fn descriptor_records(&self) -> Result<Vec<DescriptorRecord>> {
        let input = |reason: String| CliError::Input { path: self.path.clone(), reason };
        let formula = |name: &str| {
            self.formulas.get(name).ok_or_else(|| input(format!("descriptor file lacks the `{name}` column")))
        };
        let organic = formula("organic_formula")?;
        let inorganic = formula("inorganic_formula")?;
        if let Some(extra) = self.formulas.keys().find(|k| *k != "organic_formula" && *k != "inorganic_formula") {
            return Err(input(format!("unexpected formula column `{extra}`")));
        }
        let mut numeric = Vec::with_capacity(DescriptorRecord::NUMERIC_NAMES.len());
        for name in DescriptorRecord::NUMERIC_NAMES {
            let col = self
                .features
                .iter()
                .find(|(n, _)| n == name)
                .ok_or_else(|| input(format!("descriptor file lacks the `{name}` column")))?;
            numeric.push(&col.1);
        }
        if let Some((extra, _)) =
            self.features.iter().find(|(n, _)| !DescriptorRecord::NUMERIC_NAMES.contains(&n.as_str()))
        {
            return Err(input(format!(
                "unexpected column `{extra}` in a descriptor file; mark it `ignore` in a schema"
            )));
        }
        let count = |row: usize, j: usize| -> Result<u32> {
            let v = numeric[j][row];
            if v < 0.0 || v.fract() != 0.0 || v > f64::from(u32::MAX) {
                return Err(CliError::Cell {
                    path: self.path.clone(),
                    row: row + 1,
                    column: DescriptorRecord::NUMERIC_NAMES[j].into(),
                    reason: format!("expected a non-negative integer, got {v}"),
                });
            }
            Ok(v as u32)
        };
        (0..self.labels.len())
            .map(|i| {
                Ok(DescriptorRecord {
                    organic_formula: organic[i].clone(),
                    inorganic_formula: inorganic[i].clone(),
                    num_cation_rings: count(i, 0)?,
                    ring_c_count: count(i, 1)?,
                    ring_non_c_count: count(i, 2)?,
                    longest_alkyl_chain: count(i, 3)?,
                    num_alkyl_chains: count(i, 4)?,
                    water_present: numeric[5][i] != 0.0,
                    terminal_nitrogens: count(i, 6)?,
                    longest_chain_c_count: count(i, 7)?,
                    num_same_cations: count(i, 8)?,
                })
            })
            .collect()
    }
}

/// Load a feature table; descriptor files are featurized on the way in.
pub fn load_dataset(
    path: &Path,
    schema: Option<&Schema>,
    features: &FeatureConfig,
    masses: &MassTable,
) -> Result<DatasetTable> {
    featurize_raw(read_csv(path, schema)?, features, masses)
}

/// Load rows for prediction. The label column is optional; the flag says
/// whether it was present.
pub fn load_unlabeled(
    path: &Path,
    schema: Option<&Schema>,
    features: &FeatureConfig,
    masses: &MassTable,
) -> Result<(DatasetTable, bool)> {
    let raw = read_csv_opts(path, schema, false)?;
    let has_labels = raw.has_labels;
    Ok((featurize_raw(raw, features, masses)?, has_labels))
}

fn featurize_raw(raw: RawCsv, features: &FeatureConfig, masses: &MassTable) -> Result<DatasetTable> {
    if !raw.is_descriptor_file() {
        return raw.into_table();
    }
    let records = raw.descriptor_records()?;
    let matrix = hmdim_core::features::build_matrix(&records, masses, features).stage("featurize")?;
    matrix.into_table(raw.labels, raw.ids).stage("featurize")
}

/// Plain table loader: numeric and boolean columns only.
pub fn load_csv(path: &Path, schema: Option<&Schema>) -> Result<DatasetTable> {
    read_csv(path, schema)?.into_table()
}

/// Reorder and subset columns by name.
pub fn select_columns(table: &DatasetTable, names: &[String], path: &Path) -> Result<DatasetTable> {
    let idx = names
        .iter()
        .map(|n| {
            table.feature_names().iter().position(|h| h == n).ok_or_else(|| CliError::Input {
                path: path.into(),
                reason: format!("feature column `{n}` is missing"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let values = table.rows().flat_map(|r| idx.iter().map(move |&j| r[j])).collect();
    DatasetTable::from_flat(names.to_vec(), values, table.labels().to_vec(), table.row_ids().map(<[String]>::to_vec))
        .stage("load")
}

/// `[id,] features..., label`, floats in shortest round-trip form.
pub fn write_table_csv(path: &Path, table: &DatasetTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|source| CliError::Csv { path: path.into(), source })?;
    let ids = table.row_ids();
    let mut header: Vec<&str> = Vec::new();
    if ids.is_some() {
        header.push("id");
    }
    header.extend(table.feature_names().iter().map(String::as_str));
    header.push("label");
    let csv_err = |source| CliError::Csv { path: path.into(), source };
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..table.n_rows() {
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        if let Some(ids) = ids {
            rec.push(ids[i].clone());
        }
        rec.extend(table.row(i).iter().map(f64::to_string));
        rec.push(table.labels()[i].to_string());
        w.write_record(&rec).map_err(|source| CliError::Csv { path: path.into(), source })?;
    }
    w.flush().map_err(io_err(path))
}

//! Chemical formula strings to element counts, masses and composition
//! features.
//!
//! Grammar: a sequence of element symbols (uppercase letter plus optional
//! lowercase letter) each followed by an optional count, and parenthesised
//! groups followed by an optional multiplier. Groups may not nest.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SYMBOLS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh",
    "Fl", "Mc", "Lv", "Ts", "Og",
];

const HALOGENS: [&str; 4] = ["F", "Cl", "Br", "I"];

/// Elements never counted as a B-site metal in the inorganic unit.
const NON_METALS: [&str; 18] = [
    "H", "He", "B", "C", "N", "O", "F", "Ne", "P", "S", "Cl", "Ar", "Se", "Br", "Kr", "I", "Xe",
    "Rn",
];

pub fn is_element(symbol: &str) -> bool {
    SYMBOLS.contains(&symbol)
}

/// Element symbol to positive atom count.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FormulaComposition {
    counts: BTreeMap<String, u32>,
}

impl FormulaComposition {
    pub fn count(&self, symbol: &str) -> u32 {
        self.counts.get(symbol).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<String, u32> {
        &self.counts
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total_atoms(&self) -> u64 {
        self.counts.values().map(|&c| u64::from(c)).sum()
    }

    /// Atoms other than hydrogen.
    pub fn heavy_atoms(&self) -> u64 {
        self.total_atoms() - u64::from(self.count("H"))
    }

    /// Element-wise sum of two compositions.
    pub fn merged(&self, other: &Self) -> Self {
        let mut counts = self.counts.clone();
        for (el, &n) in &other.counts {
            *counts.entry(el.clone()).or_insert(0) += n;
        }
        Self { counts }
    }

    pub fn from_counts<'a>(pairs: impl IntoIterator<Item = (&'a str, u32)>) -> Result<Self> {
        let mut counts = BTreeMap::new();
        for (el, n) in pairs {
            if !is_element(el) {
                return Err(Error::Formula {
                    formula: el.to_string(),
                    reason: format!("unknown element symbol `{el}`"),
                });
            }
            if n == 0 {
                return Err(Error::Formula { formula: el.to_string(), reason: "zero count".into() });
            }
            *counts.entry(el.to_string()).or_insert(0) += n;
        }
        Ok(Self { counts })
    }
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn fail(&self, reason: impl Into<String>) -> Error {
        Error::Formula { formula: self.text.to_string(), reason: reason.into() }
    }

    /// Optional decimal count; `None` when no digits follow.
    fn number(&mut self) -> Result<Option<u32>> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Ok(None);
        }
        let digits = &self.text[start..self.pos];
        let n: u32 = digits
            .parse()
            .map_err(|_| self.fail(format!("count `{digits}` out of range")))?;
        if n == 0 {
            return Err(self.fail(format!("zero multiplier at offset {start}")));
        }
        Ok(Some(n))
    }

    fn symbol(&mut self) -> Result<&'static str> {
        let start = self.pos;
        self.pos += 1;
        if self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_lowercase() {
            self.pos += 1;
        }
        let sym = &self.text[start..self.pos];
        SYMBOLS
            .iter()
            .copied()
            .find(|&s| s == sym)
            .ok_or_else(|| self.fail(format!("unknown element symbol `{sym}`")))
    }

    fn add(counts: &mut BTreeMap<&'static str, u64>, el: &'static str, n: u64) {
        *counts.entry(el).or_insert(0) += n;
    }

    fn parse(mut self) -> Result<FormulaComposition> {
        let mut total: BTreeMap<&'static str, u64> = BTreeMap::new();
        let mut group: Option<(usize, BTreeMap<&'static str, u64>)> = None;
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            match b {
                b'(' => {
                    if group.is_some() {
                        return Err(self.fail("nested groups are not supported"));
                    }
                    group = Some((self.pos, BTreeMap::new()));
                    self.pos += 1;
                }
                b')' => {
                    let Some((_, inner)) = group.take() else {
                        return Err(self.fail(format!("unmatched `)` at offset {}", self.pos)));
                    };
                    if inner.is_empty() {
                        return Err(self.fail("empty group"));
                    }
                    self.pos += 1;
                    let mult = u64::from(self.number()?.unwrap_or(1));
                    for (el, n) in inner {
                        Self::add(&mut total, el, n * mult);
                    }
                }
                b'A'..=b'Z' => {
                    let el = self.symbol()?;
                    let n = u64::from(self.number()?.unwrap_or(1));
                    match &mut group {
                        Some((_, inner)) => Self::add(inner, el, n),
                        None => Self::add(&mut total, el, n),
                    }
                }
                b'0'..=b'9' => {
                    return Err(self.fail(format!("count without element at offset {}", self.pos)))
                }
                _ => {
                    let ch = self.text[self.pos..].chars().next().unwrap_or('?');
                    return Err(self.fail(format!("unexpected character `{ch}` at offset {}", self.pos)));
                }
            }
        }
        if let Some((open, _)) = group {
            return Err(self.fail(format!("unclosed `(` at offset {open}")));
        }
        let mut counts = BTreeMap::new();
        for (el, n) in total {
            let n = u32::try_from(n).map_err(|_| self.fail(format!("count of {el} overflows")))?;
            counts.insert(el.to_string(), n);
        }
        Ok(FormulaComposition { counts })
    }
}

/// Expand a formula such as `(C6H14N)2PbI4` into element counts.
pub fn parse_formula(text: &str) -> Result<FormulaComposition> {
    if text.is_empty() {
        return Err(Error::Formula { formula: String::new(), reason: "empty formula".into() });
    }
    Parser { text, bytes: text.as_bytes(), pos: 0 }.parse()
}

/// Standard atomic masses in amu.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassTable {
    masses: BTreeMap<String, f64>,
}

const BUNDLED_MASSES: &str = include_str!("../data/masses.csv");

impl MassTable {
    /// The table shipped in `data/masses.csv`.
    pub fn standard() -> Self {
        Self::from_csv_str(BUNDLED_MASSES).expect("bundled mass table is well formed")
    }

    /// Parse `symbol,mass_amu` rows; the header line is required.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, header)) if header.trim() == "symbol,mass_amu" => {}
            Some((i, _)) => {
                return Err(Error::MassTable { line: i + 1, reason: "expected header `symbol,mass_amu`".into() })
            }
            None => return Err(Error::MassTable { line: 0, reason: "empty table".into() }),
        }
        let mut masses = BTreeMap::new();
        for (i, line) in lines {
            let line_no = i + 1;
            let (sym, mass) = line
                .split_once(',')
                .ok_or_else(|| Error::MassTable { line: line_no, reason: "expected two fields".into() })?;
            let sym = sym.trim();
            if !is_element(sym) {
                return Err(Error::MassTable { line: line_no, reason: format!("unknown element `{sym}`") });
            }
            let mass: f64 = mass.trim().parse().map_err(|_| Error::MassTable {
                line: line_no,
                reason: format!("unparseable mass `{}`", mass.trim()),
            })?;
            if !(mass.is_finite() && mass > 0.0) {
                return Err(Error::MassTable { line: line_no, reason: format!("mass must be positive, got {mass}") });
            }
            if masses.insert(sym.to_string(), mass).is_some() {
                return Err(Error::MassTable { line: line_no, reason: format!("duplicate element `{sym}`") });
            }
        }
        Ok(Self { masses })
    }

    pub fn mass(&self, symbol: &str) -> Result<f64> {
        self.masses.get(symbol).copied().ok_or_else(|| Error::MissingMass(symbol.to_string()))
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }
}

pub fn molecular_weight(comp: &FormulaComposition, masses: &MassTable) -> Result<f64> {
    if comp.is_empty() {
        return Err(Error::Formula { formula: String::new(), reason: "empty composition".into() });
    }
    comp.counts
        .iter()
        .map(|(el, &n)| Ok(f64::from(n) * masses.mass(el)?))
        .sum()
}

/// Numeric summary of the organic and inorganic formula units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositionFeatures {
    pub organic_c_count: f64,
    pub organic_h_count: f64,
    pub organic_n_count: f64,
    pub organic_o_count: f64,
    pub organic_heavy_atom_count: f64,
    pub organic_mw: f64,
    pub inorganic_metal_count: f64,
    pub inorganic_halide_count: f64,
    pub halide_to_metal_ratio: f64,
    pub inorganic_mw: f64,
}

impl CompositionFeatures {
    pub const NAMES: [&'static str; 10] = [
        "organic_c_count",
        "organic_h_count",
        "organic_n_count",
        "organic_o_count",
        "organic_heavy_atom_count",
        "organic_mw",
        "inorganic_metal_count",
        "inorganic_halide_count",
        "halide_to_metal_ratio",
        "inorganic_mw",
    ];

    pub fn values(&self) -> [f64; 10] {
        [
            self.organic_c_count,
            self.organic_h_count,
            self.organic_n_count,
            self.organic_o_count,
            self.organic_heavy_atom_count,
            self.organic_mw,
            self.inorganic_metal_count,
            self.inorganic_halide_count,
            self.halide_to_metal_ratio,
            self.inorganic_mw,
        ]
    }

    pub fn named(&self) -> Vec<(&'static str, f64)> {
        Self::NAMES.iter().copied().zip(self.values()).collect()
    }
}

/// Halide/metal ratio divides by `max(1, metal count)` so metal-free units stay finite.
pub fn composition_features(
    organic: &FormulaComposition,
    inorganic: &FormulaComposition,
    masses: &MassTable,
) -> Result<CompositionFeatures> {
    let halides: u64 = HALOGENS.iter().map(|&h| u64::from(inorganic.count(h))).sum();
    let metals: u64 = inorganic
        .counts
        .iter()
        .filter(|(el, _)| !NON_METALS.contains(&el.as_str()))
        .map(|(_, &n)| u64::from(n))
        .sum();
    Ok(CompositionFeatures {
        organic_c_count: f64::from(organic.count("C")),
        organic_h_count: f64::from(organic.count("H")),
        organic_n_count: f64::from(organic.count("N")),
        organic_o_count: f64::from(organic.count("O")),
        organic_heavy_atom_count: organic.heavy_atoms() as f64,
        organic_mw: molecular_weight(organic, masses)?,
        inorganic_metal_count: metals as f64,
        inorganic_halide_count: halides as f64,
        halide_to_metal_ratio: halides as f64 / metals.max(1) as f64,
        inorganic_mw: molecular_weight(inorganic, masses)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comp(pairs: &[(&str, u32)]) -> FormulaComposition {
        FormulaComposition::from_counts(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn parses_reference_formulas() {
        assert_eq!(parse_formula("C8H8N4").unwrap(), comp(&[("C", 8), ("H", 8), ("N", 4)]));
        assert_eq!(parse_formula("PbI4").unwrap(), comp(&[("Pb", 1), ("I", 4)]));
        assert_eq!(
            parse_formula("(C6H14N)2PbI4").unwrap(),
            comp(&[("C", 12), ("H", 28), ("N", 2), ("Pb", 1), ("I", 4)])
        );
        assert_eq!(parse_formula("H").unwrap(), comp(&[("H", 1)]));
    }

    #[test]
    fn repeated_elements_sum() {
        assert_eq!(parse_formula("CH3CH2NH3").unwrap(), comp(&[("C", 2), ("H", 8), ("N", 1)]));
    }

    #[test]
    fn parse_errors() {
        for (text, needle) in [
            ("", "empty formula"),
            ("Xq2", "unknown element"),
            ("(CH3", "unclosed"),
            ("CH3)", "unmatched"),
            ("(CH3)0", "zero multiplier"),
            ("C0", "zero multiplier"),
            ("()2", "empty group"),
            ("((CH3)2N)2", "nested"),
            ("2C", "count without element"),
            ("C H", "unexpected character"),
        ] {
            let err = parse_formula(text).unwrap_err().to_string();
            assert!(err.contains(needle), "{text}: {err}");
        }
    }

    #[test]
    fn weights() {
        let m = MassTable::standard();
        let water = molecular_weight(&comp(&[("H", 2), ("O", 1)]), &m).unwrap();
        assert!((water - 18.015).abs() < 0.01);
        assert_eq!(molecular_weight(&comp(&[("C", 1)]), &m).unwrap(), 12.011);
        assert!(molecular_weight(&FormulaComposition::default(), &m).is_err());
    }

    #[test]
    fn missing_mass_names_element() {
        let m = MassTable::from_csv_str("symbol,mass_amu\nH,1.008\n").unwrap();
        assert_eq!(
            molecular_weight(&comp(&[("C", 1)]), &m),
            Err(Error::MissingMass("C".into()))
        );
    }

    #[test]
    fn mass_table_validation() {
        assert!(MassTable::from_csv_str("").is_err());
        assert!(MassTable::from_csv_str("sym,mass\nH,1\n").is_err());
        assert!(MassTable::from_csv_str("symbol,mass_amu\nH,abc\n").is_err());
        assert!(MassTable::from_csv_str("symbol,mass_amu\nH,1\nH,1\n").is_err());
        assert!(MassTable::from_csv_str("symbol,mass_amu\nZz,1\n").is_err());
        let bundled = MassTable::standard();
        for el in ["H", "C", "N", "O", "Ge", "Sn", "Pb", "F", "Cl", "Br", "I", "Bi", "Sb", "Cu"] {
            assert!(bundled.mass(el).is_ok(), "{el}");
        }
    }

    #[test]
    fn composition_feature_examples() {
        let m = MassTable::standard();
        let f = composition_features(&comp(&[("C", 8), ("H", 8), ("N", 4)]), &comp(&[("Pb", 1), ("I", 4)]), &m)
            .unwrap();
        assert_eq!(f.halide_to_metal_ratio, 4.0);
        assert_eq!(f.organic_heavy_atom_count, 12.0);
        assert_eq!(f.inorganic_metal_count, 1.0);
        assert_eq!(f.inorganic_halide_count, 4.0);

        let g = composition_features(&comp(&[("C", 6), ("H", 14), ("N", 1)]), &comp(&[("Pb", 1), ("I", 4)]), &m)
            .unwrap();
        assert_eq!(g.organic_n_count, 1.0);
        assert!((g.organic_mw - 100.185).abs() < 1e-9);
        assert_eq!(g.named().len(), 10);
        assert_eq!(g.named()[5], ("organic_mw", g.organic_mw));
    }
}

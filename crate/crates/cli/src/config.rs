//! Effective experiment configuration: file, then environment, then flags.

use std::path::Path;

use hmdim_core::models::ModelSpec;
use hmdim_core::pipeline::{ExperimentConfig, FeatureMode, SmoteMode};

use crate::error::{CliError, Result};
use crate::persist::read_json;
use crate::run::parse_seed_list;

/// Flag values that override the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub smote_mode: Option<SmoteMode>,
    pub feature_mode: Option<FeatureMode>,
    pub model: Option<String>,
}

pub fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => read_json(p),
        None => Ok(ExperimentConfig::default()),
    }
}

/// `seeds_var` is the value of the seed-list variable, if set.
pub fn apply_env(config: &mut ExperimentConfig, seeds_var: Option<&str>) -> Result<()> {
    if let Some(text) = seeds_var {
        config.split.seeds = parse_seed_list(text)?;
    }
    Ok(())
}

/// `--seed N` reseeds everything: SMOTE, CV, and the split seeds become
/// `N, N+1, ...` with the configured count.
pub fn apply_overrides(config: &mut ExperimentConfig, o: &Overrides) -> Result<()> {
    if let Some(seed) = o.seed {
        config.smote.seed = seed;
        if let Some(cv) = &mut config.cv {
            cv.seed = seed;
        }
        let n = config.split.seeds.len().max(1) as u64;
        config.split.seeds = (0..n).map(|i| seed.wrapping_add(i)).collect();
    }
    if let Some(m) = o.smote_mode {
        config.smote_mode = m;
    }
    if let Some(f) = o.feature_mode {
        config.feature_mode = f;
    }
    if let Some(kind) = &o.model {
        if config.model.kind() != kind {
            config.model =
                ModelSpec::from_kind(kind).ok_or_else(|| CliError::Usage(format!("unknown model kind `{kind}`")))?;
        }
    }
    Ok(())
}

/// Resolve the configuration a command runs with.
pub fn resolve(path: Option<&Path>, seeds_var: Option<&str>, o: &Overrides) -> Result<ExperimentConfig> {
    let mut config = load_config(path)?;
    apply_env(&mut config, seeds_var)?;
    apply_overrides(&mut config, o)?;
    Ok(config)
}

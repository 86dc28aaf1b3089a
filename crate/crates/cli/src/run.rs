//! Concurrent experiment execution and run-directory output.
//!
//! Seeds and folds run on a rayon pool; results are collected in seed-list
//! and fold order before reduction, so the report does not depend on the
//! thread count.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use hmdim_core::pipeline::{
    self, assemble, cv_fold, cv_plan, cv_summary, evaluate_seed, CvConfig, CvReport, EvaluationReport,
    ExperimentConfig, Prepared, SmoteMode,
};
use hmdim_core::DatasetTable;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{io_err, CliError, Result, StageExt};
use crate::persist::{write_json, SmoteProvenance};

pub const SEEDS_VAR: &str = "HMDIM_SEEDS";
pub const THREADS_VAR: &str = "HMDIM_THREADS";

pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be ≥ 1".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))
}

pub fn parse_seed_list(text: &str) -> Result<Vec<u64>> {
    let seeds = text
        .split(',')
        .map(|s| s.trim().parse::<u64>().map_err(|_| CliError::Usage(format!("{SEEDS_VAR}: bad seed `{s}`"))))
        .collect::<Result<Vec<_>>>()?;
    if seeds.is_empty() {
        return Err(CliError::Usage(format!("{SEEDS_VAR} is empty")));
    }
    Ok(seeds)
}

pub fn dataset_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub struct RunOutput {
    pub report: EvaluationReport,
    pub prepared: Prepared,
}

fn run_cv_folds(config: &ExperimentConfig, prepared: &Prepared) -> Result<Option<CvReport>> {
    let Some(plan) = cv_plan(config, prepared).stage("crossval")? else {
        return Ok(None);
    };
    let folds = (0..plan.k)
        .into_par_iter()
        .map(|f| cv_fold(config, prepared, &plan, f))
        .collect::<hmdim_core::Result<Vec<_>>>()
        .stage("crossval")?;
    Ok(Some(cv_summary(config, folds)))
}

pub fn run_experiment(config: &ExperimentConfig, table: &DatasetTable, pool: &rayon::ThreadPool) -> Result<RunOutput> {
    pool.install(|| {
        let prepared = pipeline::prepare(config, table).stage("experiment")?;
        let per_seed = config
            .split
            .seeds
            .par_iter()
            .map(|&s| evaluate_seed(config, &prepared, s))
            .collect::<hmdim_core::Result<Vec<_>>>()
            .stage("experiment")?;
        let cv = run_cv_folds(config, &prepared)?;
        let report = assemble(config, &prepared, per_seed, cv).stage("experiment")?;
        Ok(RunOutput { report, prepared })
    })
}

pub fn run_crossval(config: &ExperimentConfig, table: &DatasetTable, pool: &rayon::ThreadPool) -> Result<CvReport> {
    let mut config = config.clone();
    config.cv.get_or_insert_with(CvConfig::default);
    pool.install(|| {
        let prepared = pipeline::prepare(&config, table).stage("crossval")?;
        Ok(run_cv_folds(&config, &prepared)?.expect("cv configured above"))
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(io_err(path))
}

pub fn report_csv(report: &EvaluationReport) -> String {
    let mut out = String::from("scope,class,precision,recall,f1,support\n");
    for s in &report.per_seed {
        for m in &s.report.per_class {
            let _ = writeln!(out, "seed={},{},{},{},{},{}", s.seed, m.class, m.precision, m.recall, m.f1, m.support);
        }
    }
    for m in &report.averaged.per_class {
        let _ = writeln!(out, "mean,{},{},{},{},{}", m.class, m.precision, m.recall, m.f1, m.support);
    }
    out
}

pub fn cv_csv(cv: &CvReport) -> String {
    let mut out = String::from("fold,macro_f1\n");
    for (i, f) in cv.fold_f1.iter().enumerate() {
        let _ = writeln!(out, "{i},{f}");
    }
    out
}

pub fn roc_csv(curve: &hmdim_core::metrics::RocCurve) -> String {
    let mut out = String::from("fpr,tpr,threshold\n");
    for (i, p) in curve.points.iter().enumerate() {
        let thr = if i == 0 { String::new() } else { curve.thresholds[i - 1].to_string() };
        let _ = writeln!(out, "{},{},{}", p.fpr, p.tpr, thr);
    }
    out
}

/// Write the report and its sidecars into `dir`.
pub fn write_run_dir(dir: &Path, run: &RunOutput) -> Result<()> {
    let report = &run.report;
    fs::create_dir_all(dir.join("roc")).map_err(io_err(dir))?;
    write_json(&dir.join("config.json"), &report.config)?;
    write_json(&dir.join("report.json"), report)?;
    write_text(&dir.join("report.csv"), &report_csv(report))?;
    for s in &report.per_seed {
        for c in &s.roc {
            write_text(&dir.join("roc").join(format!("seed{}_class{}.csv", s.seed, c.class)), &roc_csv(c))?;
        }
    }
    if let Some(cv) = &report.cv {
        write_text(&dir.join("cv.csv"), &cv_csv(cv))?;
    }
    if let Some(imp) = &report.feature_importance {
        let mut rows: Vec<_> = imp.iter().collect();
        rows.sort_by(|a, b| b.importance.total_cmp(&a.importance));
        let mut out = String::from("feature,importance\n");
        for r in rows {
            let _ = writeln!(out, "{},{}", r.feature, r.importance);
        }
        write_text(&dir.join("feature_importance.csv"), &out)?;
    }
    if report.config.smote_mode == SmoteMode::Global {
        let p = &run.prepared;
        let sidecar = SmoteProvenance::new(report.config.smote.seed, report.config.smote.k_neighbors, p.n_original, &p.synthetic);
        write_json(&dir.join("smote_provenance.json"), &sidecar)?;
    }
    Ok(())
}

/// Write a cross-validation-only run directory.
pub fn write_cv_dir(dir: &Path, config: &ExperimentConfig, cv: &CvReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_json(&dir.join("config.json"), config)?;
    write_json(&dir.join("cv.json"), cv)?;
    write_text(&dir.join("cv.csv"), &cv_csv(cv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seed_list("3, 4,5").unwrap(), vec![3, 4, 5]);
        assert!(parse_seed_list("1,x").is_err());
    }

    #[test]
    fn sha_of_known_bytes() {
        let f = tempfile::NamedTempFile::new().unwrap();
        fs::write(f.path(), b"abc").unwrap();
        assert_eq!(
            dataset_sha256(f.path()).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}

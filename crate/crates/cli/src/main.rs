use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hmdim_core::features::{feature_manifest, StandardizationParams};
use hmdim_core::formula::{parse_formula, MassTable};
use hmdim_core::metrics::{auc_summary, classification_report, roc_curves, ClassReport, RocCurve};
use hmdim_core::models::{argmax, train_model};
use hmdim_core::pipeline::{select_features, CvReport, EvaluationReport, FeatureMode, Provenance, SmoteMode};
use hmdim_core::resample::{smote, SmoteTarget};
use hmdim_core::DatasetTable;
use serde::{Deserialize, Serialize};

use hmdim::config::{resolve, Overrides};
use hmdim::csvio::{self, load_dataset, load_schema, load_unlabeled, select_columns, write_table_csv};
use hmdim::error::{CliError, Result};
use hmdim::persist::{load_model, read_json, save_model, write_json, FeatureManifest, ModelFile, SmoteProvenance, FORMAT_VERSION};
use hmdim::run::{self, dataset_sha256, thread_pool, SEEDS_VAR, THREADS_VAR};
use hmdim::svg;

/// Dimensionality prediction for hybrid metal halides.
#[derive(Parser, Debug)]
#[command(name = "hmdim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the element counts of a chemical formula as JSON.
    Parse {
        /// Formula such as "(C6H14N)2PbI4".
        formula: String,
    },
    /// Turn a descriptor CSV into a feature CSV plus a column manifest.
    Featurize {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Feature CSV to write; the manifest goes next to it as `<stem>.manifest.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Oversample every class with SMOTE.
    Resample {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Rows per class: `auto` (the majority count) or a number.
        #[arg(long, default_value = "auto")]
        target: String,
        /// Nearest neighbors per minority row.
        #[arg(long)]
        k: Option<usize>,
        /// Augmented CSV to write; provenance goes next to it as `<stem>.provenance.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one model on the whole table and save it as JSON.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict classes and probabilities with a saved model.
    Predict {
        #[command(flatten)]
        data: DataArgs,
        /// Model file written by `train`.
        #[arg(long)]
        model_file: PathBuf,
        /// Prediction CSV; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a saved model on labelled data.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        /// Model file written by `train`.
        #[arg(long)]
        model_file: PathBuf,
        /// Directory for report.json, report.csv and ROC point lists.
        #[arg(long)]
        out: PathBuf,
    },
    /// Stratified k-fold cross-validation into a run directory.
    Crossval {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        exp: ExperimentArgs,
        #[command(flatten)]
        par: ParallelArgs,
        /// Run directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Full seed-averaged experiment into a run directory.
    Experiment {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        exp: ExperimentArgs,
        #[command(flatten)]
        par: ParallelArgs,
        /// Run directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Render SVG figures from an existing report.json or cv.json.
    Report {
        /// Report written by `experiment` or `crossval`.
        #[arg(long)]
        report: PathBuf,
        /// Directory for the figures.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Input CSV: a descriptor file or a ready feature table.
    #[arg(long)]
    data: PathBuf,
    /// JSON object mapping each column name to its role.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Atomic mass table, CSV `symbol,mass_amu`.
    #[arg(long)]
    masses: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed: SMOTE, CV, and split seeds N, N+1, ...
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    smote_mode: Option<SmoteArg>,
    #[arg(long, value_enum)]
    features: Option<FeaturesArg>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
}

#[derive(Args, Debug)]
struct ParallelArgs {
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SmoteArg {
    Off,
    Global,
    TrainOnly,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FeaturesArg {
    Original,
    Interactions,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelArg {
    Logistic,
    Forest,
    Svm,
    Gbt,
    Stack,
}

impl ExperimentArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            smote_mode: self.smote_mode.map(|m| match m {
                SmoteArg::Off => SmoteMode::Off,
                SmoteArg::Global => SmoteMode::Global,
                SmoteArg::TrainOnly => SmoteMode::TrainOnly,
            }),
            feature_mode: self.features.map(|f| match f {
                FeaturesArg::Original => FeatureMode::OriginalOnly,
                FeaturesArg::Interactions => FeatureMode::WithInteractions,
            }),
            model: self.model.map(|m| m.to_possible_value().expect("no skipped variants").get_name().to_string()),
        }
    }

    fn resolve(&self) -> Result<hmdim_core::pipeline::ExperimentConfig> {
        let seeds = std::env::var(SEEDS_VAR).ok();
        resolve(self.config.as_deref(), seeds.as_deref(), &self.overrides())
    }
}

impl DataArgs {
    fn schema(&self) -> Result<Option<csvio::Schema>> {
        self.schema.as_deref().map(load_schema).transpose()
    }

    fn masses(&self) -> Result<MassTable> {
        let Some(path) = &self.masses else {
            return Ok(MassTable::standard());
        };
        let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
        MassTable::from_csv_str(&text).map_err(|e| CliError::Input { path: path.clone(), reason: e.to_string() })
    }
}

fn threads(par: &ParallelArgs) -> Result<Option<usize>> {
    if par.threads.is_some() {
        return Ok(par.threads);
    }
    match std::env::var(THREADS_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{THREADS_VAR}: expected a thread count, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.into(), source })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.into(), source })
}

/// Featurized and mode-selected training table.
fn load_selected(data: &DataArgs, config: &hmdim_core::pipeline::ExperimentConfig) -> Result<DatasetTable> {
    let table = load_dataset(&data.data, data.schema()?.as_ref(), &config.feature_config(), &data.masses()?)?;
    select_features(config, &table).map_err(|source| CliError::Stage { stage: "features", source })
}

fn stage<T>(stage: &'static str, r: hmdim_core::Result<T>) -> Result<T> {
    r.map_err(|source| CliError::Stage { stage, source })
}

fn cmd_parse(formula: &str) -> Result<()> {
    let comp = stage("parse", parse_formula(formula))?;
    println!("{}", serde_json::to_string(comp.counts()).expect("string keys serialize"));
    Ok(())
}

fn cmd_featurize(data: &DataArgs, exp: &ExperimentArgs, out: &Path) -> Result<()> {
    let config = exp.resolve()?;
    let raw = csvio::read_csv(&data.data, data.schema()?.as_ref())?;
    if !raw.is_descriptor_file() {
        return Err(CliError::Input {
            path: data.data.clone(),
            reason: "not a descriptor file (no formula columns)".into(),
        });
    }
    let table = load_selected(data, &config)?;
    write_table_csv(out, &table)?;
    let columns = stage("featurize", feature_manifest(&config.feature_config()))?;
    write_json(&sidecar(out, "manifest.json"), &FeatureManifest { format_version: FORMAT_VERSION, columns })
}

fn cmd_resample(data: &DataArgs, exp: &ExperimentArgs, target: &str, k: Option<usize>, out: &Path) -> Result<()> {
    let config = exp.resolve()?;
    let mut cfg = config.smote.clone();
    cfg.target_per_class = match target {
        "auto" => SmoteTarget::Auto,
        n => SmoteTarget::Count(
            n.parse().map_err(|_| CliError::Usage(format!("--target: expected `auto` or a count, got `{n}`")))?,
        ),
    };
    if let Some(k) = k {
        cfg.k_neighbors = k;
    }
    let table = load_selected(data, &config)?;
    let augmented = stage("smote", smote(&table, &cfg))?;
    write_table_csv(out, &augmented.table)?;
    let prov = SmoteProvenance::new(cfg.seed, cfg.k_neighbors, table.n_rows(), &augmented.synthetic);
    write_json(&sidecar(out, "provenance.json"), &prov)
}

fn cmd_train(data: &DataArgs, exp: &ExperimentArgs, out: &Path) -> Result<()> {
    let config = exp.resolve()?;
    stage("config", config.validate())?;
    let mut table = load_selected(data, &config)?;
    if config.smote_mode != SmoteMode::Off {
        table = stage("smote", smote(&table, &config.smote))?.table;
    }
    let scaler = stage("standardize", StandardizationParams::fit(&table))?;
    let z = stage("standardize", scaler.apply(&table))?;
    let seed = config.split.seeds[0];
    let model = stage("train", train_model(&config.model, &z, seed))?;
    let file = ModelFile::new(model, config.feature_config(), table.feature_names().to_vec(), Some(scaler), seed);
    save_model(out, &file)
}

/// Rows of `data` in the model's column order, plus whether labels were present.
fn model_inputs(data: &DataArgs, model: &ModelFile) -> Result<(DatasetTable, bool)> {
    let (table, labelled) = load_unlabeled(&data.data, data.schema()?.as_ref(), &model.features, &data.masses()?)?;
    Ok((select_columns(&table, &model.feature_names, &data.data)?, labelled))
}

fn predict_all(model: &ModelFile, table: &DatasetTable) -> Result<Vec<[f64; 4]>> {
    table.rows().map(|r| model.predict_proba(r)).collect()
}

fn cmd_predict(data: &DataArgs, model_file: &Path, out: Option<&Path>) -> Result<()> {
    let model = load_model(model_file)?;
    let (table, _) = model_inputs(data, &model)?;
    let probs = predict_all(&model, &table)?;
    let mut text = String::new();
    let ids = table.row_ids();
    if ids.is_some() {
        text.push_str("id,");
    }
    text.push_str("predicted,p0,p1,p2,p3\n");
    for (i, p) in probs.iter().enumerate() {
        if let Some(ids) = ids {
            let _ = write!(text, "{},", ids[i]);
        }
        let _ = writeln!(text, "{},{},{},{},{}", argmax(p), p[0], p[1], p[2], p[3]);
    }
    match out {
        Some(path) => write_text(path, &text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelEvaluation {
    model: String,
    data: String,
    dataset_sha256: String,
    report: ClassReport,
    auc: BTreeMap<u8, f64>,
    roc: Vec<RocCurve>,
}

fn cmd_evaluate(data: &DataArgs, model_file: &Path, out: &Path) -> Result<()> {
    let model = load_model(model_file)?;
    let (table, labelled) = model_inputs(data, &model)?;
    if !labelled {
        return Err(CliError::Input { path: data.data.clone(), reason: "evaluation needs a label column".into() });
    }
    let probs = predict_all(&model, &table)?;
    let predicted: Vec<u8> = probs.iter().map(argmax).collect();
    let report = stage("metrics", classification_report(table.labels(), &predicted))?;
    let roc = stage("metrics", roc_curves(table.labels(), &probs))?;
    let eval = ModelEvaluation {
        model: model.model.kind().into(),
        data: data.data.display().to_string(),
        dataset_sha256: dataset_sha256(&data.data)?,
        report,
        auc: auc_summary(&roc),
        roc,
    };
    create_dir(&out.join("roc"))?;
    write_json(&out.join("report.json"), &eval)?;
    let mut csv = String::from("class,precision,recall,f1,support\n");
    for m in &eval.report.per_class {
        let _ = writeln!(csv, "{},{},{},{},{}", m.class, m.precision, m.recall, m.f1, m.support);
    }
    write_text(&out.join("report.csv"), &csv)?;
    for c in &eval.roc {
        write_text(&out.join("roc").join(format!("class{}.csv", c.class)), &run::roc_csv(c))?;
    }
    Ok(())
}

fn cmd_crossval(data: &DataArgs, exp: &ExperimentArgs, par: &ParallelArgs, out: &Path) -> Result<()> {
    let mut config = exp.resolve()?;
    config.cv.get_or_insert_with(Default::default);
    if let (Some(seed), Some(cv)) = (exp.seed, config.cv.as_mut()) {
        cv.seed = seed;
    }
    let pool = thread_pool(threads(par)?)?;
    let table = load_selected(data, &config)?;
    let cv = run::run_crossval(&config, &table, &pool)?;
    run::write_cv_dir(out, &config, &cv)?;
    let provenance = Provenance {
        dataset_sha256: Some(dataset_sha256(&data.data)?),
        version: env!("CARGO_PKG_VERSION").into(),
        smote_mode: config.smote_mode,
        leakage_prone: config.smote_mode == SmoteMode::Global,
    };
    write_json(&out.join("provenance.json"), &provenance)
}

fn cmd_experiment(data: &DataArgs, exp: &ExperimentArgs, par: &ParallelArgs, out: &Path) -> Result<()> {
    let config = exp.resolve()?;
    let pool = thread_pool(threads(par)?)?;
    let table = load_selected(data, &config)?;
    let mut result = run::run_experiment(&config, &table, &pool)?;
    result.report.provenance.dataset_sha256 = Some(dataset_sha256(&data.data)?);
    run::write_run_dir(out, &result)
}

fn cmd_report(report: &Path, out: &Path) -> Result<()> {
    let value: serde_json::Value = read_json(report)?;
    let bad = |e: serde_json::Error| CliError::Json { path: report.into(), source: e };
    create_dir(out)?;
    if value.get("per_seed").is_some() {
        let r: EvaluationReport = serde_json::from_value(value).map_err(bad)?;
        for s in &r.per_seed {
            let title = format!("ROC, seed {}", s.seed);
            write_text(&out.join(format!("roc_seed{}.svg", s.seed)), &svg::roc_svg(&title, &s.roc))?;
        }
        if let Some(cv) = &r.cv {
            write_text(&out.join("cv.svg"), &svg::cv_svg(cv))?;
        }
        if let Some(imp) = &r.feature_importance {
            write_text(&out.join("feature_importance.svg"), &svg::importance_svg(imp))?;
        }
    } else {
        let cv: CvReport = serde_json::from_value(value).map_err(bad)?;
        write_text(&out.join("cv.svg"), &svg::cv_svg(&cv))?;
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Parse { formula } => cmd_parse(formula),
        Command::Featurize { data, exp, out } => cmd_featurize(data, exp, out),
        Command::Resample { data, exp, target, k, out } => cmd_resample(data, exp, target, *k, out),
        Command::Train { data, exp, out } => cmd_train(data, exp, out),
        Command::Predict { data, model_file, out } => cmd_predict(data, model_file, out.as_deref()),
        Command::Evaluate { data, model_file, out } => cmd_evaluate(data, model_file, out),
        Command::Crossval { data, exp, par, out } => cmd_crossval(data, exp, par, out),
        Command::Experiment { data, exp, par, out } => cmd_experiment(data, exp, par, out),
        Command::Report { report, out } => cmd_report(report, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hmdim: {e}");
            match e {
                CliError::Usage(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

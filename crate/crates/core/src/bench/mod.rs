//! End-to-end experimental protocol: load, filter outliers, split, select
//! features on the training part, then cross-validate and test every model.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{load_csv, synth_generate, Dataset, Encodings, FeatureSchema};
use crate::error::{Error, Result, StageExt};
use crate::metrics::{evaluate, EvalReport, RocCurve};
use crate::models::{Classifier, Family, FitOutcome, ModelConfig, TrainTrace, TrainedModel};
use crate::preprocess::{split, zscore_filter, ColumnStats, PreprocessReport};
use crate::seed;
use crate::selection::{apply_selection, rfe, RfeResult};

mod cv;
mod plan;
mod render;

pub use cv::{kfold_cv, stratified_folds, CvResult, MetricSummary};
pub use plan::{BenchmarkPlan, DataSource, RosterEntry};
pub use render::{render_csv_bundle, render_json, render_markdown, ReportFormat};

/// Fits `config` and returns the wall time of the fit alone.
pub(crate) fn timed_fit(
    config: &ModelConfig,
    train: &Dataset,
    seed: u64,
) -> Result<(FitOutcome, f64)> {
    let start = Instant::now();
    let outcome = config.fit(train, seed)?;
    Ok((outcome, start.elapsed().as_secs_f64()))
}

/// Which row ids fed each fitted statistic or model, keyed by stage name.
#[derive(Debug, Default)]
pub struct Audit {
    entries: Mutex<BTreeMap<String, Vec<usize>>>,
}

impl Audit {
    pub fn record(&self, stage: impl Into<String>, row_ids: &[usize]) {
        let mut ids = row_ids.to_vec();
        ids.sort_unstable();
        self.entries
            .lock()
            .expect("audit lock")
            .insert(stage.into(), ids);
    }

    pub fn entries(&self) -> BTreeMap<String, Vec<usize>> {
        self.entries.lock().expect("audit lock").clone()
    }
}

/// Result of fitting on a training set and scoring a disjoint test set.
#[derive(Debug, Clone, PartialEq)]
pub struct Holdout {
    pub report: EvalReport,
    pub roc: RocCurve,
    pub train_accuracy: f64,
    pub model: TrainedModel,
    pub scaler: ColumnStats,
    pub trace: Option<TrainTrace>,
}

/// Standardizes with `train` statistics, fits, and evaluates on `test`.
pub fn holdout(
    train: &Dataset,
    test: &Dataset,
    model_id: &str,
    config: &ModelConfig,
    seed: u64,
) -> Result<Holdout> {
    holdout_inner(train, test, model_id, config, seed, true, None)
}

fn holdout_inner(
    train: &Dataset,
    test: &Dataset,
    model_id: &str,
    config: &ModelConfig,
    seed: u64,
    record_timings: bool,
    audit: Option<&Audit>,
) -> Result<Holdout> {
    let scaler = ColumnStats::fit(train)?;
    let train_s = scaler.transform(train)?;
    let test_s = scaler.transform(test)?;
    if let Some(a) = audit {
        a.record(format!("test/{model_id}/standardize"), train.row_ids());
        a.record(format!("test/{model_id}/fit"), train.row_ids());
        a.record(format!("test/{model_id}/evaluate"), test.row_ids());
    }
    let (outcome, secs) = timed_fit(config, &train_s, seed)?;
    let secs = if record_timings { secs } else { 0.0 };
    let model = outcome.model;
    let train_preds = model.predict_labels(train_s.rows())?;
    let correct = train_preds
        .iter()
        .zip(train_s.labels())
        .filter(|(a, b)| a == b)
        .count();
    let scores = model.predict_scores(test_s.rows())?;
    let preds = model.predict_labels(test_s.rows())?;
    let (report, roc) = evaluate(model_id, test_s.labels(), &preds, &scores, secs)?;
    Ok(Holdout {
        report,
        roc,
        train_accuracy: correct as f64 / train_s.n_rows() as f64,
        model,
        scaler,
        trace: outcome.trace,
    })
}

/// A trained model together with everything needed to score new CSV rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub model_id: String,
    pub feature_columns: Vec<String>,
    pub encodings: Encodings,
    pub scaler: ColumnStats,
    pub model: TrainedModel,
    pub train_time_seconds: f64,
    pub trace: Option<TrainTrace>,
}

impl ModelBundle {
    /// Standardizes `train`, fits `config` and records the preprocessing.
    pub fn fit(model_id: &str, train: &Dataset, config: &ModelConfig, seed: u64) -> Result<Self> {
        let scaler = ColumnStats::fit(train)?;
        let scaled = scaler.transform(train)?;
        let (outcome, secs) = timed_fit(config, &scaled, seed)?;
        Ok(Self {
            model_id: model_id.to_string(),
            feature_columns: scaler.columns.clone(),
            encodings: train.encodings().clone(),
            scaler,
            model: outcome.model,
            train_time_seconds: secs,
            trace: outcome.trace,
        })
    }

    /// Aligns `data` with the training columns and encodings, then scores it.
    pub fn evaluate(&self, data: &Dataset) -> Result<(EvalReport, RocCurve)> {
        let schema = data.schema();
        let idx = self
            .feature_columns
            .iter()
            .map(|c| {
                schema
                    .index_of(c)
                    .ok_or_else(|| Error::UnknownColumn(c.clone()))
            })
            .collect::<Result<Vec<usize>>>()?;
        let aligned = data.select_columns(&idx).recode_categories(&self.encodings);
        let x = self.scaler.transform_matrix(aligned.rows())?;
        let scores = self.model.predict_scores(&x)?;
        let preds = self.model.predict_labels(&x)?;
        evaluate(
            &self.model_id,
            aligned.labels(),
            &preds,
            &scores,
            self.train_time_seconds,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model_id: String,
    pub family: Family,
    pub seed: u64,
    pub cv: CvResult,
    pub test: EvalReport,
    pub train_accuracy: f64,
    pub train_time_seconds: f64,
    pub roc: RocCurve,
    pub trace: Option<TrainTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub seed: u64,
    pub train_rows: usize,
    pub test_rows: usize,
    pub train_positives: usize,
    pub test_positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub artifact_version: String,
    pub threads: usize,
    pub clock: String,
    pub os: String,
    pub arch: String,
}

impl Environment {
    pub fn current() -> Self {
        Self {
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            threads: rayon::current_num_threads(),
            clock: "monotonic (std::time::Instant), fit only".to_string(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub plan: BenchmarkPlan,
    pub rows_loaded: usize,
    pub features: Vec<String>,
    pub preprocess: Option<PreprocessReport>,
    pub split: SplitSummary,
    pub rfe: Option<RfeResult>,
    pub models: Vec<ModelReport>,
    pub environment: Environment,
    pub notes: Vec<String>,
}

pub fn load_source(source: &DataSource) -> Result<Dataset> {
    match source {
        DataSource::Csv {
            path,
            label_column,
            positive_label,
        } => {
            let schema = FeatureSchema::infer_from_csv(path, label_column, positive_label)?;
            load_csv(path, &schema)
        }
        DataSource::Synth(spec) => synth_generate(spec),
    }
}

pub fn run_benchmark(plan: &BenchmarkPlan) -> Result<BenchmarkReport> {
    run(plan, None)
}

/// Same as `run_benchmark`, also returning the row ids behind every fit.
pub fn run_benchmark_audited(
    plan: &BenchmarkPlan,
) -> Result<(BenchmarkReport, BTreeMap<String, Vec<usize>>)> {
    let audit = Audit::default();
    let report = run(plan, Some(&audit))?;
    Ok((report, audit.entries()))
}

fn run(plan: &BenchmarkPlan, audit: Option<&Audit>) -> Result<BenchmarkReport> {
    plan.validate().stage("plan")?;
    let data = load_source(&plan.source).stage("load")?;
    let rows_loaded = data.n_rows();

    let (data, preprocess) = match plan.z_threshold {
        Some(z) => {
            let (d, r) = zscore_filter(&data, z).stage("preprocess")?;
            if let Some(a) = audit {
                a.record("preprocess/zscore", data.row_ids());
            }
            (d, Some(r))
        }
        None => (data, None),
    };

    let split_seed = plan
        .split_seed
        .unwrap_or_else(|| seed::derive(plan.master_seed, "split"));
    let parts = split(&data, plan.split_ratio, split_seed, plan.stratified).stage("split")?;
    if let Some(a) = audit {
        a.record("split/train", parts.train.row_ids());
        a.record("split/test", parts.test.row_ids());
    }

    let (train, test, rfe_result) = match plan.rfe_k {
        Some(k) => {
            let rfe_seed = seed::derive(plan.master_seed, "rfe");
            let r = rfe(
                &parts.train,
                k,
                &plan.rfe_estimator,
                plan.rfe_step,
                rfe_seed,
            )
            .stage("select")?;
            if let Some(a) = audit {
                a.record("select/rfe", parts.train.row_ids());
            }
            let train = apply_selection(&parts.train, &r).stage("select")?;
            let test = apply_selection(&parts.test, &r).stage("select")?;
            (train, test, Some(r))
        }
        None => (parts.train, parts.test, None),
    };

    let cv_seed = seed::derive(plan.master_seed, "cv");
    let mut models = Vec::with_capacity(plan.roster.len());
    for entry in &plan.roster {
        let id = &entry.model_id;
        let model_seed = seed::derive(plan.master_seed, id);
        let cv = cv::kfold_cv_inner(
            &train,
            id,
            &entry.config,
            plan.cv_folds,
            cv_seed,
            plan.record_timings,
            audit,
        )
        .stage(&format!("cv:{id}"))?;
        let h = holdout_inner(
            &train,
            &test,
            id,
            &entry.config,
            model_seed,
            plan.record_timings,
            audit,
        )
        .stage(&format!("test:{id}"))?;
        models.push(ModelReport {
            model_id: id.clone(),
            family: entry.config.family(),
            seed: model_seed,
            cv,
            train_time_seconds: h.report.train_time_seconds,
            test: h.report,
            train_accuracy: h.train_accuracy,
            roc: h.roc,
            trace: h.trace,
        });
    }

    let mut notes = vec![
        "cross-validation runs on the training split only; the test split is used once per model".to_string(),
        "standardization statistics are refitted on the training rows of every fold and of the final split".to_string(),
    ];
    if plan.z_threshold.is_some() {
        notes.push("outlier filtering is applied to the full dataset before splitting".to_string());
    }
    if !plan.record_timings {
        notes.push("timings disabled: every train_time_seconds is 0".to_string());
    }

    Ok(BenchmarkReport {
        plan: plan.clone(),
        rows_loaded,
        features: train
            .schema()
            .feature_names()
            .into_iter()
            .map(String::from)
            .collect(),
        preprocess,
        split: SplitSummary {
            seed: split_seed,
            train_rows: train.n_rows(),
            test_rows: test.n_rows(),
            train_positives: train.positives(),
            test_positives: test.positives(),
        },
        rfe: rfe_result,
        models,
        environment: Environment::current(),
        notes,
    })
}

//! Static-feature malware classification: CSV ingestion, z-score outlier
//! filtering, recursive feature elimination, six from-scratch classifier
//! families, evaluation metrics and a seeded cross-validation benchmark.
//!
//! Label 1 always means malware.

pub mod bench;
pub mod data;
pub mod error;
pub mod matrix;
pub mod metrics;
pub mod models;
pub mod preprocess;
pub mod seed;
pub mod selection;
mod serde_float;

pub use bench::{
    holdout, kfold_cv, render_csv_bundle, render_json, render_markdown, run_benchmark,
    run_benchmark_audited, stratified_folds, BenchmarkPlan, BenchmarkReport, CvResult, DataSource,
    Holdout, ModelReport, ReportFormat, RosterEntry,
};
pub use data::{load_csv, synth_generate, Dataset, FeatureSchema, SynthPattern, SynthSpec};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use metrics::{
    confusion, evaluate, kappa, mcc, roc_auc, ConfusionMatrix, EvalReport, RocCurve,
};
pub use models::{Classifier, Family, ModelConfig, TrainedModel};
pub use preprocess::{split, standardize, zscore_filter, ColumnStats, PreprocessReport, Split};
pub use selection::{apply_selection, rfe, RfeResult};

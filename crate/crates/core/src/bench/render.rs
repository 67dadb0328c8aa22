use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::BenchmarkReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
    CsvBundle,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "markdown" | "md" => Ok(Self::Markdown),
            "csv" | "csv-bundle" => Ok(Self::CsvBundle),
            other => Err(Error::InvalidConfig(format!(
                "unknown report format `{other}`"
            ))),
        }
    }
}

/// Canonical, lossless form.
pub fn render_json(report: &BenchmarkReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

fn pct(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

fn table(out: &mut String, title: &str, header: &[&str], rows: Vec<Vec<String>>) {
    let _ = writeln!(out, "## {title}\n");
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
    out.push('\n');
}

/// Human-readable tables: accuracy and training time, classification
/// metrics, AUC, cross-validation, agreement scores and confusion matrices.
pub fn render_markdown(report: &BenchmarkReport) -> String {
    let mut out = String::from("# Benchmark report\n\n");
    let _ = writeln!(
        out,
        "Rows loaded: {}. Train/test: {}/{}. Features used: {}. Folds: {}. Master seed: {}.\n",
        report.rows_loaded,
        report.split.train_rows,
        report.split.test_rows,
        report.features.len(),
        report.plan.cv_folds,
        report.plan.master_seed
    );
    if let Some(p) = &report.preprocess {
        let _ = writeln!(
            out,
            "Outlier filter removed {} of {} rows.\n",
            p.rows_removed, p.rows_in
        );
    }
    if let Some(r) = &report.rfe {
        let _ = writeln!(
            out,
            "Selected features ({}, estimator {}): {}\n",
            r.selected.len(),
            r.estimator_id,
            r.selected.join(", ")
        );
    }
    let m = &report.models;
    table(
        &mut out,
        "Accuracy and training time",
        &[
            "Model",
            "CV accuracy (%)",
            "Test accuracy (%)",
            "Train time (s)",
        ],
        m.iter()
            .map(|r| {
                vec![
                    r.model_id.clone(),
                    pct(r.cv.mean.accuracy),
                    pct(r.test.accuracy),
                    format!("{:.4}", r.train_time_seconds),
                ]
            })
            .collect(),
    );
    table(
        &mut out,
        "Test-set performance",
        &["Model", "Accuracy (%)", "Precision", "Recall", "F1"],
        m.iter()
            .map(|r| {
                vec![
                    r.model_id.clone(),
                    pct(r.test.accuracy),
                    format!("{:.4}", r.test.precision),
                    format!("{:.4}", r.test.recall),
                    format!("{:.4}", r.test.f1),
                ]
            })
            .collect(),
    );
    table(
        &mut out,
        "ROC AUC",
        &["Model", "AUC"],
        m.iter()
            .map(|r| vec![r.model_id.clone(), format!("{:.4}", r.test.auc)])
            .collect(),
    );
    table(
        &mut out,
        &format!("{}-fold cross-validation", report.plan.cv_folds),
        &[
            "Model",
            "Mean accuracy (%)",
            "Std (%)",
            "Mean AUC",
            "Train accuracy (%)",
        ],
        m.iter()
            .map(|r| {
                vec![
                    r.model_id.clone(),
                    pct(r.cv.mean.accuracy),
                    pct(r.cv.std.accuracy),
                    format!("{:.4}", r.cv.mean.auc),
                    pct(r.train_accuracy),
                ]
            })
            .collect(),
    );
    table(
        &mut out,
        "Agreement",
        &["Model", "MCC", "Kappa"],
        m.iter()
            .map(|r| {
                vec![
                    r.model_id.clone(),
                    format!("{:.4}", r.test.mcc),
                    format!("{:.4}", r.test.kappa),
                ]
            })
            .collect(),
    );
    table(
        &mut out,
        "Confusion matrices",
        &["Model", "TP", "FP", "FN", "TN"],
        m.iter()
            .map(|r| {
                let c = &r.test.cm;
                vec![
                    r.model_id.clone(),
                    c.tp.to_string(),
                    c.fp.to_string(),
                    c.fn_.to_string(),
                    c.tn.to_string(),
                ]
            })
            .collect(),
    );
    let e = &report.environment;
    let _ = writeln!(
        out,
        "Environment: version {}, {} threads, {}/{}, clock {}.",
        e.artifact_version, e.threads, e.os, e.arch, e.clock
    );
    for n in &report.notes {
        let _ = writeln!(out, "\n- {n}");
    }
    out
}

fn file_stem(model_id: &str) -> String {
    model_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes `summary.csv`, one `roc_<model>.csv` per model and one
/// `trace_<model>.csv` per network model. Returns the files written.
pub fn render_csv_bundle(report: &BenchmarkReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let summary = dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&summary)?;
    w.write_record([
        "model_id",
        "family",
        "cv_accuracy_mean",
        "cv_accuracy_std",
        "test_accuracy",
        "precision",
        "recall",
        "f1",
        "auc",
        "mcc",
        "kappa",
        "train_time_seconds",
    ])?;
    for m in &report.models {
        w.write_record([
            m.model_id.clone(),
            m.family.to_string(),
            m.cv.mean.accuracy.to_string(),
            m.cv.std.accuracy.to_string(),
            m.test.accuracy.to_string(),
            m.test.precision.to_string(),
            m.test.recall.to_string(),
            m.test.f1.to_string(),
            m.test.auc.to_string(),
            m.test.mcc.to_string(),
            m.test.kappa.to_string(),
            m.train_time_seconds.to_string(),
        ])?;
    }
    w.flush()?;
    written.push(summary);

    for m in &report.models {
        let stem = file_stem(&m.model_id);
        let roc = dir.join(format!("roc_{stem}.csv"));
        m.roc.write_csv(&roc)?;
        written.push(roc);
        if let Some(t) = &m.trace {
            let path = dir.join(format!("trace_{stem}.csv"));
            t.write_csv(&path)?;
            written.push(path);
        }
    }
    Ok(written)
}

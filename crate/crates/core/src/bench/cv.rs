use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{timed_fit, Audit};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalReport};
use crate::models::{Classifier, ModelConfig};
use crate::preprocess::ColumnStats;
use crate::seed;

/// Seeded stratified partition of row positions into `k` folds.
///
/// Each class is shuffled and dealt round-robin, continuing where the
/// previous class stopped, so every fold holds within one row of its share
/// of each class and of the total. Folds are returned sorted.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidPlan("cv_folds must be at least 2".into()));
    }
    let mut classes: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        if l > 1 {
            return Err(Error::NonBinaryValue(l));
        }
        classes[l as usize].push(i);
    }
    for (c, idx) in classes.iter().enumerate() {
        if idx.len() < k {
            return Err(Error::FoldTooSmall {
                folds: k,
                class: c as u8,
                rows: idx.len(),
            });
        }
    }
    let mut rng = seed::rng(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for mut idx in classes {
        idx.shuffle(&mut rng);
        for i in idx {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

/// Mean or spread of each scalar metric over folds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub mcc: f64,
    pub kappa: f64,
    pub train_time_seconds: f64,
}

impl MetricSummary {
    fn values(r: &EvalReport) -> [f64; 8] {
        [
            r.accuracy,
            r.precision,
            r.recall,
            r.f1,
            r.auc,
            r.mcc,
            r.kappa,
            r.train_time_seconds,
        ]
    }

    fn from_array(a: [f64; 8]) -> Self {
        Self {
            accuracy: a[0],
            precision: a[1],
            recall: a[2],
            f1: a[3],
            auc: a[4],
            mcc: a[5],
            kappa: a[6],
            train_time_seconds: a[7],
        }
    }

    /// Mean and population standard deviation over `folds`.
    pub fn aggregate(folds: &[EvalReport]) -> (Self, Self) {
        let n = folds.len() as f64;
        let mut mean = [0.0; 8];
        for f in folds {
            for (m, v) in mean.iter_mut().zip(Self::values(f)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = [0.0; 8];
        for f in folds {
            for ((s, v), m) in var.iter_mut().zip(Self::values(f)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.map(|s| (s / n).sqrt());
        (Self::from_array(mean), Self::from_array(std))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub model_id: String,
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<EvalReport>,
    pub mean: MetricSummary,
    pub std: MetricSummary,
}

/// Stratified k-fold cross-validation. Each fold is standardized with
/// statistics from its own training rows. Folds run in parallel; the
/// result does not depend on the thread count.
pub fn kfold_cv(
    train: &Dataset,
    model_id: &str,
    config: &ModelConfig,
    k: usize,
    seed: u64,
) -> Result<CvResult> {
    kfold_cv_inner(train, model_id, config, k, seed, true, None)
}

pub(crate) fn kfold_cv_inner(
    train: &Dataset,
    model_id: &str,
    config: &ModelConfig,
    k: usize,
    seed: u64,
    record_timings: bool,
    audit: Option<&Audit>,
) -> Result<CvResult> {
    let folds = stratified_folds(train.labels(), k, seed)?;
    let n = train.n_rows();
    let fit_seed = seed::derive(seed, model_id);
    let reports = folds
        .par_iter()
        .enumerate()
        .map(|(f, held)| {
            let mut in_fold = vec![false; n];
            held.iter().for_each(|&i| in_fold[i] = true);
            let fit_idx: Vec<usize> = (0..n).filter(|&i| !in_fold[i]).collect();
            let fit_rows = train.subset(&fit_idx);
            let held_rows = train.subset(held);
            let stats = ColumnStats::fit(&fit_rows)?;
            let fit_rows = stats.transform(&fit_rows)?;
            let held_rows = stats.transform(&held_rows)?;
            let stage = format!("cv/{model_id}/fold{f}");
            if let Some(a) = audit {
                a.record(format!("{stage}/standardize"), fit_rows.row_ids());
                a.record(format!("{stage}/fit"), fit_rows.row_ids());
                a.record(format!("{stage}/heldout"), held_rows.row_ids());
            }
            let (outcome, secs) =
                timed_fit(config, &fit_rows, seed::derive_index(fit_seed, f as u64))?;
            let model = outcome.model;
            let scores = model.predict_scores(held_rows.rows())?;
            let preds = model.predict_labels(held_rows.rows())?;
            let secs = if record_timings { secs } else { 0.0 };
            let (report, _) = evaluate(model_id, held_rows.labels(), &preds, &scores, secs)?;
            Ok(report)
        })
        .collect::<Result<Vec<EvalReport>>>()?;
    let (mean, std) = MetricSummary::aggregate(&reports);
    Ok(CvResult {
        model_id: model_id.to_string(),
        k,
        seed,
        folds: reports,
        mean,
        std,
    })
}

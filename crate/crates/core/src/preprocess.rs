//! Outlier removal, standardization and train/test splitting.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

pub const DEFAULT_Z_THRESHOLD: f64 = 3.0;
pub const DEFAULT_SPLIT_RATIO: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Audit trail of a z-score filtering pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub rows_in: usize,
    pub rows_removed: usize,
    pub removed_row_ids: Vec<usize>,
    #[serde(with = "crate::serde_float")]
    pub z_threshold: f64,
    pub per_column_stats: BTreeMap<String, MeanStd>,
    /// Categorical columns that were integer-encoded as-is. A hashed column
    /// in the source corpus lands here: it is treated as an opaque category.
    #[serde(default)]
    pub categorical_columns: Vec<String>,
}

/// Population mean and standard deviation of every column.
fn column_moments(m: &Matrix) -> Vec<MeanStd> {
    let n = m.rows() as f64;
    let d = m.cols();
    let mut mean = vec![0.0; d];
    for row in m.row_iter() {
        for (acc, v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|s| *s /= n);
    let mut var = vec![0.0; d];
    for row in m.row_iter() {
        for ((acc, v), mu) in var.iter_mut().zip(row).zip(&mean) {
            let dv = v - mu;
            *acc += dv * dv;
        }
    }
    mean.into_iter()
        .zip(var)
        .map(|(mean, v)| MeanStd {
            mean,
            std: (v / n).sqrt(),
        })
        .collect()
}

#[inline]
fn zscore(x: f64, s: &MeanStd) -> f64 {
    if s.std > 0.0 {
        (x - s.mean) / s.std
    } else {
        0.0
    }
}

/// Removes every row whose z-score exceeds `threshold` in magnitude in any
/// column. Statistics are computed once over all input rows.
pub fn zscore_filter(data: &Dataset, threshold: f64) -> Result<(Dataset, PreprocessReport)> {
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "z threshold must be positive, got {threshold}"
        )));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let stats = column_moments(data.rows());
    let mut keep = Vec::with_capacity(data.n_rows());
    let mut removed_row_ids = Vec::new();
    for (i, row) in data.rows().row_iter().enumerate() {
        let outlier = row
            .iter()
            .zip(&stats)
            .any(|(&x, s)| zscore(x, s).abs() > threshold);
        if outlier {
            removed_row_ids.push(data.row_ids()[i]);
        } else {
            keep.push(i);
        }
    }
    if keep.is_empty() {
        return Err(Error::EmptyResult { threshold });
    }
    let report = PreprocessReport {
        rows_in: data.n_rows(),
        rows_removed: removed_row_ids.len(),
        removed_row_ids,
        z_threshold: threshold,
        per_column_stats: data
            .schema()
            .feature_names()
            .into_iter()
            .map(String::from)
            .zip(stats)
            .collect(),
        categorical_columns: data.schema().categorical_columns(),
    };
    Ok((data.subset(&keep), report))
}

/// Per-column affine scaling fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ColumnStats {
    pub fn fit(train: &Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let (mean, std) = column_moments(train.rows())
            .into_iter()
            .map(|s| (s.mean, s.std))
            .unzip();
        Ok(Self {
            columns: train
                .schema()
                .feature_names()
                .into_iter()
                .map(String::from)
                .collect(),
            mean,
            std,
        })
    }

    pub fn transform_matrix(&self, m: &Matrix) -> Result<Matrix> {
        if m.cols() != self.mean.len() {
            return Err(Error::ShapeMismatch {
                expected: self.mean.len(),
                got: m.cols(),
            });
        }
        let mut out = m.clone();
        for r in 0..out.rows() {
            for ((v, mu), sd) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = if *sd > 0.0 { (*v - mu) / sd } else { 0.0 };
            }
        }
        Ok(out)
    }

    pub fn transform(&self, data: &Dataset) -> Result<Dataset> {
        data.with_matrix(self.transform_matrix(data.rows())?)
    }

    /// Undoes `transform`. Columns with zero spread map back to their mean.
    pub fn inverse_matrix(&self, m: &Matrix) -> Result<Matrix> {
        if m.cols() != self.mean.len() {
            return Err(Error::ShapeMismatch {
                expected: self.mean.len(),
                got: m.cols(),
            });
        }
        let mut out = m.clone();
        for r in 0..out.rows() {
            for ((v, mu), sd) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * sd + mu;
            }
        }
        Ok(out)
    }
}

/// Standardizes both sets with statistics fitted on `train` only.
pub fn standardize(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset, ColumnStats)> {
    let stats = ColumnStats::fit(train)?;
    Ok((stats.transform(train)?, stats.transform(test)?, stats))
}

/// A train/test partition of one source dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    pub ratio: f64,
    pub seed: u64,
    pub stratified: bool,
}

#[inline]
fn floor_product(ratio: f64, n: usize) -> usize {
    (ratio * n as f64 + 1e-9).floor() as usize
}

/// Train-row quota per class such that the total equals `floor(ratio * n)`
/// and each class is within one row of its exact proportional share.
pub(crate) fn stratified_quotas(ratio: f64, class_sizes: &[usize]) -> Vec<usize> {
    let n: usize = class_sizes.iter().sum();
    let target = floor_product(ratio, n);
    let mut quotas: Vec<usize> = class_sizes
        .iter()
        .map(|&c| floor_product(ratio, c))
        .collect();
    let mut deficit = target.saturating_sub(quotas.iter().sum());
    let mut order: Vec<usize> = (0..class_sizes.len()).collect();
    let frac = |c: usize| ratio * class_sizes[c] as f64 - quotas[c] as f64;
    order.sort_by(|&a, &b| frac(b).total_cmp(&frac(a)).then(a.cmp(&b)));
    for c in order {
        if deficit == 0 {
            break;
        }
        if quotas[c] < class_sizes[c] {
            quotas[c] += 1;
            deficit -= 1;
        }
    }
    quotas
}

/// Seeded shuffled partition; both parts keep the source's relative row order.
pub fn split(data: &Dataset, ratio: f64, seed: u64, stratified: bool) -> Result<Split> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidRatio(ratio));
    }
    let n = data.n_rows();
    let target = floor_product(ratio, n);
    if target == 0 || target >= n {
        return Err(Error::InvalidRatio(ratio));
    }
    let mut rng = seed::rng(seed);
    let mut train_idx = Vec::with_capacity(target);
    let mut test_idx = Vec::with_capacity(n - target);
    if stratified {
        let classes = data.class_indices();
        for (c, idx) in classes.iter().enumerate() {
            if idx.is_empty() {
                return Err(Error::InsufficientClassRows {
                    class: c as u8,
                    rows: 0,
                });
            }
        }
        let quotas = stratified_quotas(ratio, &[classes[0].len(), classes[1].len()]);
        for (mut idx, quota) in classes.into_iter().zip(quotas) {
            idx.shuffle(&mut rng);
            train_idx.extend_from_slice(&idx[..quota]);
            test_idx.extend_from_slice(&idx[quota..]);
        }
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        train_idx.extend_from_slice(&idx[..target]);
        test_idx.extend_from_slice(&idx[target..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok(Split {
        train: data.subset(&train_idx),
        test: data.subset(&test_idx),
        ratio,
        seed,
        stratified,
    })
}

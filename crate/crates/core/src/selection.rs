//! Recursive feature elimination.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{Family, ModelConfig};
use crate::preprocess::ColumnStats;

pub const DEFAULT_K: usize = 25;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RfeResult {
    /// Surviving columns, sorted by name.
    pub selected: Vec<String>,
    /// 1 for survivors; eliminated columns count up from 2, the first one
    /// eliminated holding the largest rank.
    pub ranking: BTreeMap<String, usize>,
    pub estimator_id: String,
    pub step: usize,
}

pub fn supports_importance(family: Family) -> bool {
    matches!(
        family,
        Family::Logreg | Family::Svm | Family::Tree | Family::Forest
    )
}

/// Eliminates the `step` least important columns per round until `k` remain.
///
/// Columns are visited in name order and standardized with statistics from
/// `train`, so the result does not depend on the input column order. Equal
/// importances drop the lexicographically later name first.
pub fn rfe(
    train: &Dataset,
    k: usize,
    estimator: &ModelConfig,
    step: usize,
    seed: u64,
) -> Result<RfeResult> {
    let d = train.n_features();
    if k == 0 || k > d {
        return Err(Error::InvalidK { k, features: d });
    }
    if step == 0 {
        return Err(Error::InvalidConfig("rfe step must be at least 1".into()));
    }
    let family = estimator.family();
    if !supports_importance(family) {
        return Err(Error::EstimatorLacksImportance(family.to_string()));
    }
    estimator.validate()?;

    let names: Vec<String> = train
        .schema()
        .feature_names()
        .into_iter()
        .map(String::from)
        .collect();
    let mut by_name: Vec<usize> = (0..d).collect();
    by_name.sort_by(|&a, &b| names[a].cmp(&names[b]));
    let ordered = train.select_columns(&by_name);
    let ordered = ColumnStats::fit(&ordered)?.transform(&ordered)?;
    let ordered_names: Vec<&str> = by_name.iter().map(|&i| names[i].as_str()).collect();

    // positions into `ordered`, kept in name order
    let mut remaining: Vec<usize> = (0..d).collect();
    let mut eliminated: Vec<usize> = Vec::with_capacity(d - k);
    while remaining.len() > k {
        let view = ordered.select_columns(&remaining);
        let importance = estimator.fit(&view, seed)?.model.importance()?;
        let mut order: Vec<usize> = (0..remaining.len()).collect();
        order.sort_by(|&a, &b| {
            importance[a]
                .total_cmp(&importance[b])
                .then_with(|| ordered_names[remaining[b]].cmp(ordered_names[remaining[a]]))
        });
        let drop_n = step.min(remaining.len() - k);
        let mut dropped: Vec<usize> = order[..drop_n].iter().map(|&p| remaining[p]).collect();
        eliminated.append(&mut dropped.clone());
        dropped.sort_unstable();
        remaining.retain(|c| dropped.binary_search(c).is_err());
    }

    let mut ranking = BTreeMap::new();
    for &c in &remaining {
        ranking.insert(ordered_names[c].to_string(), 1);
    }
    let m = eliminated.len();
    for (i, &c) in eliminated.iter().enumerate() {
        ranking.insert(ordered_names[c].to_string(), m + 1 - i);
    }
    Ok(RfeResult {
        selected: remaining
            .iter()
            .map(|&c| ordered_names[c].to_string())
            .collect(),
        ranking,
        estimator_id: family.to_string(),
        step,
    })
}

/// Restricts `data` to the selected columns, keeping their order in `data`.
pub fn apply_selection(data: &Dataset, result: &RfeResult) -> Result<Dataset> {
    let schema = data.schema();
    let mut idx = result
        .selected
        .iter()
        .map(|name| {
            schema
                .index_of(name)
                .ok_or_else(|| Error::UnknownColumn(name.clone()))
        })
        .collect::<Result<Vec<usize>>>()?;
    idx.sort_unstable();
    idx.dedup();
    Ok(data.select_columns(&idx))
}

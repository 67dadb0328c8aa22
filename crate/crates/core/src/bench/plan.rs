use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::{SynthSpec, DEFAULT_LABEL_COLUMN, DEFAULT_POSITIVE_LABEL};
use crate::error::{Error, Result};
use crate::models::{deserialize_partial_config, Family, ModelConfig};
use crate::preprocess::{DEFAULT_SPLIT_RATIO, DEFAULT_Z_THRESHOLD};

fn default_label_column() -> String {
    DEFAULT_LABEL_COLUMN.to_string()
}

fn default_positive_label() -> String {
    DEFAULT_POSITIVE_LABEL.to_string()
}

/// Where the benchmark reads its rows from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    /// CSV with an inferred schema: non-numeric columns become categorical.
    Csv {
        path: PathBuf,
        #[serde(default = "default_label_column")]
        label_column: String,
        #[serde(default = "default_positive_label")]
        positive_label: String,
    },
    Synth(SynthSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub model_id: String,
    #[serde(deserialize_with = "deserialize_partial_config")]
    pub config: ModelConfig,
}

impl RosterEntry {
    pub fn new(model_id: impl Into<String>, config: ModelConfig) -> Self {
        Self {
            model_id: model_id.into(),
            config,
        }
    }

    /// Entry named after its family, with default hyperparameters.
    pub fn default_for(family: Family) -> Self {
        Self::new(family.as_str(), family.default_config())
    }
}

fn default_z() -> Option<f64> {
    Some(DEFAULT_Z_THRESHOLD)
}

fn default_rfe_estimator() -> ModelConfig {
    Family::Logreg.default_config()
}

fn deserialize_estimator<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<ModelConfig, D::Error> {
    deserialize_partial_config(d)
}

fn one() -> usize {
    1
}

fn default_ratio() -> f64 {
    DEFAULT_SPLIT_RATIO
}

fn yes() -> bool {
    true
}

fn ten() -> usize {
    10
}

/// Everything a benchmark run depends on. Equal plans give equal reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkPlan {
    pub source: DataSource,
    /// `null` skips outlier filtering.
    #[serde(default = "default_z")]
    pub z_threshold: Option<f64>,
    /// `null` skips feature selection.
    #[serde(default)]
    pub rfe_k: Option<usize>,
    #[serde(
        default = "default_rfe_estimator",
        deserialize_with = "deserialize_estimator"
    )]
    pub rfe_estimator: ModelConfig,
    #[serde(default = "one")]
    pub rfe_step: usize,
    #[serde(default = "default_ratio")]
    pub split_ratio: f64,
    /// Defaults to a seed derived from `master_seed`.
    #[serde(default)]
    pub split_seed: Option<u64>,
    #[serde(default = "yes")]
    pub stratified: bool,
    pub roster: Vec<RosterEntry>,
    #[serde(default = "ten")]
    pub cv_folds: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// When false every training time is reported as 0, making the report
    /// byte-for-byte reproducible.
    #[serde(default = "yes")]
    pub record_timings: bool,
}

impl BenchmarkPlan {
    /// Plan with library defaults for everything but the source and roster.
    pub fn new(source: DataSource, roster: Vec<RosterEntry>) -> Self {
        Self {
            source,
            z_threshold: default_z(),
            rfe_k: None,
            rfe_estimator: default_rfe_estimator(),
            rfe_step: 1,
            split_ratio: DEFAULT_SPLIT_RATIO,
            split_seed: None,
            stratified: true,
            roster,
            cv_folds: 10,
            master_seed: 0,
            record_timings: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.roster.is_empty() {
            return Err(Error::InvalidPlan("roster is empty".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::InvalidPlan("cv_folds must be at least 2".into()));
        }
        let mut seen = BTreeSet::new();
        for e in &self.roster {
            if e.model_id.is_empty() {
                return Err(Error::InvalidPlan("empty model_id".into()));
            }
            if !seen.insert(e.model_id.as_str()) {
                return Err(Error::InvalidPlan(format!(
                    "duplicate model_id `{}`",
                    e.model_id
                )));
            }
            e.config
                .validate()
                .map_err(|err| Error::InvalidPlan(format!("{}: {err}", e.model_id)))?;
        }
        if let Some(z) = self.z_threshold {
            if z.is_nan() || z <= 0.0 {
                return Err(Error::InvalidPlan("z_threshold must be positive".into()));
            }
        }
        if self.rfe_step == 0 {
            return Err(Error::InvalidPlan("rfe_step must be at least 1".into()));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::InvalidRatio(self.split_ratio));
        }
        if let DataSource::Synth(s) = &self.source {
            s.validate()?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let plan: Self = serde_json::from_str(text)?;
        plan.validate()?;
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn minimal() -> serde_json::Value {
        json!({
            "source": {"kind": "synth", "n_rows": 100, "n_features": 4, "n_informative": 2,
                       "class_separation": 4.0, "label_flip_rate": 0.0, "seed": 1},
            "roster": [{"model_id": "lr", "config": {"family": "logreg"}}]
        })
    }

    #[test]
    fn defaults_fill_in() {
        let plan = BenchmarkPlan::from_json(&minimal().to_string()).unwrap();
        assert_eq!(plan.z_threshold, Some(3.0));
        assert_eq!(plan.cv_folds, 10);
        assert_eq!(plan.split_ratio, 0.8);
        assert!(plan.record_timings);
        assert_eq!(plan.roster[0].config, Family::Logreg.default_config());
    }

    #[test]
    fn round_trips() {
        let mut v = minimal();
        v["roster"] = json!([
            {"model_id": "dnn", "config": {"family": "dnn", "epochs": 3}},
            {"model_id": "rf", "config": {"family": "forest", "n_trees": 5}}
        ]);
        v["z_threshold"] = json!(null);
        let plan = BenchmarkPlan::from_json(&v.to_string()).unwrap();
        assert_eq!(plan.z_threshold, None);
        let text = serde_json::to_string(&plan).unwrap();
        assert_eq!(BenchmarkPlan::from_json(&text).unwrap(), plan);
    }

    #[test]
    fn invalid_plans() {
        let mut v = minimal();
        v["roster"] = json!([]);
        assert!(matches!(
            BenchmarkPlan::from_json(&v.to_string()),
            Err(Error::InvalidPlan(_))
        ));

        let mut v = minimal();
        v["cv_folds"] = json!(1);
        assert!(matches!(
            BenchmarkPlan::from_json(&v.to_string()),
            Err(Error::InvalidPlan(_))
        ));

        let mut v = minimal();
        v["roster"] = json!([
            {"model_id": "a", "config": {"family": "logreg"}},
            {"model_id": "a", "config": {"family": "knn"}}
        ]);
        assert!(matches!(
            BenchmarkPlan::from_json(&v.to_string()),
            Err(Error::InvalidPlan(_))
        ));
    }
}

//! Classifier families behind one contract: configs in, serializable trained
//! models out, scores where higher means more malware-like.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub mod knn;
pub mod logreg;
pub mod neural;
pub mod svm;
pub mod tree;

pub use knn::{KnnConfig, KnnParams};
pub use logreg::{LinearParams, LogRegConfig};
pub use neural::{NetConfig, Network, TrainTrace};
pub use svm::LinearSvmConfig;
pub use tree::{FeaturesPerSplit, ForestConfig, ForestParams, TreeConfig, TreeParams};

/// Scoring side of the classifier contract.
pub trait Classifier {
    /// One score per row; larger means more likely malware.
    fn predict_scores(&self, rows: &Matrix) -> Result<Vec<f64>>;

    /// Scores at or above this value map to label 1.
    fn decision_threshold(&self) -> f64;

    fn predict_labels(&self, rows: &Matrix) -> Result<Vec<u8>> {
        let t = self.decision_threshold();
        Ok(self
            .predict_scores(rows)?
            .into_iter()
            .map(|s| u8::from(s >= t))
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Logreg,
    Knn,
    Tree,
    Forest,
    Svm,
    Mlp,
    Dnn,
    Majority,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::Logreg,
        Family::Knn,
        Family::Tree,
        Family::Forest,
        Family::Svm,
        Family::Mlp,
        Family::Dnn,
        Family::Majority,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Logreg => "logreg",
            Family::Knn => "knn",
            Family::Tree => "tree",
            Family::Forest => "forest",
            Family::Svm => "svm",
            Family::Mlp => "mlp",
            Family::Dnn => "dnn",
            Family::Majority => "majority",
        }
    }

    pub fn default_config(&self) -> ModelConfig {
        match self {
            Family::Logreg => ModelConfig::Logreg(LogRegConfig::default()),
            Family::Knn => ModelConfig::Knn(KnnConfig::default()),
            Family::Tree => ModelConfig::Tree(TreeConfig::default()),
            Family::Forest => ModelConfig::Forest(ForestConfig::default()),
            Family::Svm => ModelConfig::Svm(LinearSvmConfig::default()),
            Family::Mlp => ModelConfig::Mlp(NetConfig::mlp()),
            Family::Dnn => ModelConfig::Dnn(NetConfig::dnn()),
            Family::Majority => ModelConfig::Majority,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model family `{s}`")))
    }
}

/// Hyperparameters for one model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelConfig {
    Logreg(LogRegConfig),
    Knn(KnnConfig),
    Tree(TreeConfig),
    Forest(ForestConfig),
    Svm(LinearSvmConfig),
    Mlp(NetConfig),
    Dnn(NetConfig),
    /// Constant predictor of the training majority class; a CV baseline.
    Majority,
}

/// Overlays the keys of `overrides` onto `base`.
fn merge(base: &mut Value, overrides: &Value) {
    if let (Value::Object(b), Value::Object(o)) = (base, overrides) {
        for (k, v) in o {
            b.insert(k.clone(), v.clone());
        }
    }
}

impl ModelConfig {
    pub fn family(&self) -> Family {
        match self {
            ModelConfig::Logreg(_) => Family::Logreg,
            ModelConfig::Knn(_) => Family::Knn,
            ModelConfig::Tree(_) => Family::Tree,
            ModelConfig::Forest(_) => Family::Forest,
            ModelConfig::Svm(_) => Family::Svm,
            ModelConfig::Mlp(_) => Family::Mlp,
            ModelConfig::Dnn(_) => Family::Dnn,
            ModelConfig::Majority => Family::Majority,
        }
    }

    /// Family defaults with the given fields replaced. `overrides` may be a
    /// partial object; a `family` key in it is ignored.
    pub fn from_partial(family: Family, overrides: &Value) -> Result<Self> {
        if !overrides.is_object() && !overrides.is_null() {
            return Err(Error::InvalidConfig("config must be a JSON object".into()));
        }
        let mut base = serde_json::to_value(family.default_config())?;
        merge(&mut base, overrides);
        if let Value::Object(m) = &mut base {
            m.insert("family".into(), Value::String(family.as_str().into()));
        }
        Ok(serde_json::from_value(base)?)
    }

    /// Parses `{"family": ..., <partial fields>}`.
    pub fn from_value(value: &Value) -> Result<Self> {
        let family: Family = value
            .get("family")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::InvalidConfig("config lacks a `family` field".into()))?
            .parse()?;
        Self::from_partial(family, value)
    }

    /// Same hyperparameters with the seed replaced (families without a seed are unchanged).
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        match &mut c {
            ModelConfig::Forest(f) => f.seed = seed,
            ModelConfig::Svm(s) => s.seed = seed,
            ModelConfig::Mlp(n) | ModelConfig::Dnn(n) => n.seed = seed,
            _ => {}
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelConfig::Logreg(c) => c.validate(),
            ModelConfig::Knn(c) => c.validate(),
            ModelConfig::Tree(c) => c.validate(),
            ModelConfig::Forest(c) => c.validate(),
            ModelConfig::Svm(c) => c.validate(),
            ModelConfig::Mlp(c) | ModelConfig::Dnn(c) => c.validate(),
            ModelConfig::Majority => Ok(()),
        }
    }

    /// Fits the model. `seed` overrides any seed stored in the config, and is
    /// the tree seed for single trees.
    pub fn fit(&self, train: &Dataset, seed: u64) -> Result<FitOutcome> {
        self.validate()?;
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let config = self.with_seed(seed);
        let (model, trace) = match config {
            ModelConfig::Logreg(c) => {
                let (parameters, _) = logreg::logreg_fit(train, &c)?;
                (
                    TrainedModel::Logreg {
                        config: c,
                        parameters,
                    },
                    None,
                )
            }
            ModelConfig::Knn(c) => {
                let parameters = knn::knn_fit(train, &c)?;
                (
                    TrainedModel::Knn {
                        config: c,
                        parameters,
                    },
                    None,
                )
            }
            ModelConfig::Tree(c) => {
                let parameters = tree::tree_fit(train, &c, seed)?;
                (
                    TrainedModel::Tree {
                        config: c,
                        parameters,
                    },
                    None,
                )
            }
            ModelConfig::Forest(c) => {
                let parameters = tree::forest_fit(train, &c)?;
                (
                    TrainedModel::Forest {
                        config: c,
                        parameters,
                    },
                    None,
                )
            }
            ModelConfig::Svm(c) => {
                let parameters = svm::svm_fit(train, &c)?;
                (
                    TrainedModel::Svm {
                        config: c,
                        parameters,
                    },
                    None,
                )
            }
            ModelConfig::Mlp(c) => {
                let (net, trace) = neural::net_fit(train, &c)?;
                (
                    TrainedModel::Mlp {
                        config: c,
                        layers: net.layers,
                    },
                    Some(trace),
                )
            }
            ModelConfig::Dnn(c) => {
                let (net, trace) = neural::net_fit(train, &c)?;
                (
                    TrainedModel::Dnn {
                        config: c,
                        layers: net.layers,
                    },
                    Some(trace),
                )
            }
            ModelConfig::Majority => {
                let positive_rate = train.positives() as f64 / train.n_rows() as f64;
                (
                    TrainedModel::Majority {
                        parameters: MajorityParams { positive_rate },
                    },
                    None,
                )
            }
        };
        Ok(FitOutcome { model, trace })
    }
}

/// Deserializes a config object whose non-`family` fields may be partial.
pub fn deserialize_partial_config<'de, D: Deserializer<'de>>(
    d: D,
) -> std::result::Result<ModelConfig, D::Error> {
    let v = Value::deserialize(d)?;
    ModelConfig::from_value(&v).map_err(serde::de::Error::custom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorityParams {
    pub positive_rate: f64,
}

/// Learned parameters, tagged by family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum TrainedModel {
    Logreg {
        config: LogRegConfig,
        parameters: LinearParams,
    },
    Knn {
        config: KnnConfig,
        parameters: KnnParams,
    },
    Tree {
        config: TreeConfig,
        parameters: TreeParams,
    },
    Forest {
        config: ForestConfig,
        parameters: ForestParams,
    },
    Svm {
        config: LinearSvmConfig,
        parameters: LinearParams,
    },
    Mlp {
        config: NetConfig,
        layers: Vec<neural::DenseLayer>,
    },
    Dnn {
        config: NetConfig,
        layers: Vec<neural::DenseLayer>,
    },
    Majority {
        parameters: MajorityParams,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub model: TrainedModel,
    /// Per-epoch curves, for the network families.
    pub trace: Option<TrainTrace>,
}

impl TrainedModel {
    pub fn family(&self) -> Family {
        match self {
            TrainedModel::Logreg { .. } => Family::Logreg,
            TrainedModel::Knn { .. } => Family::Knn,
            TrainedModel::Tree { .. } => Family::Tree,
            TrainedModel::Forest { .. } => Family::Forest,
            TrainedModel::Svm { .. } => Family::Svm,
            TrainedModel::Mlp { .. } => Family::Mlp,
            TrainedModel::Dnn { .. } => Family::Dnn,
            TrainedModel::Majority { .. } => Family::Majority,
        }
    }

    /// Per-feature importance, for families that define one.
    pub fn importance(&self) -> Result<Vec<f64>> {
        match self {
            TrainedModel::Logreg { parameters, .. } | TrainedModel::Svm { parameters, .. } => {
                Ok(parameters.weights.iter().map(|w| w.abs()).collect())
            }
            TrainedModel::Tree { parameters, .. } => Ok(parameters.importance.clone()),
            TrainedModel::Forest { parameters, .. } => Ok(parameters.importance.clone()),
            other => Err(Error::EstimatorLacksImportance(other.family().to_string())),
        }
    }
}

impl Classifier for TrainedModel {
    fn predict_scores(&self, rows: &Matrix) -> Result<Vec<f64>> {
        match self {
            TrainedModel::Logreg { parameters, .. } => logreg::predict_proba(parameters, rows),
            TrainedModel::Svm { parameters, .. } => parameters.margins(rows),
            TrainedModel::Knn { config, parameters } => knn::knn_predict(parameters, config, rows),
            TrainedModel::Tree { parameters, .. } => parameters.predict_scores(rows),
            TrainedModel::Forest { parameters, .. } => parameters.predict_scores(rows),
            TrainedModel::Mlp { layers, .. } | TrainedModel::Dnn { layers, .. } => {
                neural::predict_layers(layers, rows)
            }
            TrainedModel::Majority { parameters } => {
                Ok(vec![parameters.positive_rate; rows.rows()])
            }
        }
    }

    fn decision_threshold(&self) -> f64 {
        match self {
            TrainedModel::Svm { .. } => 0.0,
            _ => 0.5,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn partial_config_fills_defaults() {
        let c = ModelConfig::from_value(&json!({"family": "mlp", "epochs": 3})).unwrap();
        match c {
            ModelConfig::Mlp(n) => {
                assert_eq!(n.epochs, 3);
                assert_eq!(n.hidden_layers, vec![100]);
            }
            other => panic!("unexpected {other:?}"),
        }
        let d = ModelConfig::from_value(&json!({"family": "dnn"})).unwrap();
        assert_eq!(d, ModelConfig::Dnn(NetConfig::dnn()));
        assert!(ModelConfig::from_value(&json!({"epochs": 3})).is_err());
        assert!(ModelConfig::from_value(&json!({"family": "cnn"})).is_err());
    }

    #[test]
    fn full_config_round_trips() {
        for f in Family::ALL {
            let c = f.default_config();
            let v = serde_json::to_value(&c).unwrap();
            assert_eq!(ModelConfig::from_value(&v).unwrap(), c);
            assert_eq!(c.family(), f);
        }
    }

    #[test]
    fn knn_lacks_importance() {
        let ds = Dataset::from_matrix(
            Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap(),
            vec![0, 1, 1],
        )
        .unwrap();
        let m = ModelConfig::Knn(KnnConfig {
            k: 1,
            ..Default::default()
        })
        .fit(&ds, 0)
        .unwrap()
        .model;
        assert!(matches!(
            m.importance(),
            Err(Error::EstimatorLacksImportance(_))
        ));
    }
}

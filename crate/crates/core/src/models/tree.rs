//! CART classification trees (Gini impurity) and bagged random forests.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeaturesPerSplit {
    /// `max(1, floor(sqrt(d)))` candidate features per node.
    #[default]
    Sqrt,
    All,
}

impl FeaturesPerSplit {
    fn count(&self, d: usize) -> usize {
        match self {
            FeaturesPerSplit::Sqrt => ((d as f64).sqrt().floor() as usize).max(1),
            FeaturesPerSplit::All => d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub features_per_split: FeaturesPerSplit,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
            features_per_split: FeaturesPerSplit::Sqrt,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_split < 2 {
            return Err(Error::InvalidConfig(
                "min_samples_split must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub features_per_split: FeaturesPerSplit,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            features_per_split: FeaturesPerSplit::Sqrt,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("n_trees must be at least 1".into()));
        }
        self.tree_config().validate()
    }

    pub fn tree_config(&self) -> TreeConfig {
        TreeConfig {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            features_per_split: self.features_per_split,
        }
    }
}

/// Tree node; children are indices into the owning node list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf_score: f64,
    },
}

/// Flat node list with the root at index 0. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub n_features: usize,
    pub nodes: Vec<Node>,
    /// Normalized total Gini decrease per feature.
    pub importance: Vec<f64>,
}

impl TreeParams {
    pub fn score_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { leaf_score } => return leaf_score,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[feature] <= threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }

    pub fn predict_scores(&self, rows: &Matrix) -> Result<Vec<f64>> {
        check_width(self.n_features, rows)?;
        Ok(rows.row_iter().map(|r| self.score_row(r)).collect())
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

fn check_width(expected: usize, rows: &Matrix) -> Result<()> {
    if rows.cols() != expected {
        return Err(Error::ShapeMismatch {
            expected,
            got: rows.cols(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: Vec<TreeParams>,
    /// Mean of the per-tree importances.
    pub importance: Vec<f64>,
}

impl ForestParams {
    /// Mean tree score, summed in tree order.
    pub fn predict_scores(&self, rows: &Matrix) -> Result<Vec<f64>> {
        let d = self.trees.first().map_or(0, |t| t.n_features);
        check_width(d, rows)?;
        let n_trees = self.trees.len() as f64;
        Ok((0..rows.rows())
            .into_par_iter()
            .map(|r| {
                let row = rows.row(r);
                self.trees.iter().map(|t| t.score_row(row)).sum::<f64>() / n_trees
            })
            .collect())
    }
}

#[inline]
fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    /// Sample-weighted child impurity, `n_left * g_left + n_right * g_right`.
    child_impurity: f64,
}

/// Best threshold on one feature among midpoints of adjacent distinct values.
fn best_threshold(
    x: &Matrix,
    y: &[u8],
    samples: &[usize],
    feature: usize,
    total_pos: usize,
    scratch: &mut Vec<(f64, u8)>,
) -> Option<(f64, f64)> {
    scratch.clear();
    scratch.extend(samples.iter().map(|&i| (x.get(i, feature), y[i])));
    scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = scratch.len();
    if scratch[0].0 == scratch[n - 1].0 {
        return None;
    }
    let mut best: Option<(f64, f64)> = None;
    let mut left_pos = 0usize;
    for i in 0..n - 1 {
        left_pos += scratch[i].1 as usize;
        let (a, b) = (scratch[i].0, scratch[i + 1].0);
        if a == b {
            continue;
        }
        let nl = i + 1;
        let nr = n - nl;
        let impurity = nl as f64 * gini(left_pos, nl) + nr as f64 * gini(total_pos - left_pos, nr);
        if best.is_none_or(|(_, bi)| impurity < bi) {
            let mut mid = a + (b - a) / 2.0;
            if mid >= b {
                mid = a;
            }
            best = Some((mid, impurity));
        }
    }
    best
}

/// Grows one tree on the given sample positions (duplicates allowed).
fn grow(
    x: &Matrix,
    y: &[u8],
    mut samples: Vec<usize>,
    config: &TreeConfig,
    rng: &mut seed::Rng,
) -> TreeParams {
    let d = x.cols();
    let n_root = samples.len() as f64;
    let per_split = config.features_per_split.count(d);
    let mut nodes: Vec<Node> = vec![Node::Leaf { leaf_score: 0.0 }];
    let mut importance = vec![0.0; d];
    let mut scratch = Vec::with_capacity(samples.len());
    let mut feature_order: Vec<usize> = (0..d).collect();

    // (node index, range into `samples`, depth)
    let mut stack = vec![(0usize, 0usize, samples.len(), 0usize)];
    while let Some((node, start, end, depth)) = stack.pop() {
        let idx = &samples[start..end];
        let m = idx.len();
        let pos: usize = idx.iter().map(|&i| y[i] as usize).sum();
        let leaf_score = pos as f64 / m as f64;
        let is_leaf = pos == 0
            || pos == m
            || m < config.min_samples_split
            || config.max_depth.is_some_and(|md| depth >= md);
        if is_leaf {
            nodes[node] = Node::Leaf { leaf_score };
            continue;
        }

        // Visit features in random order until `per_split` non-constant ones
        // have been evaluated; with every feature requested the order is fixed.
        let mut best: Option<BestSplit> = None;
        let mut evaluated = 0;
        for f in 0..d {
            if evaluated == per_split {
                break;
            }
            if per_split < d {
                let j = rng.random_range(f..d);
                feature_order.swap(f, j);
            }
            let feature = feature_order[f];
            if let Some((threshold, child_impurity)) =
                best_threshold(x, y, idx, feature, pos, &mut scratch)
            {
                evaluated += 1;
                if best
                    .as_ref()
                    .is_none_or(|b| child_impurity < b.child_impurity)
                {
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        child_impurity,
                    });
                }
            }
        }
        if per_split < d {
            feature_order.sort_unstable();
        }

        let Some(split) = best else {
            nodes[node] = Node::Leaf { leaf_score };
            continue;
        };
        importance[split.feature] += (m as f64 * gini(pos, m) - split.child_impurity) / n_root;

        let (left, right): (Vec<usize>, Vec<usize>) = samples[start..end]
            .iter()
            .partition(|&&i| x.get(i, split.feature) <= split.threshold);
        let mid = start + left.len();
        samples[start..mid].copy_from_slice(&left);
        samples[mid..end].copy_from_slice(&right);

        let left_node = nodes.len();
        nodes.push(Node::Leaf { leaf_score: 0.0 });
        let right_node = nodes.len();
        nodes.push(Node::Leaf { leaf_score: 0.0 });
        nodes[node] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: left_node,
            right: right_node,
        };
        stack.push((right_node, mid, end, depth + 1));
        stack.push((left_node, start, mid, depth + 1));
    }

    let total: f64 = importance.iter().sum();
    if total > 0.0 {
        importance.iter_mut().for_each(|v| *v /= total);
    }
    TreeParams {
        n_features: d,
        nodes,
        importance,
    }
}

/// Single tree on every training row.
pub fn tree_fit(train: &Dataset, config: &TreeConfig, seed: u64) -> Result<TreeParams> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = seed::rng(seed);
    Ok(grow(
        train.rows(),
        train.labels(),
        (0..train.n_rows()).collect(),
        config,
        &mut rng,
    ))
}

/// Trees are grown in parallel; tree `i` draws from its own generator seeded
/// by `(seed, i)`, so the result does not depend on scheduling.
pub fn forest_fit(train: &Dataset, config: &ForestConfig) -> Result<ForestParams> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = train.n_rows();
    let tree_config = config.tree_config();
    let trees: Vec<TreeParams> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed::derive_index(config.seed, t as u64));
            let samples = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow(
                train.rows(),
                train.labels(),
                samples,
                &tree_config,
                &mut rng,
            )
        })
        .collect();
    let d = train.n_features();
    let mut importance = vec![0.0; d];
    for t in &trees {
        for (acc, v) in importance.iter_mut().zip(&t.importance) {
            *acc += v;
        }
    }
    importance
        .iter_mut()
        .for_each(|v| *v /= config.n_trees as f64);
    Ok(ForestParams { trees, importance })
}

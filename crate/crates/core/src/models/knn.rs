//! Brute-force k-nearest-neighbours voting.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k: usize,
    #[serde(default)]
    pub metric: Metric,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            k: 5,
            metric: Metric::Euclidean,
        }
    }
}

impl KnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        Ok(())
    }
}

/// The full training set, stored inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub train: Matrix,
    pub labels: Vec<u8>,
}

pub fn knn_fit(train: &Dataset, config: &KnnConfig) -> Result<KnnParams> {
    config.validate()?;
    if config.k > train.n_rows() {
        return Err(Error::KTooLarge {
            k: config.k,
            rows: train.n_rows(),
        });
    }
    Ok(KnnParams {
        train: train.rows().clone(),
        labels: train.labels().to_vec(),
    })
}

/// (squared distance, training index), ordered so the heap top is the worst kept neighbour.
#[derive(PartialEq)]
struct Candidate(f64, usize);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the k nearest training rows; equal distances prefer the lower index.
pub fn nearest(params: &KnnParams, query: &[f64], k: usize) -> Vec<usize> {
    let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
    for (i, row) in params.train.row_iter().enumerate() {
        let c = Candidate(squared_distance(row, query), i);
        if heap.len() < k {
            heap.push(c);
        } else if let Some(top) = heap.peek() {
            if c < *top {
                heap.pop();
                heap.push(c);
            }
        }
    }
    let mut out: Vec<Candidate> = heap.into_vec();
    out.sort();
    out.into_iter().map(|c| c.1).collect()
}

/// Fraction of the k nearest neighbours labelled malware.
pub fn knn_predict(params: &KnnParams, config: &KnnConfig, rows: &Matrix) -> Result<Vec<f64>> {
    if config.k == 0 || config.k > params.train.rows() {
        return Err(Error::KTooLarge {
            k: config.k,
            rows: params.train.rows(),
        });
    }
    if rows.cols() != params.train.cols() {
        return Err(Error::ShapeMismatch {
            expected: params.train.cols(),
            got: rows.cols(),
        });
    }
    let k = config.k;
    Ok((0..rows.rows())
        .into_par_iter()
        .map(|r| {
            let votes: usize = nearest(params, rows.row(r), k)
                .into_iter()
                .map(|i| params.labels[i] as usize)
                .sum();
            votes as f64 / k as f64
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_points() -> KnnParams {
        KnnParams {
            train: Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [5.0, 5.0], [5.0, 6.0]]).unwrap(),
            labels: vec![0, 0, 1, 1],
        }
    }

    #[test]
    fn hand_computed_neighbours() {
        // squared distances from (4,5): 41, 32, 1, 2
        let p = four_points();
        assert_eq!(nearest(&p, &[4.0, 5.0], 3), vec![2, 3, 1]);
        let cfg = KnnConfig {
            k: 3,
            ..Default::default()
        };
        let s = knn_predict(&p, &cfg, &Matrix::from_rows(&[[4.0, 5.0]]).unwrap()).unwrap();
        assert!((s[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn k1_on_training_point_returns_its_label() {
        let p = four_points();
        let cfg = KnnConfig {
            k: 1,
            ..Default::default()
        };
        let s = knn_predict(&p, &cfg, &p.train).unwrap();
        assert_eq!(s, vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn k_equal_to_n_gives_prevalence() {
        let p = four_points();
        let cfg = KnnConfig {
            k: 4,
            ..Default::default()
        };
        let q = Matrix::from_rows(&[[100.0, -3.0], [0.0, 0.0]]).unwrap();
        assert_eq!(knn_predict(&p, &cfg, &q).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn ties_prefer_lower_index() {
        let p = KnnParams {
            train: Matrix::from_rows(&[[1.0], [-1.0], [1.0]]).unwrap(),
            labels: vec![1, 0, 0],
        };
        assert_eq!(nearest(&p, &[0.0], 2), vec![0, 1]);
    }

    #[test]
    fn k_too_large() {
        let p = four_points();
        let cfg = KnnConfig {
            k: 5,
            ..Default::default()
        };
        assert!(matches!(
            knn_predict(&p, &cfg, &p.train),
            Err(Error::KTooLarge { k: 5, rows: 4 })
        ));
    }
}

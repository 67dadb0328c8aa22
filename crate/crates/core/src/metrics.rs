//! Binary classification metrics. Malware (label 1) is the positive class
//! everywhere.
//!
//! Ratios whose denominator vanishes are reported as 0 together with a
//! degenerate flag rather than NaN.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// The same outcomes with the roles of the two classes exchanged.
    pub fn swap_classes(&self) -> Self {
        Self {
            tp: self.tn,
            tn: self.tp,
            fp: self.fn_,
            fn_: self.fp,
        }
    }
}

fn check_binary(values: &[u8]) -> Result<()> {
    match values.iter().find(|&&v| v > 1) {
        Some(&v) => Err(Error::NonBinaryValue(v)),
        None => Ok(()),
    }
}

pub fn confusion(labels: &[u8], predictions: &[u8]) -> Result<ConfusionMatrix> {
    if labels.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_binary(labels)?;
    check_binary(predictions)?;
    let mut cm = ConfusionMatrix::default();
    for (&y, &p) in labels.iter().zip(predictions) {
        match (y, p) {
            (1, 1) => cm.tp += 1,
            (0, 1) => cm.fp += 1,
            (1, 0) => cm.fn_ += 1,
            _ => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// A metric value plus whether a zero-denominator convention produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    pub degenerate: bool,
}

impl MetricValue {
    fn ratio(num: f64, den: f64) -> Self {
        if den == 0.0 {
            Self {
                value: 0.0,
                degenerate: true,
            }
        } else {
            Self {
                value: num / den,
                degenerate: false,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Names of the metrics that fell back to the zero convention.
    pub degenerate: Vec<String>,
}

pub fn scalar_metrics(cm: &ConfusionMatrix) -> ScalarMetrics {
    let tp = cm.tp as f64;
    let accuracy = MetricValue::ratio((cm.tp + cm.tn) as f64, cm.total() as f64);
    let precision = MetricValue::ratio(tp, (cm.tp + cm.fp) as f64);
    let recall = MetricValue::ratio(tp, (cm.tp + cm.fn_) as f64);
    let f1 = MetricValue::ratio(
        2.0 * precision.value * recall.value,
        precision.value + recall.value,
    );
    let degenerate = [
        ("accuracy", accuracy),
        ("precision", precision),
        ("recall", recall),
        ("f1", f1),
    ]
    .into_iter()
    .filter(|(_, m)| m.degenerate)
    .map(|(n, _)| n.to_string())
    .collect();
    ScalarMetrics {
        accuracy: accuracy.value,
        precision: precision.value,
        recall: recall.value,
        f1: f1.value,
        degenerate,
    }
}

/// Matthews correlation coefficient. Products are formed in 128-bit integers.
pub fn mcc(cm: &ConfusionMatrix) -> MetricValue {
    let (tp, fp, fn_, tn) = (cm.tp as i128, cm.fp as i128, cm.fn_ as i128, cm.tn as i128);
    let num = tp * tn - fp * fn_;
    let left = ((tp + fp) * (tp + fn_)) as f64;
    let right = ((tn + fp) * (tn + fn_)) as f64;
    if left == 0.0 || right == 0.0 {
        return MetricValue {
            value: 0.0,
            degenerate: true,
        };
    }
    let value = (num as f64 / (left.sqrt() * right.sqrt())).clamp(-1.0, 1.0);
    MetricValue {
        value,
        degenerate: false,
    }
}

/// Cohen's kappa between predictions and labels.
pub fn kappa(cm: &ConfusionMatrix) -> MetricValue {
    let n = cm.total() as f64;
    if n == 0.0 {
        return MetricValue {
            value: 0.0,
            degenerate: true,
        };
    }
    let po = (cm.tp + cm.tn) as f64 / n;
    let chance = (cm.tp + cm.fp) as u128 * (cm.tp + cm.fn_) as u128
        + (cm.fn_ + cm.tn) as u128 * (cm.fp + cm.tn) as u128;
    let pe = chance as f64 / (n * n);
    if pe == 1.0 {
        return MetricValue {
            value: 0.0,
            degenerate: true,
        };
    }
    MetricValue {
        value: (po - pe) / (1.0 - pe),
        degenerate: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    #[serde(with = "crate::serde_float")]
    pub threshold: f64,
}

/// ROC curve from (0,0) to (1,1) with its trapezoidal area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    /// Writes the `fpr,tpr,threshold` series.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["fpr", "tpr", "threshold"])?;
        for p in &self.points {
            w.write_record([
                p.fpr.to_string(),
                p.tpr.to_string(),
                p.threshold.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sweeps thresholds over the distinct scores in descending order; tied
/// scores form a single point. The first point carries threshold `+inf`.
///
/// The area is accumulated in integer units of one positive-negative pair,
/// so it equals the tie-corrected concordance probability.
pub fn roc_auc(labels: &[u8], scores: &[f64]) -> Result<RocCurve> {
    if labels.len() != scores.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: scores.len(),
        });
    }
    check_binary(labels)?;
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFiniteScore { index });
    }
    let positives = labels.iter().filter(|&&l| l == 1).count() as u64;
    let negatives = labels.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = Vec::new();
    points.push(RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    });
    let (mut tp, mut fp) = (0u64, 0u64);
    // twice the area, in pair units
    let mut area2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        let (tp_prev, fp_prev) = (tp, fp);
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += (fp - fp_prev) as u128 * (tp + tp_prev) as u128;
        points.push(RocPoint {
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
            threshold,
        });
    }
    let auc = area2 as f64 / (2.0 * positives as f64 * negatives as f64);
    Ok(RocCurve { points, auc })
}

/// Everything measured for one model on one evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_id: String,
    pub cm: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub mcc: f64,
    pub kappa: f64,
    pub train_time_seconds: f64,
    #[serde(default)]
    pub degenerate: Vec<String>,
}

/// Builds the report from hard predictions (for the confusion-matrix metrics)
/// and continuous scores (for the ROC curve).
pub fn evaluate(
    model_id: &str,
    labels: &[u8],
    predictions: &[u8],
    scores: &[f64],
    train_time_seconds: f64,
) -> Result<(EvalReport, RocCurve)> {
    let cm = confusion(labels, predictions)?;
    let roc = roc_auc(labels, scores)?;
    let scalars = scalar_metrics(&cm);
    let m = mcc(&cm);
    let k = kappa(&cm);
    let mut degenerate = scalars.degenerate;
    if m.degenerate {
        degenerate.push("mcc".into());
    }
    if k.degenerate {
        degenerate.push("kappa".into());
    }
    let report = EvalReport {
        model_id: model_id.to_string(),
        cm,
        accuracy: scalars.accuracy,
        precision: scalars.precision,
        recall: scalars.recall,
        f1: scalars.f1,
        auc: roc.auc,
        mcc: m.value,
        kappa: k.value,
        train_time_seconds,
        degenerate,
    };
    Ok((report, roc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairwise_auc(labels: &[u8], scores: &[f64]) -> f64 {
        let mut credit = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li == 1 && lj == 0 {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        credit += 1.0;
                    } else if scores[i] == scores[j] {
                        credit += 0.5;
                    }
                }
            }
        }
        credit / pairs
    }

    #[test]
    fn confusion_examples() {
        assert_eq!(
            confusion(&[1, 0, 1], &[1, 0, 1]).unwrap(),
            ConfusionMatrix::new(2, 0, 0, 1)
        );
        assert_eq!(
            confusion(&[1, 1, 0, 0], &[1, 0, 1, 0]).unwrap(),
            ConfusionMatrix::new(1, 1, 1, 1)
        );
        assert_eq!(
            confusion(&[0, 0], &[1, 1]).unwrap(),
            ConfusionMatrix::new(0, 2, 0, 0)
        );
    }

    #[test]
    fn confusion_errors() {
        assert!(matches!(
            confusion(&[1, 0], &[1]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            confusion(&[2], &[1]),
            Err(Error::NonBinaryValue(2))
        ));
        assert!(matches!(
            confusion(&[0], &[3]),
            Err(Error::NonBinaryValue(3))
        ));
    }

    #[test]
    fn scalar_metric_examples() {
        let m = scalar_metrics(&ConfusionMatrix::new(2, 1, 1, 2));
        assert!((m.accuracy - 4.0 / 6.0).abs() < 1e-15);
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!(m.degenerate.is_empty());

        let perfect = scalar_metrics(&ConfusionMatrix::new(5, 0, 0, 3));
        assert_eq!(
            (
                perfect.accuracy,
                perfect.precision,
                perfect.recall,
                perfect.f1
            ),
            (1.0, 1.0, 1.0, 1.0)
        );

        let none_predicted = scalar_metrics(&ConfusionMatrix::new(0, 0, 3, 4));
        assert_eq!(none_predicted.precision, 0.0);
        assert!(none_predicted.degenerate.contains(&"precision".to_string()));
    }

    #[test]
    fn mcc_examples() {
        assert_eq!(mcc(&ConfusionMatrix::new(4, 0, 0, 6)).value, 1.0);
        assert!((mcc(&ConfusionMatrix::new(2, 1, 1, 2)).value - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(mcc(&ConfusionMatrix::new(0, 6, 4, 0)).value, -1.0);
        let deg = mcc(&ConfusionMatrix::new(3, 3, 0, 0));
        assert_eq!(deg.value, 0.0);
        assert!(deg.degenerate);
    }

    #[test]
    fn mcc_survives_huge_counts() {
        let big = 4_000_000_000u64;
        let m = mcc(&ConfusionMatrix::new(big, 1, 1, big));
        assert!(m.value > 0.999_999 && m.value <= 1.0);
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa(&ConfusionMatrix::new(4, 0, 0, 6)).value, 1.0);
        assert!((kappa(&ConfusionMatrix::new(2, 1, 1, 2)).value - 1.0 / 3.0).abs() < 1e-15);
        let constant = kappa(&ConfusionMatrix::new(3, 3, 0, 0));
        assert_eq!(constant.value, 0.0);
        assert!(!constant.degenerate);
        let all_one_class = kappa(&ConfusionMatrix::new(5, 0, 0, 0));
        assert!(all_one_class.degenerate);
    }

    #[test]
    fn auc_fixed_example() {
        let roc = roc_auc(&[0, 0, 1, 1], &[0.1, 0.4, 0.35, 0.8]).unwrap();
        assert_eq!(roc.auc, 0.75);
        let first = roc.points.first().unwrap();
        let last = roc.points.last().unwrap();
        assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
    }

    #[test]
    fn auc_symmetry_cases() {
        assert_eq!(
            roc_auc(&[0, 0, 1, 1], &[0.0, 0.1, 0.9, 1.0]).unwrap().auc,
            1.0
        );
        let tied = roc_auc(&[0, 1, 0, 1], &[0.3; 4]).unwrap();
        assert_eq!(tied.auc, 0.5);
        assert_eq!(tied.points.len(), 2);
        let labels = [1, 0, 1, 1, 0, 0, 1];
        let scores = [0.3, 0.2, 0.9, 0.1, 0.5, 0.5, 0.7];
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let a = roc_auc(&labels, &scores).unwrap().auc;
        let b = roc_auc(&labels, &neg).unwrap().auc;
        assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auc_errors() {
        assert!(matches!(
            roc_auc(&[1, 1], &[0.1, 0.2]),
            Err(Error::SingleClass)
        ));
        assert!(matches!(
            roc_auc(&[1, 0], &[0.1, f64::NAN]),
            Err(Error::NonFiniteScore { index: 1 })
        ));
        assert!(roc_auc(&[1, 0], &[0.1]).is_err());
    }

    #[test]
    fn evaluate_collects_flags() {
        let (rep, _) = evaluate(
            "m",
            &[1, 0, 1, 0],
            &[0, 0, 0, 0],
            &[0.4, 0.1, 0.3, 0.2],
            0.5,
        )
        .unwrap();
        assert!(rep.degenerate.contains(&"precision".to_string()));
        assert!(rep.degenerate.contains(&"mcc".to_string()));
        assert_eq!(rep.auc, 1.0);
        assert_eq!(rep.train_time_seconds, 0.5);
    }

    proptest! {
        #[test]
        fn trapezoid_equals_concordance(
            data in proptest::collection::vec((0u8..2, 0u8..6), 2..60)
        ) {
            let labels: Vec<u8> = data.iter().map(|d| d.0).collect();
            // coarse scores force many ties
            let scores: Vec<f64> = data.iter().map(|d| d.1 as f64 / 5.0).collect();
            prop_assume!(labels.contains(&0) && labels.contains(&1));
            let roc = roc_auc(&labels, &scores).unwrap();
            prop_assert!((roc.auc - pairwise_auc(&labels, &scores)).abs() < 1e-12);
            for w in roc.points.windows(2) {
                prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
            }
        }

        #[test]
        fn kappa_never_exceeds_accuracy(tp in 0u64..500, fp in 0u64..500, fn_ in 0u64..500, tn in 0u64..500) {
            let cm = ConfusionMatrix::new(tp, fp, fn_, tn);
            prop_assume!(cm.total() > 0);
            let k = kappa(&cm).value;
            prop_assert!(k <= scalar_metrics(&cm).accuracy + 1e-12);
            prop_assert!((-1.0..=1.0).contains(&k));
            let m = mcc(&cm).value;
            prop_assert!((-1.0..=1.0).contains(&m));
            prop_assert!((m - mcc(&cm.swap_classes()).value).abs() < 1e-12);
            prop_assert!((k - kappa(&cm.swap_classes()).value).abs() < 1e-12);
        }
    }
}

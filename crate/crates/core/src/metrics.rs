//! Confusion matrix, per-class precision/recall/F1 and one-vs-rest ROC.
//!
//! A zero denominator yields 0 for the affected metric and sets the class's
//! `zero_division` flag. Macro F1 is the unweighted mean over the classes
//! that occur among the true or the predicted labels.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::models::Probabilities;

/// `matrix[true][predicted]`
pub type ConfusionMatrix = [[usize; NUM_CLASSES]; NUM_CLASSES];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: u8,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    pub zero_division: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    /// All four classes, in order.
    pub per_class: Vec<ClassMetrics>,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub n_samples: usize,
    pub confusion: ConfusionMatrix,
}

impl ClassReport {
    pub fn class(&self, c: u8) -> &ClassMetrics {
        &self.per_class[usize::from(c)]
    }
}

fn check_lengths(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    if left == 0 {
        return Err(Error::NoRows);
    }
    Ok(())
}

fn check_label(label: u8) -> Result<()> {
    if usize::from(label) >= NUM_CLASSES {
        return Err(Error::InvalidLabel { label: label.into() });
    }
    Ok(())
}

pub fn confusion_matrix(truth: &[u8], predicted: &[u8]) -> Result<ConfusionMatrix> {
    check_lengths(truth.len(), predicted.len())?;
    let mut m = [[0; NUM_CLASSES]; NUM_CLASSES];
    for (&t, &p) in truth.iter().zip(predicted) {
        check_label(t)?;
        check_label(p)?;
        m[usize::from(t)][usize::from(p)] += 1;
    }
    Ok(m)
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn classification_report(truth: &[u8], predicted: &[u8]) -> Result<ClassReport> {
    let confusion = confusion_matrix(truth, predicted)?;
    let mut per_class = Vec::with_capacity(NUM_CLASSES);
    let mut f1_sum = 0.0;
    let mut present = 0usize;
    for c in 0..NUM_CLASSES {
        let tp = confusion[c][c];
        let support: usize = confusion[c].iter().sum();
        let predicted_c: usize = confusion.iter().map(|row| row[c]).sum();
        let precision = ratio(tp, predicted_c);
        let recall = ratio(tp, support);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            _ => None,
        };
        if support + predicted_c > 0 {
            f1_sum += f1.unwrap_or(0.0);
            present += 1;
        }
        per_class.push(ClassMetrics {
            class: c as u8,
            precision: precision.unwrap_or(0.0),
            recall: recall.unwrap_or(0.0),
            f1: f1.unwrap_or(0.0),
            support,
            zero_division: f1.is_none(),
        });
    }
    let correct: usize = (0..NUM_CLASSES).map(|c| confusion[c][c]).sum();
    Ok(ClassReport {
        per_class,
        macro_f1: f1_sum / present as f64,
        accuracy: correct as f64 / truth.len() as f64,
        n_samples: truth.len(),
        confusion,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedClassMetrics {
    pub class: u8,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: f64,
}

/// Componentwise arithmetic mean of several reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedReport {
    pub per_class: Vec<AveragedClassMetrics>,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub n_reports: usize,
}

pub fn average_reports(reports: &[ClassReport]) -> Result<AveragedReport> {
    if reports.is_empty() {
        return Err(Error::InvalidParameter("nothing to average".into()));
    }
    let n = reports.len() as f64;
    let mean = |f: &dyn Fn(&ClassReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let per_class = (0..NUM_CLASSES)
        .map(|c| AveragedClassMetrics {
            class: c as u8,
            precision: mean(&|r| r.per_class[c].precision),
            recall: mean(&|r| r.per_class[c].recall),
            f1: mean(&|r| r.per_class[c].f1),
            support: mean(&|r| r.per_class[c].support as f64),
        })
        .collect();
    Ok(AveragedReport {
        per_class,
        macro_f1: mean(&|r| r.macro_f1),
        accuracy: mean(&|r| r.accuracy),
        n_reports: reports.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub class: u8,
    /// From (0, 0) to (1, 1); `points[i + 1]` is reached at `thresholds[i]`.
    pub points: Vec<RocPoint>,
    pub auc: f64,
    /// Distinct scores, descending.
    pub thresholds: Vec<f64>,
}

/// One-vs-rest ROC curve for `class`, scored by its probability column.
/// Equal scores collapse into one point; the AUC is the trapezoid area.
pub fn roc_curve_ovr(truth: &[u8], scores: &[Probabilities], class: u8) -> Result<RocCurve> {
    check_lengths(truth.len(), scores.len())?;
    check_label(class)?;
    for p in scores {
        if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter("ROC scores must be probabilities in [0, 1]".into()));
        }
    }
    let positives = truth.iter().filter(|&&t| t == class).count();
    if positives == 0 {
        return Err(Error::ClassAbsent(class));
    }
    let negatives = truth.len() - positives;
    if negatives == 0 {
        return Err(Error::NoNegatives(class));
    }

    let c = usize::from(class);
    let mut order: Vec<usize> = (0..truth.len()).collect();
    order.sort_by(|&a, &b| scores[b][c].total_cmp(&scores[a][c]));
    let (p, n) = (positives as f64, negatives as f64);
    let mut points = alloc::vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let mut thresholds = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]][c];
        while i < order.len() && scores[order[i]][c] == s {
            if truth[order[i]] == class {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let prev = points[points.len() - 1];
        let next = RocPoint { fpr: fp as f64 / n, tpr: tp as f64 / p };
        auc += (next.fpr - prev.fpr) * (next.tpr + prev.tpr) / 2.0;
        points.push(next);
        thresholds.push(s);
    }
    Ok(RocCurve { class, points, auc, thresholds })
}

/// Curves for every class that has both positives and negatives in `truth`.
pub fn roc_curves(truth: &[u8], scores: &[Probabilities]) -> Result<Vec<RocCurve>> {
    let mut out = Vec::new();
    for c in 0..NUM_CLASSES as u8 {
        match roc_curve_ovr(truth, scores, c) {
            Ok(curve) => out.push(curve),
            Err(Error::ClassAbsent(_) | Error::NoNegatives(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

pub fn auc_summary(curves: &[RocCurve]) -> BTreeMap<u8, f64> {
    curves.iter().map(|c| (c.class, c.auc)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::Rng;

    fn onehot_scores(s: &[f64], class: usize) -> Vec<Probabilities> {
        s.iter()
            .map(|&v| {
                let mut p = [(1.0 - v) / 3.0; 4];
                p[class] = v;
                p
            })
            .collect()
    }

    #[test]
    fn hand_counted_report() {
        let r = classification_report(&[0, 0, 1, 1], &[0, 1, 1, 1]).unwrap();
        let c1 = r.class(1);
        assert!((c1.precision - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(c1.recall, 1.0);
        assert!((c1.f1 - 0.8).abs() < 1e-12);
        assert_eq!(r.class(0).recall, 0.5);
        assert_eq!(r.accuracy, 0.75);
        assert!(r.class(2).zero_division && r.class(2).f1 == 0.0);
        // Macro over classes 0 and 1 only.
        assert!((r.macro_f1 - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_majority_predictors() {
        let truth = [0, 1, 2, 3, 2, 2];
        let r = classification_report(&truth, &truth).unwrap();
        assert!(r.per_class.iter().all(|m| m.f1 == 1.0 && m.precision == 1.0 && m.recall == 1.0));
        let r = classification_report(&truth, &[2; 6]).unwrap();
        assert_eq!(r.class(0).f1, 0.0);
        assert_eq!(r.per_class.iter().map(|m| m.support).sum::<usize>(), 6);
    }

    #[test]
    fn report_errors() {
        assert_eq!(classification_report(&[0, 1], &[0]), Err(Error::LengthMismatch { left: 2, right: 1 }));
        assert_eq!(classification_report(&[], &[]), Err(Error::NoRows));
    }

    #[test]
    fn separating_scores() {
        let truth = [1, 1, 0, 0];
        let curve = roc_curve_ovr(&truth, &onehot_scores(&[0.9, 0.8, 0.2, 0.1], 1), 1).unwrap();
        assert_eq!(curve.auc, 1.0);
        assert!(curve.points.iter().any(|p| p.fpr == 0.0 && p.tpr == 1.0));
        assert_eq!(curve.points.last(), Some(&RocPoint { fpr: 1.0, tpr: 1.0 }));
        assert_eq!(curve.thresholds, vec![0.9, 0.8, 0.2, 0.1]);
    }

    #[test]
    fn ties_collapse() {
        let curve = roc_curve_ovr(&[1, 0, 1, 0], &onehot_scores(&[0.5; 4], 1), 1).unwrap();
        assert_eq!(curve.points.len(), 2);
        assert_eq!(curve.auc, 0.5);
    }

    #[test]
    fn roc_errors() {
        let s = onehot_scores(&[0.5, 0.5], 0);
        assert_eq!(roc_curve_ovr(&[1, 1], &s, 0), Err(Error::ClassAbsent(0)));
        assert_eq!(roc_curve_ovr(&[0, 0], &s, 0), Err(Error::NoNegatives(0)));
        assert!(roc_curve_ovr(&[0, 1], &onehot_scores(&[1.5, 0.0], 0), 0).is_err());
    }

    #[test]
    fn random_scores_give_half() {
        let mut rng = crate::rng::seeded(17);
        let truth: Vec<u8> = (0..2000).map(|i| (i % 2) as u8).collect();
        let s: Vec<f64> = (0..2000).map(|_| rng.gen()).collect();
        let auc = roc_curve_ovr(&truth, &onehot_scores(&s, 1), 1).unwrap().auc;
        assert!((auc - 0.5).abs() <= 0.05, "{auc}");
    }

    #[test]
    fn averaging_is_componentwise() {
        let a = classification_report(&[0, 1, 2, 3], &[0, 1, 2, 3]).unwrap();
        let b = classification_report(&[0, 1, 2, 3], &[1, 1, 2, 3]).unwrap();
        let m = average_reports(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(m.macro_f1, (a.macro_f1 + b.macro_f1) / 2.0);
        assert_eq!(m.per_class[0].f1, 0.5);
        assert_eq!(m.per_class[3].support, 1.0);
    }

    #[test]
    fn summary_keys_by_class() {
        let curve = roc_curve_ovr(&[2, 0], &onehot_scores(&[1.0, 0.0], 2), 2).unwrap();
        assert_eq!(auc_summary(&[curve]), BTreeMap::from([(2u8, 1.0)]));
    }
}

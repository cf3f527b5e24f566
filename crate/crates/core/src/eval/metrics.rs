use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts with rows = true class, columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

/// Accuracy, specificity TN/(TN+FP) and sensitivity TP/(TP+FN).
///
/// For two classes, class 1 is the positive class. For more classes the
/// rates are macro averages of the one-vs-rest rates over the classes where
/// they are defined. A rate with an empty denominator is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisMetrics {
    pub accuracy: f64,
    pub specificity: Option<f64>,
    pub sensitivity: Option<f64>,
}

pub fn confusion(preds: &[usize], labels: &[usize], num_classes: usize) -> Result<ConfusionMatrix> {
    if preds.len() != labels.len() {
        return Err(Error::Argument(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    let mut counts = vec![vec![0; num_classes]; num_classes];
    for (&p, &t) in preds.iter().zip(labels) {
        if p >= num_classes || t >= num_classes {
            return Err(Error::Argument(format!(
                "class id {} out of range for {num_classes} classes",
                p.max(t)
            )));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

impl ConfusionMatrix {
    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }

    /// (TP, FN, TN, FP) treating `class` as positive.
    pub fn one_vs_rest(&self, class: usize) -> (usize, usize, usize, usize) {
        let total = self.total();
        let tp = self.counts[class][class];
        let actual: usize = self.counts[class].iter().sum();
        let predicted: usize = self.counts.iter().map(|r| r[class]).sum();
        let fn_ = actual - tp;
        let fp = predicted - tp;
        let tn = total - tp - fn_ - fp;
        (tp, fn_, tn, fp)
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn to_csv(&self, class_names: &[String]) -> String {
        let mut s = String::from("true\\predicted");
        for name in class_names {
            s.push(',');
            s.push_str(name);
        }
        s.push('\n');
        for (name, row) in class_names.iter().zip(&self.counts) {
            s.push_str(name);
            for c in row {
                s.push_str(&format!(",{c}"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn diagnosis_metrics(m: &ConfusionMatrix) -> Result<DiagnosisMetrics> {
    let total = m.total();
    if total == 0 {
        return Err(Error::Validation("confusion matrix is empty".into()));
    }
    let accuracy = m.trace() as f64 / total as f64;
    let c = m.num_classes();
    if c == 2 {
        let (tp, fn_, tn, fp) = m.one_vs_rest(1);
        return Ok(DiagnosisMetrics {
            accuracy,
            specificity: ratio(tn, tn + fp),
            sensitivity: ratio(tp, tp + fn_),
        });
    }
    let per_class: Vec<_> = (0..c).map(|k| m.one_vs_rest(k)).collect();
    Ok(DiagnosisMetrics {
        accuracy,
        specificity: mean_defined(per_class.iter().map(|&(_, _, tn, fp)| ratio(tn, tn + fp))),
        sensitivity: mean_defined(per_class.iter().map(|&(tp, fn_, _, _)| ratio(tp, tp + fn_))),
    })
}

//! Confusion matrix, WAR (overall accuracy), UAR (mean per-class recall),
//! and macro F1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// K x K counts; rows are the true class, columns the predicted class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            counts: vec![0; k * k],
        }
    }

    pub fn from_pairs(truth: &[usize], pred: &[usize], k: usize) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::ShapeMismatch {
                op: "ConfusionMatrix::from_pairs",
                left: vec![truth.len()],
                right: vec![pred.len()],
            });
        }
        let mut cm = Self::new(k);
        for (&t, &p) in truth.iter().zip(pred) {
            cm.add(t, p)?;
        }
        Ok(cm)
    }

    pub fn add(&mut self, truth: usize, pred: usize) -> Result<()> {
        if truth >= self.k || pred >= self.k {
            return Err(Error::Validation {
                field: "class".into(),
                reason: format!("({truth}, {pred}) out of range for {} classes", self.k),
            });
        }
        self.counts[truth * self.k + pred] += 1;
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn count(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.k + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn row_sum(&self, c: usize) -> u64 {
        (0..self.k).map(|j| self.count(c, j)).sum()
    }

    fn col_sum(&self, c: usize) -> u64 {
        (0..self.k).map(|i| self.count(i, c)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    /// Weighted average recall == overall accuracy (trace / total).
    pub war: f64,
    /// Unweighted average recall over classes present in the truth.
    pub uar: f64,
    /// Macro F1 over all K classes; classes with undefined precision or
    /// recall contribute zero.
    pub f1: f64,
}

pub fn classification_metrics(cm: &ConfusionMatrix) -> Result<ClassificationMetrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidParameter {
            name: "cm",
            reason: "empty confusion matrix".into(),
        });
    }
    let trace: u64 = (0..cm.k()).map(|c| cm.count(c, c)).sum();
    let war = trace as f64 / total as f64;

    let mut recall_sum = 0.0;
    let mut present = 0usize;
    let mut f1_sum = 0.0;
    for c in 0..cm.k() {
        let support = cm.row_sum(c);
        let predicted = cm.col_sum(c);
        let tp = cm.count(c, c) as f64;
        if support > 0 {
            recall_sum += tp / support as f64;
            present += 1;
        }
        if support > 0 && predicted > 0 {
            let recall = tp / support as f64;
            let precision = tp / predicted as f64;
            if precision + recall > 0.0 {
                f1_sum += 2.0 * precision * recall / (precision + recall);
            }
        }
    }
    if present == 0 {
        return Err(Error::InvalidParameter {
            name: "cm",
            reason: "no class has any true sample".into(),
        });
    }
    Ok(ClassificationMetrics {
        war,
        uar: recall_sum / present as f64,
        f1: f1_sum / cm.k() as f64,
    })
}

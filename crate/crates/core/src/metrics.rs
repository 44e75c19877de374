//! Confusion matrix, accuracy, macro precision and recall, tail averages.
//!
//! Precision and recall are macro averages: per-class ratios summed and
//! divided by the number of classes, with an undefined `0/0` ratio counted
//! as 0.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, invalid, Error, Result};

/// Counts indexed `[true class][predicted class]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn add(&mut self, truth: usize, predicted: usize) -> Result<()> {
        for v in [truth, predicted] {
            if v >= self.classes {
                return Err(Error::LabelOutOfRange {
                    label: v,
                    classes: self.classes,
                });
            }
        }
        self.counts[truth * self.classes + predicted] += 1;
        Ok(())
    }

    /// Adds another matrix's counts.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        check_len("confusion classes", self.classes, other.classes)?;
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }

    pub fn row(&self, truth: usize) -> &[u64] {
        &self.counts[truth * self.classes..(truth + 1) * self.classes]
    }

    fn column_sum(&self, predicted: usize) -> u64 {
        (0..self.classes).map(|t| self.get(t, predicted)).sum()
    }
}

/// Tallies `(label, prediction)` pairs.
pub fn confusion(preds: &[usize], labels: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    check_len("predictions vs labels", labels.len(), preds.len())?;
    let mut cm = ConfusionMatrix::new(classes);
    for (&p, &t) in preds.iter().zip(labels) {
        cm.add(t, p)?;
    }
    Ok(cm)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    match cm.total() {
        0 => Err(Error::Empty("confusion matrix")),
        total => Ok(cm.trace() as f64 / total as f64),
    }
}

pub fn macro_precision(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.total() == 0 {
        return Err(Error::Empty("confusion matrix"));
    }
    let sum: f64 = (0..cm.classes)
        .map(|m| ratio(cm.get(m, m), cm.column_sum(m)))
        .sum();
    Ok(sum / cm.classes as f64)
}

pub fn macro_recall(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.total() == 0 {
        return Err(Error::Empty("confusion matrix"));
    }
    let sum: f64 = (0..cm.classes)
        .map(|m| ratio(cm.get(m, m), cm.row(m).iter().sum()))
        .sum();
    Ok(sum / cm.classes as f64)
}

/// Mean of the last `window` entries.
pub fn tail_average(series: &[f64], window: usize) -> Result<f64> {
    if window == 0 {
        return Err(invalid("window", "must be positive"));
    }
    if window > series.len() {
        return Err(invalid("window", "larger than the series"));
    }
    let tail = &series[series.len() - window..];
    Ok(tail.iter().sum::<f64>() / window as f64)
}

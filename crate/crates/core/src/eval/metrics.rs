use log::warn;
use serde::{Deserialize, Serialize};

use crate::dataset::ClassId;
use crate::error::{Error, Result};

/// Square count table, rows are true classes and columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub n: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            counts: vec![0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "confusion rows must be square");
        Self {
            n,
            counts: rows.concat(),
        }
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.n + pred]
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c * self.n..(c + 1) * self.n].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        (0..self.n).map(|r| self.get(r, c)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn confusion(truth: &[ClassId], pred: &[ClassId], n_classes: usize) -> Result<ConfusionMatrix> {
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: pred.len(),
        });
    }
    let mut cm = ConfusionMatrix::zeros(n_classes);
    for (row, (t, p)) in truth.iter().zip(pred).enumerate() {
        for (what, c) in [("true labels", t), ("predicted labels", p)] {
            if c.0 >= n_classes {
                return Err(Error::LabelOutOfRange {
                    context: what.into(),
                    row,
                    label: c.0 as i64,
                });
            }
        }
        cm.counts[t.0 * n_classes + p.0] += 1;
    }
    Ok(cm)
}

/// `diag / row sum` per class; `None` for classes with no samples.
pub fn per_class_accuracy(cm: &ConfusionMatrix) -> Vec<Option<f64>> {
    (0..cm.n)
        .map(|c| match cm.row_sum(c) {
            0 => None,
            s => Some(cm.get(c, c) as f64 / s as f64),
        })
        .collect()
}

/// Mean per-class accuracy over `classes`, skipping classes without samples.
pub fn acc_over(cm: &ConfusionMatrix, classes: &[ClassId]) -> Result<f64> {
    let pc = per_class_accuracy(cm);
    let vals: Vec<f64> = classes.iter().filter_map(|c| pc[c.0]).collect();
    if vals.is_empty() {
        return Err(Error::EmptyInput("every evaluated class has zero samples"));
    }
    if vals.len() < classes.len() {
        warn!("{} classes have no samples and are left out of ACC", classes.len() - vals.len());
    }
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Mean per-class accuracy over all classes with samples.
pub fn acc(cm: &ConfusionMatrix) -> Result<f64> {
    let all: Vec<ClassId> = (0..cm.n).map(ClassId).collect();
    let present: Vec<ClassId> = all.iter().copied().filter(|c| cm.row_sum(c.0) > 0).collect();
    if present.len() < all.len() && !present.is_empty() {
        warn!("{} classes have no samples and are left out of ACC", all.len() - present.len());
    }
    acc_over(cm, &present)
}

/// `diag / column sum` per class; `None` for classes never predicted.
pub fn per_class_precision(cm: &ConfusionMatrix) -> Vec<Option<f64>> {
    (0..cm.n)
        .map(|c| match cm.col_sum(c) {
            0 => None,
            s => Some(cm.get(c, c) as f64 / s as f64),
        })
        .collect()
}

/// Mean precision over `classes` with a defined precision; `None` if none is.
pub fn group_precision(cm: &ConfusionMatrix, classes: &[ClassId]) -> Option<f64> {
    let pc = per_class_precision(cm);
    let vals: Vec<f64> = classes.iter().filter_map(|c| pc.get(c.0).copied().flatten()).collect();
    if vals.is_empty() {
        None
    } else {
        Some(vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Fraction,
    Percent,
}

impl Scale {
    fn max(self) -> f64 {
        match self {
            Scale::Fraction => 1.0,
            Scale::Percent => 100.0,
        }
    }
}

/// `2US / (U + S)`, zero when both are zero.
pub fn harmonic_mean(u: f64, s: f64, scale: Scale) -> Result<f64> {
    for (name, v) in [("u", u), ("s", s)] {
        if !(v >= 0.0) || v > scale.max() + 1e-9 {
            return Err(Error::param(name, format!("{v} outside [0, {}]", scale.max())));
        }
    }
    if u + s == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * u * s / (u + s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GzslMetrics {
    pub u: f64,
    pub s: f64,
    pub h: f64,
}

impl GzslMetrics {
    pub fn new(u: f64, s: f64) -> Result<Self> {
        Ok(Self {
            u,
            s,
            h: harmonic_mean(u, s, Scale::Fraction)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSnapshot {
    /// Classes the snapshot is computed over.
    pub classes: Vec<ClassId>,
    pub per_class_accuracy: Vec<Option<f64>>,
    pub acc: f64,
    pub per_class_precision: Vec<Option<f64>>,
    /// Mean of the defined per-class precisions.
    pub precision: Option<f64>,
    pub empty_classes: Vec<ClassId>,
    pub never_predicted: Vec<ClassId>,
    pub gzsl: Option<GzslMetrics>,
}

/// Accuracy and precision over `classes` for one labeled prediction vector.
pub fn snapshot(truth: &[ClassId], pred: &[ClassId], classes: &[ClassId], n_classes: usize) -> Result<MetricsSnapshot> {
    let cm = confusion(truth, pred, n_classes)?;
    let acc_all = per_class_accuracy(&cm);
    let prec_all = per_class_precision(&cm);
    let per_class_accuracy: Vec<Option<f64>> = classes.iter().map(|c| acc_all[c.0]).collect();
    let per_class_precision: Vec<Option<f64>> = classes.iter().map(|c| prec_all[c.0]).collect();
    Ok(MetricsSnapshot {
        acc: acc_over(&cm, classes)?,
        precision: group_precision(&cm, classes),
        empty_classes: classes.iter().zip(&per_class_accuracy).filter(|(_, a)| a.is_none()).map(|(c, _)| *c).collect(),
        never_predicted: classes.iter().zip(&per_class_precision).filter(|(_, p)| p.is_none()).map(|(c, _)| *c).collect(),
        classes: classes.to_vec(),
        per_class_accuracy,
        per_class_precision,
        gzsl: None,
    })
}

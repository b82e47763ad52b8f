//! Metrics and oracle-label diagnostics.
//!
//! This module is the only place that can read hidden pool labels. An
//! [`Oracle`] wraps a dataset together with the capability token and is
//! passed explicitly to everything that needs ground truth.

mod diagnostics;
mod metrics;

use serde::{Deserialize, Serialize};

use crate::dataset::{ClassId, OracleToken, ZslDataset};
use crate::error::{Error, Result};
use crate::models::BaseModel;
use crate::selftrain::{RunTrace, Setting};

pub use diagnostics::{
    diag_diversity, diag_precision_contrast, diag_retrain_contrast, diag_uneven_prediction, easy_hard_groups, fit_inductive,
    hard_class_identification_ratio, DiagnosticConfig, DiversityPoint, PrecisionContrast, RetrainMode, RetrainResult,
    UnevenReport,
};
pub use metrics::{
    acc, acc_over, confusion, group_precision, harmonic_mean, per_class_accuracy, per_class_precision, snapshot,
    ConfusionMatrix, GzslMetrics, MetricsSnapshot, Scale,
};

/// Ground-truth access for evaluation and diagnostics.
pub struct Oracle<'a> {
    ds: &'a ZslDataset,
    token: OracleToken,
}

impl<'a> Oracle<'a> {
    pub fn new(ds: &'a ZslDataset) -> Self {
        Self {
            ds,
            token: OracleToken::grant(),
        }
    }

    pub fn dataset(&self) -> &'a ZslDataset {
        self.ds
    }

    pub fn unseen_labels(&self) -> &'a [ClassId] {
        self.ds.hidden_unseen_labels(&self.token)
    }

    pub fn seen_labels(&self) -> Option<&'a [ClassId]> {
        self.ds.hidden_seen_labels(&self.token)
    }

    /// True per-class counts of the unseen pool over global class ids.
    pub fn true_unseen_counts(&self) -> Result<Vec<usize>> {
        crate::dataset::class_counts(self.unseen_labels(), self.ds.n_classes())
    }

    /// True class proportions of the unseen pool, in split order.
    pub fn true_unseen_prior(&self) -> Vec<f64> {
        let labels = self.unseen_labels();
        let n = labels.len().max(1) as f64;
        self.ds
            .split
            .unseen
            .iter()
            .map(|c| labels.iter().filter(|l| *l == c).count() as f64 / n)
            .collect()
    }

    /// ACC of unseen-pool predictions over the unseen classes.
    pub fn unseen_snapshot(&self, pred: &[ClassId]) -> Result<MetricsSnapshot> {
        snapshot(self.unseen_labels(), pred, &self.ds.split.unseen, self.ds.n_classes())
    }

    /// U, S and H for predictions over all classes on both test pools.
    pub fn gzsl(&self, pred_unseen: &[ClassId], pred_seen: &[ClassId]) -> Result<(MetricsSnapshot, GzslMetrics)> {
        let seen_labels = self
            .seen_labels()
            .ok_or_else(|| Error::InvalidDataset("generalized evaluation needs a seen test pool".into()))?;
        let n = self.ds.n_classes();
        let mut u = snapshot(self.unseen_labels(), pred_unseen, &self.ds.split.unseen, n)?;
        let s = snapshot(seen_labels, pred_seen, &self.ds.split.seen, n)?;
        let g = GzslMetrics::new(u.acc, s.acc)?;
        u.gzsl = Some(g);
        Ok((u, g))
    }

    /// Generalized evaluation of a model trained in the conventional
    /// transductive setting: both test pools predicted over every class.
    pub fn gzsl_separate(&self, model: &dyn BaseModel) -> Result<GzslMetrics> {
        let ts = self
            .ds
            .test_seen
            .as_ref()
            .ok_or_else(|| Error::InvalidDataset("generalized evaluation needs a seen test pool".into()))?;
        let all = self.ds.split.all();
        let pu = model.predict(&self.ds.test_unseen.features, &all)?;
        let ps = model.predict(&ts.features, &all)?;
        Ok(self.gzsl(&pu, &ps)?.1)
    }
}

/// Fills `metrics` on every step record of a trace.
pub fn annotate_trace(oracle: &Oracle, trace: &mut RunTrace) -> Result<()> {
    let records = std::iter::once(&mut trace.initial).chain(trace.iterations.iter_mut());
    match trace.setting {
        Setting::Conventional => {
            for r in records {
                r.metrics = Some(oracle.unseen_snapshot(&r.predictions)?);
            }
        }
        Setting::GzslStrict => {
            let order = trace
                .pool_order
                .as_ref()
                .ok_or_else(|| Error::InvalidDataset("strict trace without pool order".into()))?;
            let n_unseen = order.iter().filter(|o| o.unseen_side).count();
            for r in records {
                let mut pu = vec![ClassId(0); n_unseen];
                let mut ps = vec![ClassId(0); order.len() - n_unseen];
                for (o, &p) in order.iter().zip(&r.predictions) {
                    if o.unseen_side {
                        pu[o.row] = p;
                    } else {
                        ps[o.row] = p;
                    }
                }
                r.metrics = Some(oracle.gzsl(&pu, &ps)?.0);
            }
        }
    }
    Ok(())
}

/// Summary numbers of an annotated trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub initial_acc: f64,
    pub final_acc: f64,
    pub final_gzsl: Option<GzslMetrics>,
    pub fallbacks: usize,
}

pub fn summarize(trace: &RunTrace) -> Result<TraceSummary> {
    let m = |r: &crate::selftrain::StepRecord| r.metrics.clone().ok_or(Error::EmptyInput("trace is not annotated"));
    let first = m(&trace.initial)?;
    let last = m(trace.iterations.last().ok_or(Error::EmptyInput("trace has no iterations"))?)?;
    Ok(TraceSummary {
        initial_acc: first.acc,
        final_acc: last.acc,
        final_gzsl: last.gzsl,
        fallbacks: trace.fallback_count(),
    })
}

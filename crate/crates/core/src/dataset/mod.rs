//! The zero-shot data model: class split, attribute table, labeled seen-class
//! training data, and the unlabeled test pools.
//!
//! Ground-truth labels of the test pools travel with the dataset but are only
//! readable with an [`OracleToken`], which only the evaluation module can mint.

mod io;
pub(crate) mod synth;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use io::{load_dataset, save_dataset, FeatureFormat};
pub use synth::{generate_synthetic, zipf_counts, AttributeScheme, HardClasses, HardnessAnchor, Imbalance, SyntheticConfig};
pub use validate::{validate_dataset, ValidationReport, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub usize);

impl ClassId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSplit {
    pub seen: Vec<ClassId>,
    pub unseen: Vec<ClassId>,
}

impl ClassSplit {
    pub fn new(seen: Vec<ClassId>, unseen: Vec<ClassId>) -> Result<Self> {
        if let Some(c) = seen.iter().find(|c| unseen.contains(c)) {
            return Err(Error::SplitOverlap(*c));
        }
        Ok(Self { seen, unseen })
    }

    /// Every class of the split, seen first.
    pub fn all(&self) -> Vec<ClassId> {
        self.seen.iter().chain(&self.unseen).copied().collect()
    }

    pub fn is_seen(&self, c: ClassId) -> bool {
        self.seen.contains(&c)
    }

    pub fn is_unseen(&self, c: ClassId) -> bool {
        self.unseen.contains(&c)
    }

    /// Position of `c` within the unseen list, the index space used by the
    /// hardness metrics.
    pub fn unseen_position(&self, c: ClassId) -> Option<usize> {
        self.unseen.iter().position(|&u| u == c)
    }
}

/// One semantic vector per class, indexed by [`ClassId`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeMatrix(pub Matrix);

impl AttributeMatrix {
    pub fn new(rows: Matrix) -> Result<Self> {
        for (i, r) in rows.iter_rows().enumerate() {
            if r.iter().all(|&v| v == 0.0) {
                return Err(Error::ZeroAttributeRow(ClassId(i)));
            }
        }
        Ok(Self(rows))
    }

    pub fn n_classes(&self) -> usize {
        self.0.rows()
    }

    pub fn dim(&self) -> usize {
        self.0.cols()
    }

    pub fn get(&self, c: ClassId) -> &[f64] {
        self.0.row(c.0)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }
}

/// Feature rows with optional labels (absent for unlabeled pools).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub features: Matrix,
    pub labels: Option<Vec<ClassId>>,
}

impl SampleSet {
    pub fn labeled(features: Matrix, labels: Vec<ClassId>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::LengthMismatch {
                left: features.rows(),
                right: labels.len(),
            });
        }
        Ok(Self {
            features,
            labels: Some(labels),
        })
    }

    pub fn unlabeled(features: Matrix) -> Self {
        Self {
            features,
            labels: None,
        }
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Per-class tally of the explicit labels over `n_classes` global ids.
    pub fn class_counts(&self, n_classes: usize) -> Result<Vec<usize>> {
        let labels = self
            .labels
            .as_ref()
            .ok_or(Error::EmptyInput("sample set has no labels"))?;
        class_counts(labels, n_classes)
    }
}

pub(crate) fn class_counts(labels: &[ClassId], n_classes: usize) -> Result<Vec<usize>> {
    let mut counts = vec![0usize; n_classes];
    for (row, l) in labels.iter().enumerate() {
        match counts.get_mut(l.0) {
            Some(c) => *c += 1,
            None => {
                return Err(Error::LabelOutOfRange {
                    context: "class_counts".into(),
                    row,
                    label: l.0 as i64,
                })
            }
        }
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub feature_dim: usize,
    pub attribute_dim: usize,
    pub class_names: Vec<String>,
}

/// Capability required to read the hidden test labels.
///
/// ```compile_fail
/// let _ = sths_core::dataset::OracleToken { _private: () };
/// ```
#[derive(Debug)]
pub struct OracleToken {
    _private: (),
}

impl OracleToken {
    pub(crate) fn grant() -> Self {
        OracleToken { _private: () }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct HiddenLabels {
    unseen: Vec<ClassId>,
    seen: Option<Vec<ClassId>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZslDataset {
    pub meta: DatasetMeta,
    pub split: ClassSplit,
    pub attributes: AttributeMatrix,
    /// Labeled seen-class training data.
    pub train_seen: SampleSet,
    /// Unlabeled unseen-class pool.
    pub test_unseen: SampleSet,
    /// Optional unlabeled seen-class test pool.
    pub test_seen: Option<SampleSet>,
    hidden: HiddenLabels,
}

impl ZslDataset {
    /// Assembles a dataset and runs full validation. Any label attached to
    /// the test pools is moved behind the oracle boundary.
    pub fn new(
        meta: DatasetMeta,
        split: ClassSplit,
        attributes: AttributeMatrix,
        train_seen: SampleSet,
        test_unseen: SampleSet,
        test_seen: Option<SampleSet>,
    ) -> Result<Self> {
        let ds = Self::from_parts_unchecked(meta, split, attributes, train_seen, test_unseen, test_seen)?;
        let report = validate_dataset(&ds);
        if let Some(first) = report.violations.first() {
            return Err(first.to_error());
        }
        Ok(ds)
    }

    /// Assembles without validation; test pools must carry labels, which are
    /// hidden. Intended for constructing deliberately broken datasets.
    pub fn from_parts_unchecked(
        meta: DatasetMeta,
        split: ClassSplit,
        attributes: AttributeMatrix,
        train_seen: SampleSet,
        mut test_unseen: SampleSet,
        test_seen: Option<SampleSet>,
    ) -> Result<Self> {
        let unseen = test_unseen
            .labels
            .take()
            .ok_or(Error::InvalidDataset("test_unseen requires evaluation labels".into()))?;
        let (test_seen, seen) = match test_seen {
            Some(mut ts) => {
                let l = ts
                    .labels
                    .take()
                    .ok_or(Error::InvalidDataset("test_seen requires evaluation labels".into()))?;
                (Some(ts), Some(l))
            }
            None => (None, None),
        };
        Ok(Self {
            meta,
            split,
            attributes,
            train_seen,
            test_unseen,
            test_seen,
            hidden: HiddenLabels { unseen, seen },
        })
    }

    pub fn n_classes(&self) -> usize {
        self.attributes.n_classes()
    }

    pub fn n_unseen(&self) -> usize {
        self.split.unseen.len()
    }

    pub fn hidden_unseen_labels(&self, _token: &OracleToken) -> &[ClassId] {
        &self.hidden.unseen
    }

    pub fn hidden_seen_labels(&self, _token: &OracleToken) -> Option<&[ClassId]> {
        self.hidden.seen.as_deref()
    }

    /// Copy with every hidden label overwritten by the first class of its
    /// side. Training on the copy must behave identically.
    pub fn with_sentinel_hidden_labels(&self) -> Self {
        let mut out = self.clone();
        if let Some(&u) = self.split.unseen.first() {
            out.hidden.unseen.iter_mut().for_each(|l| *l = u);
        }
        if let (Some(seen), Some(&s)) = (out.hidden.seen.as_mut(), self.split.seen.first()) {
            seen.iter_mut().for_each(|l| *l = s);
        }
        out
    }
}

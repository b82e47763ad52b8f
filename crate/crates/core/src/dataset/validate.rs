use std::fmt;

use serde::Serialize;

use super::{ClassId, ZslDataset};
use crate::error::Error;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    SplitOverlap { class: ClassId },
    SplitClassOutOfRange { class: ClassId },
    /// Attribute row for a class that is in neither split.
    Coverage { class: ClassId },
    ZeroAttributeRow { class: ClassId },
    AttributeDim { expected: usize, found: usize },
    ClassNameCount { expected: usize, found: usize },
    FeatureDim { set: &'static str, expected: usize, found: usize },
    NonFiniteFeatures { set: &'static str, row: usize },
    MissingLabels { set: &'static str },
    LabelCount { set: &'static str, expected: usize, found: usize },
    LabelOutOfRange { set: &'static str, index: usize, label: ClassId },
    LabelOutsideSplit { set: &'static str, index: usize, label: ClassId },
    VisiblePoolLabels { set: &'static str },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", serde_json::to_string(self).unwrap_or_default())
    }
}

impl Violation {
    pub(crate) fn to_error(&self) -> Error {
        match *self {
            Violation::SplitOverlap { class } => Error::SplitOverlap(class),
            Violation::ZeroAttributeRow { class } => Error::ZeroAttributeRow(class),
            Violation::LabelOutOfRange { set, index, label } => Error::LabelOutOfRange {
                context: set.to_string(),
                row: index,
                label: label.0 as i64,
            },
            Violation::FeatureDim { set, expected, found } => Error::DimensionMismatch {
                context: set.to_string(),
                row: 0,
                expected,
                found,
            },
            ref other => Error::InvalidDataset(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every invariant violation; an empty report means the dataset is
/// consistent.
pub fn validate_dataset(ds: &ZslDataset) -> ValidationReport {
    let mut v = Vec::new();
    let n_classes = ds.attributes.n_classes();
    let split = &ds.split;

    for &c in &split.seen {
        if split.unseen.contains(&c) {
            v.push(Violation::SplitOverlap { class: c });
        }
    }
    for &c in split.seen.iter().chain(&split.unseen) {
        if c.0 >= n_classes {
            v.push(Violation::SplitClassOutOfRange { class: c });
        }
    }
    for i in 0..n_classes {
        let c = ClassId(i);
        if !split.is_seen(c) && !split.is_unseen(c) {
            v.push(Violation::Coverage { class: c });
        }
        if ds.attributes.get(c).iter().all(|&x| x == 0.0) {
            v.push(Violation::ZeroAttributeRow { class: c });
        }
    }
    if ds.attributes.dim() != ds.meta.attribute_dim {
        v.push(Violation::AttributeDim {
            expected: ds.meta.attribute_dim,
            found: ds.attributes.dim(),
        });
    }
    if ds.meta.class_names.len() != n_classes {
        v.push(Violation::ClassNameCount {
            expected: n_classes,
            found: ds.meta.class_names.len(),
        });
    }

    let dim = ds.meta.feature_dim;
    let check_features = |set: &'static str, feats: &crate::matrix::Matrix, v: &mut Vec<Violation>| {
        if feats.cols() != dim {
            v.push(Violation::FeatureDim {
                set,
                expected: dim,
                found: feats.cols(),
            });
        }
        if let Some(row) = feats.iter_rows().position(|r| r.iter().any(|x| !x.is_finite())) {
            v.push(Violation::NonFiniteFeatures { set, row });
        }
    };
    check_features("train_seen", &ds.train_seen.features, &mut v);
    check_features("test_unseen", &ds.test_unseen.features, &mut v);
    if let Some(ts) = &ds.test_seen {
        check_features("test_seen", &ts.features, &mut v);
    }

    let check_labels = |set: &'static str, rows: usize, labels: &[ClassId], seen_side: bool, v: &mut Vec<Violation>| {
        if labels.len() != rows {
            v.push(Violation::LabelCount {
                set,
                expected: rows,
                found: labels.len(),
            });
        }
        for (index, &label) in labels.iter().enumerate() {
            if label.0 >= n_classes {
                v.push(Violation::LabelOutOfRange { set, index, label });
            } else if (seen_side && !split.is_seen(label)) || (!seen_side && !split.is_unseen(label)) {
                v.push(Violation::LabelOutsideSplit { set, index, label });
            }
        }
    };
    match &ds.train_seen.labels {
        Some(l) => check_labels("train_seen", ds.train_seen.len(), l, true, &mut v),
        None => v.push(Violation::MissingLabels { set: "train_seen" }),
    }
    check_labels("test_unseen", ds.test_unseen.len(), &ds.hidden.unseen, false, &mut v);
    if ds.test_unseen.labels.is_some() {
        v.push(Violation::VisiblePoolLabels { set: "test_unseen" });
    }
    match (&ds.test_seen, &ds.hidden.seen) {
        (Some(ts), Some(l)) => {
            check_labels("test_seen", ts.len(), l, true, &mut v);
            if ts.labels.is_some() {
                v.push(Violation::VisiblePoolLabels { set: "test_seen" });
            }
        }
        (Some(_), None) => v.push(Violation::MissingLabels { set: "test_seen" }),
        _ => {}
    }
    ValidationReport { violations: v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{AttributeMatrix, ClassSplit, DatasetMeta, SampleSet};
    use crate::matrix::Matrix;

    fn tiny() -> ZslDataset {
        let attrs = AttributeMatrix::new(Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap()).unwrap();
        let split = ClassSplit::new(vec![ClassId(0), ClassId(1)], vec![ClassId(2)]).unwrap();
        let train = SampleSet::labeled(Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(), vec![ClassId(0), ClassId(1)]).unwrap();
        let pool = SampleSet::labeled(Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap(), vec![ClassId(2)]).unwrap();
        let meta = DatasetMeta {
            name: "tiny".into(),
            feature_dim: 2,
            attribute_dim: 2,
            class_names: vec!["a".into(), "b".into(), "c".into()],
        };
        ZslDataset::new(meta, split, attrs, train, pool, None).unwrap()
    }

    #[test]
    fn valid_dataset_has_empty_report() {
        assert!(validate_dataset(&tiny()).is_valid());
    }

    #[test]
    fn unseen_label_in_training_set_cites_index() {
        let mut ds = tiny();
        ds.train_seen.labels.as_mut().unwrap()[1] = ClassId(2);
        let r = validate_dataset(&ds);
        assert_eq!(
            r.violations,
            vec![Violation::LabelOutsideSplit { set: "train_seen", index: 1, label: ClassId(2) }]
        );
    }

    #[test]
    fn orphan_attribute_row_is_a_coverage_violation() {
        let mut ds = tiny();
        let mut rows: Vec<Vec<f64>> = ds.attributes.matrix().iter_rows().map(<[f64]>::to_vec).collect();
        rows.push(vec![0.5, 0.5]);
        ds.attributes = AttributeMatrix::new(Matrix::from_rows(&rows).unwrap()).unwrap();
        ds.meta.class_names.push("d".into());
        let r = validate_dataset(&ds);
        assert_eq!(r.violations, vec![Violation::Coverage { class: ClassId(3) }]);
    }
}

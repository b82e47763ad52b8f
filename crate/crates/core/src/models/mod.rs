//! Base classifiers plugged into the self-training loop.
//!
//! Every model exposes per-class scores over a candidate label set; the
//! predicted label is the argmax of those scores with ties going to the
//! smallest [`ClassId`].

mod checkpoint;
mod embedding;
mod generative;

use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeMatrix, ClassId, ClassSplit, SampleSet};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use embedding::{fit_embedding, EmbeddingModel, EmbeddingParams, Prototypes, Weighting};
pub use generative::{fit_generative, GenerativeModel, GenerativeParams, VARIANCE_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    SeenTruth,
    UnseenPseudo,
    /// True-labeled unseen samples, used only by the oracle diagnostics.
    UnseenTruth,
}

/// Labeled rows fed to a model fit, each tagged with where its label came from.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    features: Matrix,
    labels: Vec<ClassId>,
    origins: Vec<Origin>,
}

impl TrainingSet {
    pub fn from_seen(seen: &SampleSet) -> Result<Self> {
        let labels = seen
            .labels
            .clone()
            .ok_or(Error::EmptyInput("seen training set has no labels"))?;
        Ok(Self {
            features: seen.features.clone(),
            origins: vec![Origin::SeenTruth; labels.len()],
            labels,
        })
    }

    /// Appends rows labeled with unseen classes. Labels outside `Y^U` are
    /// rejected.
    pub fn extend_unseen(&mut self, rows: &Matrix, labels: &[ClassId], origin: Origin, split: &ClassSplit) -> Result<()> {
        if rows.rows() != labels.len() {
            return Err(Error::LengthMismatch {
                left: rows.rows(),
                right: labels.len(),
            });
        }
        if origin == Origin::SeenTruth {
            return Err(Error::param("origin", "unseen rows cannot be tagged as seen ground truth"));
        }
        if let Some(bad) = labels.iter().find(|l| !split.is_unseen(**l)) {
            return Err(Error::InvalidDataset(format!("pseudo label {bad} is not an unseen class")));
        }
        self.features = self.features.vstack(rows)?;
        self.labels.extend_from_slice(labels);
        self.origins.extend(std::iter::repeat_n(origin, labels.len()));
        Ok(())
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn origins(&self) -> &[Origin] {
        &self.origins
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn count_origin(&self, origin: Origin) -> usize {
        self.origins.iter().filter(|&&o| o == origin).count()
    }

    /// Distinct labels in ascending id order.
    pub fn classes(&self) -> Vec<ClassId> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Per-class mean feature vector for every class present.
    pub(crate) fn class_means(&self) -> Vec<(ClassId, Vec<f64>, usize)> {
        let dim = self.features.cols();
        let mut acc: std::collections::BTreeMap<ClassId, (Vec<f64>, usize)> = Default::default();
        for (row, &l) in self.features.iter_rows().zip(&self.labels) {
            let e = acc.entry(l).or_insert_with(|| (vec![0.0; dim], 0));
            e.0.iter_mut().zip(row).for_each(|(a, b)| *a += b);
            e.1 += 1;
        }
        acc.into_iter()
            .map(|(c, (mut sum, n))| {
                sum.iter_mut().for_each(|v| *v /= n as f64);
                (c, sum, n)
            })
            .collect()
    }
}

/// Behavioral contract of a fitted base model.
pub trait BaseModel {
    /// `samples.rows() × candidates.len()` score matrix, higher is better.
    fn scores(&self, samples: &Matrix, candidates: &[ClassId]) -> Result<Matrix>;

    fn predict(&self, samples: &Matrix, candidates: &[ClassId]) -> Result<Vec<ClassId>> {
        let s = self.scores(samples, candidates)?;
        Ok(argmax_labels(&s, candidates))
    }
}

/// Row-wise argmax over `candidates`; equal scores resolve to the smallest id.
pub fn argmax_labels(scores: &Matrix, candidates: &[ClassId]) -> Vec<ClassId> {
    scores
        .iter_rows()
        .map(|row| {
            let mut best = 0;
            for j in 1..row.len() {
                if row[j] > row[best] || (row[j] == row[best] && candidates[j] < candidates[best]) {
                    best = j;
                }
            }
            candidates[best]
        })
        .collect()
}

pub(crate) fn check_candidates(candidates: &[ClassId], n_classes: usize) -> Result<()> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput("candidate label set"));
    }
    if let Some(c) = candidates.iter().find(|c| c.0 >= n_classes) {
        return Err(Error::LabelOutOfRange {
            context: "candidates".into(),
            row: 0,
            label: c.0 as i64,
        });
    }
    Ok(())
}

/// Model family plus hyperparameters; `fit` yields a [`FittedModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Embedding(EmbeddingParams),
    Generative(GenerativeParams),
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Embedding(EmbeddingParams::default())
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Embedding(p) => p.validate(),
            ModelSpec::Generative(p) => p.validate(),
        }
    }

    pub fn fit(&self, train: &TrainingSet, attrs: &AttributeMatrix, seed: u64) -> Result<FittedModel> {
        match self {
            ModelSpec::Embedding(p) => fit_embedding(train, attrs, p, seed).map(FittedModel::Embedding),
            ModelSpec::Generative(p) => fit_generative(train, attrs, p, seed).map(FittedModel::Generative),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Embedding(_) => "embedding",
            ModelSpec::Generative(_) => "generative",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedModel {
    Embedding(EmbeddingModel),
    Generative(GenerativeModel),
}

impl FittedModel {
    pub fn name(&self) -> &'static str {
        match self {
            FittedModel::Embedding(_) => "embedding",
            FittedModel::Generative(_) => "generative",
        }
    }
}

impl BaseModel for FittedModel {
    fn scores(&self, samples: &Matrix, candidates: &[ClassId]) -> Result<Matrix> {
        match self {
            FittedModel::Embedding(m) => m.scores(samples, candidates),
            FittedModel::Generative(m) => m.scores(samples, candidates),
        }
    }
}

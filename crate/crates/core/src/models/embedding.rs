//! Semantic-to-visual embedding model.
//!
//! A ridge map `W` takes attribute vectors to visual prototypes `W·e_y`.
//! Scores are negative squared distances to the prototypes. By default `W` is
//! fitted over individual samples, so classes with more training rows weigh
//! more, and every class uses its mapped prototype.

use serde::{Deserialize, Serialize};

use super::{check_candidates, BaseModel, TrainingSet};
use crate::dataset::{AttributeMatrix, ClassId};
use crate::error::{Error, Result};
use crate::linalg::{ridge_fit, LinearMap};
use crate::matrix::{sq_dist, Matrix};

/// How training rows weigh in the ridge fit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Every sample counts once.
    #[default]
    Samples,
    /// Every class mean counts once.
    Classes,
}

/// Prototype of a class that has training rows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prototypes {
    /// Always `W·e_y`.
    #[default]
    Mapped,
    /// The empirical class mean.
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingParams {
    /// Ridge penalty on the attribute-to-prototype map.
    pub lambda: f64,
    #[serde(default)]
    pub weighting: Weighting,
    #[serde(default)]
    pub prototypes: Prototypes,
}

impl Default for EmbeddingParams {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            weighting: Weighting::default(),
            prototypes: Prototypes::default(),
        }
    }
}

impl EmbeddingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::param("lambda", "must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel {
    pub map: LinearMap,
    /// One prototype row per class id.
    pub prototypes: Matrix,
    /// Whether each class had training rows.
    pub observed: Vec<bool>,
}

pub fn fit_embedding(train: &TrainingSet, attrs: &AttributeMatrix, params: &EmbeddingParams, _seed: u64) -> Result<EmbeddingModel> {
    params.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    let means = train.class_means();
    let n_classes = attrs.n_classes();
    if let Some((c, _, _)) = means.iter().find(|(c, _, _)| c.0 >= n_classes) {
        return Err(Error::LabelOutOfRange {
            context: "training labels".into(),
            row: 0,
            label: c.0 as i64,
        });
    }
    let dim = train.features().cols();
    let mut inputs = Matrix::empty(attrs.dim());
    let mut targets = Matrix::empty(dim);
    for (c, mean, n) in &means {
        // n copies of a row have the same normal equations as one row scaled by √n
        let w = match params.weighting {
            Weighting::Samples => (*n as f64).sqrt(),
            Weighting::Classes => 1.0,
        };
        inputs.push_row(&attrs.get(*c).iter().map(|a| a * w).collect::<Vec<_>>());
        targets.push_row(&mean.iter().map(|m| m * w).collect::<Vec<_>>());
    }
    let map = ridge_fit(&inputs, &targets, params.lambda)?;

    let mut prototypes = Matrix::zeros(n_classes, dim);
    let mut observed = vec![false; n_classes];
    for c in 0..n_classes {
        prototypes.row_mut(c).copy_from_slice(&map.apply(attrs.get(ClassId(c))));
    }
    for (c, mean, _) in means {
        if params.prototypes == Prototypes::Empirical {
            prototypes.row_mut(c.0).copy_from_slice(&mean);
        }
        observed[c.0] = true;
    }
    Ok(EmbeddingModel {
        map,
        prototypes,
        observed,
    })
}

impl BaseModel for EmbeddingModel {
    fn scores(&self, samples: &Matrix, candidates: &[ClassId]) -> Result<Matrix> {
        check_candidates(candidates, self.prototypes.rows())?;
        if samples.cols() != self.prototypes.cols() {
            return Err(Error::DimensionMismatch {
                context: "embedding scores".into(),
                row: 0,
                expected: self.prototypes.cols(),
                found: samples.cols(),
            });
        }
        let mut out = Matrix::zeros(samples.rows(), candidates.len());
        for (i, x) in samples.iter_rows().enumerate() {
            for (j, c) in candidates.iter().enumerate() {
                out.set(i, j, -sq_dist(x, self.prototypes.row(c.0)));
            }
        }
        Ok(out)
    }
}

//! Gaussian feature-synthesis model.
//!
//! Class means are regressed from attributes with the same ridge map as the
//! embedding model, a shared diagonal covariance is pooled from within-class
//! residuals, and `m` fake features are drawn per class. A multinomial
//! logistic classifier is then trained on real and fake rows together.

use log::warn;
use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{check_candidates, BaseModel, TrainingSet};
use crate::dataset::{AttributeMatrix, ClassId};
use crate::error::{Error, Result};
use crate::linalg::{ridge_fit, LinearMap};
use crate::matrix::Matrix;
use crate::rng::stream;

/// Lower bound on every variance entry.
pub const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeParams {
    pub lambda: f64,
    pub fakes_per_class: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for GenerativeParams {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            fakes_per_class: 50,
            learning_rate: 0.1,
            epochs: 300,
            momentum: 0.9,
            weight_decay: 1e-4,
        }
    }
}

impl GenerativeParams {
    pub fn validate(&self) -> Result<()> {
        if self.fakes_per_class == 0 {
            return Err(Error::param("fakes_per_class", "must be >= 1"));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::param("lambda", "must be >= 0"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::param("learning_rate", "must be > 0"));
        }
        if self.epochs == 0 {
            return Err(Error::param("epochs", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::param("momentum", "must be in [0, 1)"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::param("weight_decay", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeModel {
    pub map: LinearMap,
    /// Shared diagonal covariance.
    pub variance: Vec<f64>,
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    /// `(V + 1) × n_classes` softmax weights; the last row is the bias.
    pub weights: Matrix,
}

fn pooled_variance(train: &TrainingSet, means: &[(ClassId, Vec<f64>, usize)]) -> Vec<f64> {
    let dim = train.features().cols();
    if means.len() < 2 {
        warn!("fewer than two classes for covariance pooling; using identity covariance");
        return vec![1.0; dim];
    }
    let lookup: std::collections::BTreeMap<ClassId, &Vec<f64>> = means.iter().map(|(c, m, _)| (*c, m)).collect();
    let mut var = vec![0.0; dim];
    for (row, l) in train.features().iter_rows().zip(train.labels()) {
        let mu = lookup[l];
        for j in 0..dim {
            let d = row[j] - mu[j];
            var[j] += d * d;
        }
    }
    let dof = train.len().saturating_sub(means.len()).max(1) as f64;
    var.iter().map(|v| (v / dof).max(VARIANCE_FLOOR)).collect()
}

pub fn fit_generative(train: &TrainingSet, attrs: &AttributeMatrix, params: &GenerativeParams, seed: u64) -> Result<GenerativeModel> {
    params.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    let n_classes = attrs.n_classes();
    let dim = train.features().cols();
    let means = train.class_means();
    if let Some((c, _, _)) = means.iter().find(|(c, _, _)| c.0 >= n_classes) {
        return Err(Error::LabelOutOfRange {
            context: "training labels".into(),
            row: 0,
            label: c.0 as i64,
        });
    }
    let mut inputs = Matrix::empty(attrs.dim());
    let mut targets = Matrix::empty(dim);
    for (c, m, _) in &means {
        inputs.push_row(attrs.get(*c));
        targets.push_row(m);
    }
    let map = ridge_fit(&inputs, &targets, params.lambda)?;
    let variance = pooled_variance(train, &means);
    let std: Vec<f64> = variance.iter().map(|v| v.sqrt()).collect();

    // real rows first, then fakes in class order
    let m = params.fakes_per_class;
    let n = train.len() + m * n_classes;
    let mut rows = Matrix::zeros(n, dim);
    let mut labels = Vec::with_capacity(n);
    for (i, (r, l)) in train.features().iter_rows().zip(train.labels()).enumerate() {
        rows.row_mut(i).copy_from_slice(r);
        labels.push(l.0);
    }
    let mut rng = stream(seed, 0x6E6);
    let mut k = train.len();
    for c in 0..n_classes {
        let mu = map.apply(attrs.get(ClassId(c)));
        for _ in 0..m {
            let row = rows.row_mut(k);
            for j in 0..dim {
                let z: f64 = StandardNormal.sample(&mut rng);
                row[j] = mu[j] + std[j] * z;
            }
            labels.push(c);
            k += 1;
        }
    }

    let (feature_mean, feature_scale) = standardizer(&rows);
    let x = design_matrix(&rows, &feature_mean, &feature_scale);
    let weights = train_softmax(&x, &labels, n_classes, params);
    Ok(GenerativeModel {
        map,
        variance,
        feature_mean,
        feature_scale,
        weights: Matrix::from_dmatrix(&weights),
    })
}

fn standardizer(rows: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = (rows.rows() as f64, rows.cols());
    let mut mean = vec![0.0; d];
    for r in rows.iter_rows() {
        mean.iter_mut().zip(r).for_each(|(m, v)| *m += v / n);
    }
    let mut var = vec![0.0; d];
    for r in rows.iter_rows() {
        for j in 0..d {
            var[j] += (r[j] - mean[j]).powi(2) / n;
        }
    }
    let scale = var.iter().map(|v| if *v > 1e-12 { v.sqrt() } else { 1.0 }).collect();
    (mean, scale)
}

fn design_matrix(rows: &Matrix, mean: &[f64], scale: &[f64]) -> DMatrix<f64> {
    let d = rows.cols();
    DMatrix::from_fn(rows.rows(), d + 1, |i, j| if j == d { 1.0 } else { (rows.get(i, j) - mean[j]) / scale[j] })
}

fn softmax_rows(logits: &mut DMatrix<f64>) {
    for mut row in logits.row_iter_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// Full-batch gradient descent with momentum on mean cross-entropy plus an L2
/// penalty on the non-bias weights. Starts from zero, so the result depends
/// only on the data.
fn train_softmax(x: &DMatrix<f64>, labels: &[usize], n_classes: usize, p: &GenerativeParams) -> DMatrix<f64> {
    let (n, d1) = (x.nrows(), x.ncols());
    let mut w = DMatrix::<f64>::zeros(d1, n_classes);
    let mut velocity = DMatrix::<f64>::zeros(d1, n_classes);
    let xt = x.transpose();
    for _ in 0..p.epochs {
        let mut probs = x * &w;
        softmax_rows(&mut probs);
        for (i, &l) in labels.iter().enumerate() {
            probs[(i, l)] -= 1.0;
        }
        let mut grad = (&xt * probs) / n as f64;
        for i in 0..d1 - 1 {
            for c in 0..n_classes {
                grad[(i, c)] += p.weight_decay * w[(i, c)];
            }
        }
        velocity = velocity * p.momentum - grad * p.learning_rate;
        w += &velocity;
    }
    w
}

impl GenerativeModel {
    pub fn n_classes(&self) -> usize {
        self.weights.cols()
    }

    fn logits(&self, samples: &Matrix) -> DMatrix<f64> {
        let x = design_matrix(samples, &self.feature_mean, &self.feature_scale);
        x * self.weights.to_dmatrix()
    }
}

impl BaseModel for GenerativeModel {
    fn scores(&self, samples: &Matrix, candidates: &[ClassId]) -> Result<Matrix> {
        check_candidates(candidates, self.n_classes())?;
        if samples.cols() != self.feature_mean.len() {
            return Err(Error::DimensionMismatch {
                context: "generative scores".into(),
                row: 0,
                expected: self.feature_mean.len(),
                found: samples.cols(),
            });
        }
        let logits = self.logits(samples);
        let mut out = Matrix::zeros(samples.rows(), candidates.len());
        for i in 0..samples.rows() {
            for (j, c) in candidates.iter().enumerate() {
                out.set(i, j, logits[(i, c.0)]);
            }
        }
        Ok(out)
    }
}

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `d × V`, one unit direction per row, by decreasing variance.
    pub components: Matrix,
    /// Variance along each retained direction.
    pub explained_variance: Vec<f64>,
    /// Retained variance over total variance, per direction.
    pub explained_ratio: Vec<f64>,
}

impl Pca {
    pub fn fit(features: &Matrix, d: usize) -> Result<Self> {
        let (m, v) = (features.rows(), features.cols());
        if d == 0 || d > m.min(v) {
            return Err(Error::param("d", format!("need 1 <= d <= min(M, V) = {}, got {d}", m.min(v))));
        }
        if !features.is_finite() {
            return Err(Error::NonFinite("PCA input"));
        }
        let mut mean = vec![0.0; v];
        for r in features.iter_rows() {
            mean.iter_mut().zip(r).for_each(|(a, b)| *a += b / m as f64);
        }
        let centered = DMatrix::from_fn(m, v, |i, j| features.get(i, j) - mean[j]);
        let cov = centered.transpose() * &centered / m as f64;
        let eig = SymmetricEigen::new(cov);
        let mut idx: Vec<usize> = (0..v).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let total: f64 = eig.eigenvalues.iter().map(|x| x.max(0.0)).sum();

        let mut components = Matrix::zeros(d, v);
        let mut explained_variance = Vec::with_capacity(d);
        for (k, &e) in idx.iter().take(d).enumerate() {
            let col = eig.eigenvectors.column(e);
            let pivot = (0..v).fold(0, |best, j| if col[j].abs() > col[best].abs() { j } else { best });
            let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..v {
                components.set(k, j, sign * col[j]);
            }
            explained_variance.push(eig.eigenvalues[e].max(0.0));
        }
        let explained_ratio = explained_variance
            .iter()
            .map(|x| if total > 0.0 { x / total } else { 0.0 })
            .collect();
        Ok(Self {
            mean,
            components,
            explained_variance,
            explained_ratio,
        })
    }

    pub fn transform(&self, features: &Matrix) -> Matrix {
        let d = self.components.rows();
        let mut out = Matrix::zeros(features.rows(), d);
        for (i, r) in features.iter_rows().enumerate() {
            for k in 0..d {
                let dir = self.components.row(k);
                out.set(i, k, r.iter().zip(&self.mean).zip(dir).map(|((x, m), w)| (x - m) * w).sum());
            }
        }
        out
    }
}

/// Mean-centred projection onto the top `d` principal directions.
///
/// The result is fully determined by the data; `_seed` is accepted so callers
/// can treat every reduction stage uniformly.
pub fn reduce_dims(features: &Matrix, d: usize, _seed: u64) -> Result<Matrix> {
    Ok(Pca::fit(features, d)?.transform(features))
}

//! Small dense solvers shared by the base models.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Linear map `y = W x` with `W` stored as an `out_dim × in_dim` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMap {
    pub weights: Matrix,
}

impl LinearMap {
    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter_rows()
            .map(|w| crate::matrix::dot(w, x))
            .collect()
    }
}

/// Solves `min_W Σ_i ||W x_i − y_i||² + λ ||W||²` in closed form through the
/// normal equations `(XᵀX + λI) Wᵀ = XᵀY`.
///
/// `inputs` is `n × in_dim`, `targets` is `n × out_dim`.
pub fn ridge_fit(inputs: &Matrix, targets: &Matrix, lambda: f64) -> Result<LinearMap> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::param("lambda", format!("must be finite and >= 0, got {lambda}")));
    }
    if inputs.rows() != targets.rows() {
        return Err(Error::LengthMismatch {
            left: inputs.rows(),
            right: targets.rows(),
        });
    }
    if inputs.rows() == 0 {
        return Err(Error::EmptyInput("ridge regression rows"));
    }
    let x = inputs.to_dmatrix();
    let y = targets.to_dmatrix();
    let d = x.ncols();
    let mut gram = x.transpose() * &x;
    for i in 0..d {
        gram[(i, i)] += lambda;
    }
    let rhs = x.transpose() * &y;

    if lambda == 0.0 && inputs.rows() < d {
        return Err(Error::SingularSystem { lambda });
    }
    let solution = match gram.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => return Err(Error::SingularSystem { lambda }),
    };
    if lambda == 0.0 && !well_conditioned(&gram) {
        return Err(Error::SingularSystem { lambda });
    }
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem { lambda });
    }
    Ok(LinearMap {
        weights: Matrix::from_dmatrix(&solution.transpose()),
    })
}

fn well_conditioned(gram: &DMatrix<f64>) -> bool {
    let eig = gram.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    max > 0.0 && min > max * 1e-12
}

//! Approximate class prior from classification/clustering consistency.
//!
//! The unseen pool is projected with PCA, clustered with a diagonal Gaussian
//! mixture, and only samples whose cluster and predicted class both agree with
//! some other sample are kept. The add-one smoothed histogram of their
//! predicted classes is the prior estimate.

mod consistency;
mod gmm;
mod pca;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hardness::ClassPrior;
use crate::matrix::Matrix;

pub use consistency::{consistency_subgraph, ConsistencySubgraph};
pub use gmm::{cluster_gmm, ClusterAssignment, GmmConfig, GMM_VARIANCE_FLOOR};
pub use pca::{reduce_dims, Pca};

/// Any estimated class probability above this raises a concentration flag.
pub const CONCENTRATION_WARNING: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatedPrior {
    pub p: Vec<f64>,
    /// Per-class counts inside the subgraph.
    pub counts: Vec<usize>,
    pub subgraph_size: usize,
    pub kept_fraction: f64,
    /// The subgraph was empty and the prior fell back to uniform.
    pub uniform_fallback: bool,
    /// Some class received more than [`CONCENTRATION_WARNING`] of the mass.
    pub concentrated: bool,
}

impl EstimatedPrior {
    /// Floor used when dividing by this prior: `1 / (2|P_sub| + C)`.
    pub fn epsilon(&self) -> f64 {
        1.0 / (2 * self.subgraph_size + self.p.len()) as f64
    }

    pub fn to_class_prior(&self) -> ClassPrior {
        ClassPrior {
            p: self.p.clone(),
            epsilon: self.epsilon(),
        }
    }
}

/// `(count + 1) / (|P_sub| + C)` per class; uniform when the subgraph is
/// empty.
pub fn estimate_prior(sub: &ConsistencySubgraph, n_classes: usize) -> Result<EstimatedPrior> {
    if n_classes == 0 {
        return Err(Error::param("n_classes", "must be >= 1"));
    }
    let mut counts = vec![0usize; n_classes];
    for (row, &c) in sub.p_sub.iter().enumerate() {
        if c >= n_classes {
            return Err(Error::LabelOutOfRange {
                context: "subgraph labels".into(),
                row,
                label: c as i64,
            });
        }
        counts[c] += 1;
    }
    let n = sub.p_sub.len();
    let uniform_fallback = n == 0;
    if uniform_fallback {
        warn!("consistency subgraph is empty; using a uniform prior");
    }
    let p: Vec<f64> = counts.iter().map(|&c| (c + 1) as f64 / (n + n_classes) as f64).collect();
    let concentrated = p.iter().any(|&v| v > CONCENTRATION_WARNING);
    if concentrated {
        warn!("estimated prior puts more than {CONCENTRATION_WARNING} on a single class");
    }
    Ok(EstimatedPrior {
        p,
        counts,
        subgraph_size: n,
        kept_fraction: sub.kept_fraction(),
        uniform_fallback,
        concentrated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThreeCConfig {
    /// PCA target dimension, clamped to `min(M, V)`.
    pub dims: usize,
    /// Mixture components; `None` uses the class count. Clamped to `M`.
    pub components: Option<usize>,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for ThreeCConfig {
    fn default() -> Self {
        Self {
            dims: 10,
            components: None,
            max_iter: 200,
            tol: 1e-6,
            seed: 0,
        }
    }
}

impl ThreeCConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 {
            return Err(Error::param("dims", "must be >= 1"));
        }
        if self.components == Some(0) {
            return Err(Error::param("components", "must be >= 1"));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreeCOutcome {
    pub prior: EstimatedPrior,
    pub dims: usize,
    pub components: usize,
    pub gmm_log_likelihood: Option<f64>,
    pub gmm_converged: Option<bool>,
}

/// PCA, mixture clustering, consistency subgraph, smoothed histogram.
///
/// `predictions` are positions `0..n_classes` for each pool row. Pools with
/// fewer than two rows have no edges and yield the uniform fallback.
pub fn estimate_prior_3c(pool: &Matrix, predictions: &[usize], n_classes: usize, cfg: &ThreeCConfig) -> Result<ThreeCOutcome> {
    cfg.validate()?;
    if pool.rows() != predictions.len() {
        return Err(Error::LengthMismatch {
            left: pool.rows(),
            right: predictions.len(),
        });
    }
    let m = pool.rows();
    if m < 2 {
        let sub = ConsistencySubgraph {
            kept: vec![],
            p_sub: vec![],
            pool_size: m,
        };
        return Ok(ThreeCOutcome {
            prior: estimate_prior(&sub, n_classes)?,
            dims: 0,
            components: 0,
            gmm_log_likelihood: None,
            gmm_converged: None,
        });
    }
    let dims = cfg.dims.min(m).min(pool.cols());
    let components = cfg.components.unwrap_or(n_classes).min(m);
    let reduced = reduce_dims(pool, dims, cfg.seed)?;
    let gmm = cluster_gmm(
        &reduced,
        &GmmConfig {
            components,
            max_iter: cfg.max_iter,
            tol: cfg.tol,
            seed: cfg.seed,
        },
    )?;
    let sub = consistency_subgraph(&gmm.labels, predictions)?;
    Ok(ThreeCOutcome {
        prior: estimate_prior(&sub, n_classes)?,
        dims,
        components,
        gmm_log_likelihood: Some(gmm.log_likelihood),
        gmm_converged: Some(gmm.converged),
    })
}

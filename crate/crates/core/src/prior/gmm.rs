use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{sq_dist, Matrix};
use crate::rng::stream;

/// Variance floor for every mixture component.
pub const GMM_VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmConfig {
    pub components: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl GmmConfig {
    pub fn new(components: usize, seed: u64) -> Self {
        Self {
            components,
            max_iter: 200,
            tol: 1e-6,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub components: usize,
    pub log_likelihood: f64,
    /// Log-likelihood after each EM iteration.
    pub history: Vec<f64>,
    pub converged: bool,
    pub weights: Vec<f64>,
    pub means: Matrix,
    pub variances: Matrix,
}

fn kmeanspp(points: &Matrix, k: usize, seed: u64) -> Matrix {
    let mut rng = stream(seed, 0x6D6D);
    let m = points.rows();
    let mut centers = Matrix::empty(points.cols());
    centers.push_row(points.row(rng.random_range(0..m)));
    let mut d2: Vec<f64> = points.iter_rows().map(|p| sq_dist(p, centers.row(0))).collect();
    while centers.rows() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = m - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            rng.random_range(0..m)
        };
        centers.push_row(points.row(next));
        let c = centers.rows() - 1;
        for (i, p) in points.iter_rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, centers.row(c)));
        }
    }
    centers
}

fn log_gauss(x: &[f64], mean: &[f64], var: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in 0..x.len() {
        let d = x[j] - mean[j];
        s += d * d / var[j] + var[j].ln() + std::f64::consts::TAU.ln();
    }
    -0.5 * s
}

/// E-step: fills `resp` (M × K) and returns the total log-likelihood.
fn e_step(points: &Matrix, weights: &[f64], means: &Matrix, vars: &Matrix, resp: &mut Matrix) -> f64 {
    let k = weights.len();
    let mut ll = 0.0;
    for (i, x) in points.iter_rows().enumerate() {
        let row = resp.row_mut(i);
        for c in 0..k {
            row[c] = if weights[c] > 0.0 {
                weights[c].ln() + log_gauss(x, means.row(c), vars.row(c))
            } else {
                f64::NEG_INFINITY
            };
        }
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let lse = max + sum.ln();
        row.iter_mut().for_each(|v| *v = (*v - lse).exp());
        ll += lse;
    }
    ll
}

/// Diagonal-covariance Gaussian mixture fitted by EM from a k-means++ start.
pub fn cluster_gmm(points: &Matrix, cfg: &GmmConfig) -> Result<ClusterAssignment> {
    let (m, d) = (points.rows(), points.cols());
    let k = cfg.components;
    if k == 0 {
        return Err(Error::param("components", "must be >= 1"));
    }
    if m < k {
        return Err(Error::param("components", format!("{k} components need at least {k} points, got {m}")));
    }
    if !points.is_finite() {
        return Err(Error::NonFinite("GMM input"));
    }

    let mut means = kmeanspp(points, k, cfg.seed);
    let mut global = vec![0.0; d];
    let mu: Vec<f64> = (0..d).map(|j| (0..m).map(|i| points.get(i, j)).sum::<f64>() / m as f64).collect();
    for r in points.iter_rows() {
        for j in 0..d {
            global[j] += (r[j] - mu[j]).powi(2) / m as f64;
        }
    }
    let global: Vec<f64> = global.iter().map(|v| v.max(GMM_VARIANCE_FLOOR)).collect();
    let mut vars = Matrix::zeros(k, d);
    for c in 0..k {
        vars.row_mut(c).copy_from_slice(&global);
    }
    let mut weights = vec![1.0 / k as f64; k];
    let mut resp = Matrix::zeros(m, k);
    let mut history = Vec::new();
    let mut converged = false;

    let mut ll = e_step(points, &weights, &means, &vars, &mut resp);
    for _ in 0..cfg.max_iter {
        // M-step
        for c in 0..k {
            let nk: f64 = (0..m).map(|i| resp.get(i, c)).sum();
            weights[c] = nk / m as f64;
            if nk <= 1e-12 {
                continue;
            }
            let mut mean = vec![0.0; d];
            for (i, x) in points.iter_rows().enumerate() {
                let r = resp.get(i, c);
                mean.iter_mut().zip(x).for_each(|(a, b)| *a += r * b / nk);
            }
            let mut var = vec![0.0; d];
            for (i, x) in points.iter_rows().enumerate() {
                let r = resp.get(i, c);
                for j in 0..d {
                    var[j] += r * (x[j] - mean[j]).powi(2) / nk;
                }
            }
            means.row_mut(c).copy_from_slice(&mean);
            for (j, v) in var.into_iter().enumerate() {
                vars.set(c, j, v.max(GMM_VARIANCE_FLOOR));
            }
        }
        let next = e_step(points, &weights, &means, &vars, &mut resp);
        history.push(next);
        let delta = next - ll;
        ll = next;
        if delta.abs() < cfg.tol {
            converged = true;
            break;
        }
    }

    let labels = resp
        .iter_rows()
        .map(|r| (0..k).fold(0, |best, c| if r[c] > r[best] { c } else { best }))
        .collect();
    Ok(ClusterAssignment {
        labels,
        components: k,
        log_likelihood: ll,
        history,
        converged,
        weights,
        means,
        variances: vars,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(seed: u64, per: usize, sigma: f64) -> (Matrix, Vec<usize>) {
        let centers = [[0.0, 0.0], [1.0, 0.0], [0.5, 0.866]];
        let mut rng = stream(seed, 2);
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for (c, mu) in centers.iter().enumerate() {
            for _ in 0..per {
                rows.push(vec![mu[0] + noise.sample(&mut rng), mu[1] + noise.sample(&mut rng)]);
                truth.push(c);
            }
        }
        (Matrix::from_rows(&rows).unwrap(), truth)
    }

    /// Best agreement over all relabelings of three clusters.
    fn agreement(a: &[usize], b: &[usize]) -> f64 {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        perms
            .iter()
            .map(|p| a.iter().zip(b).filter(|(x, y)| p[**x] == **y).count())
            .max()
            .unwrap() as f64
            / a.len() as f64
    }

    #[test]
    fn two_point_masses_separate() {
        let x = Matrix::from_rows(&[vec![0.0], vec![0.0], vec![0.0], vec![5.0], vec![5.0]]).unwrap();
        let r = cluster_gmm(&x, &GmmConfig::new(2, 4)).unwrap();
        assert_eq!(r.labels[0], r.labels[1]);
        assert_eq!(r.labels[0], r.labels[2]);
        assert_eq!(r.labels[3], r.labels[4]);
        assert_ne!(r.labels[0], r.labels[3]);
    }

    #[test]
    fn one_component_single_cluster() {
        let (x, _) = blobs(1, 10, 0.1);
        assert!(cluster_gmm(&x, &GmmConfig::new(1, 0)).unwrap().labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn three_blobs_recovered() {
        for seed in 0..5 {
            let (x, truth) = blobs(seed, 40, 0.1);
            let r = cluster_gmm(&x, &GmmConfig::new(3, seed)).unwrap();
            let a = agreement(&r.labels, &truth);
            assert!(a >= 0.98, "seed {seed}: {a}");
        }
    }

    #[test]
    fn log_likelihood_nondecreasing() {
        for seed in 0..5 {
            let (x, _) = blobs(seed + 10, 30, 0.3);
            let r = cluster_gmm(&x, &GmmConfig::new(4, seed)).unwrap();
            assert!(r.history.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{:?}", r.history);
        }
    }

    #[test]
    fn errors() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(cluster_gmm(&x, &GmmConfig::new(3, 0)).is_err());
        let bad = Matrix::from_rows(&[vec![f64::NAN], vec![1.0]]).unwrap();
        assert!(cluster_gmm(&bad, &GmmConfig::new(1, 0)).is_err());
    }

    #[test]
    fn deterministic() {
        let (x, _) = blobs(3, 20, 0.2);
        assert_eq!(cluster_gmm(&x, &GmmConfig::new(3, 9)).unwrap(), cluster_gmm(&x, &GmmConfig::new(3, 9)).unwrap());
    }
}

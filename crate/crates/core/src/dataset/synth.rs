//! Seeded synthetic zero-shot benchmark.
//!
//! Class prototypes are `W·e_y` for a random linear map `W`, optionally offset
//! by a per-class jitter that the attributes do not explain. A chosen subset of
//! unseen classes is pulled toward another class prototype (seen or unseen),
//! so their samples no longer sit where their attributes place them. Samples
//! are isotropic Gaussians around the prototypes.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{AttributeMatrix, ClassId, ClassSplit, DatasetMeta, SampleSet, ZslDataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{stream, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Imbalance {
    Uniform { per_class: usize },
    Zipf { exponent: f64, total: usize },
    Proportions { weights: Vec<f64>, total: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum AttributeScheme {
    Gaussian,
    Binary { density: f64 },
}

/// Where a hard class is pulled: toward a random seen class, or toward a random
/// unseen class that is not itself hard.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HardnessAnchor {
    #[default]
    Seen,
    Unseen,
}

/// Which unseen classes (by position in the unseen list) receive the hardness
/// offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "select", rename_all = "snake_case")]
pub enum HardClasses {
    None,
    Fraction { fraction: f64 },
    Explicit { positions: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub name: String,
    pub n_seen: usize,
    pub n_unseen: usize,
    pub feature_dim: usize,
    pub attribute_dim: usize,
    pub train_per_class: usize,
    /// Seen-class test samples per class; 0 disables the seen test pool.
    #[serde(default)]
    pub test_seen_per_class: usize,
    pub unseen: Imbalance,
    pub attributes: AttributeScheme,
    /// Sample noise σ.
    pub noise: f64,
    /// Typical per-dimension spread of the prototypes.
    pub separation: f64,
    /// Attribute-unexplained prototype offset, relative to `separation`.
    #[serde(default)]
    pub prototype_jitter: f64,
    pub hardness: HardClasses,
    /// Fraction of the way a hard class is moved toward its anchor.
    #[serde(default)]
    pub hardness_strength: f64,
    #[serde(default)]
    pub hardness_anchor: HardnessAnchor,
    pub seed: u64,
}

const TAG_ATTR: u64 = 1;
const TAG_MAP: u64 = 2;
const TAG_JITTER: u64 = 3;
const TAG_HARD: u64 = 4;
const TAG_SAMPLES: u64 = 5;
const TAG_SHUFFLE: u64 = 6;

/// Largest-remainder allocation of `total` samples proportional to `weights`.
fn allocate(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total - assigned) {
        counts[i] += 1;
    }
    counts
}

/// Per-class counts under a Zipf law `w_k ∝ k^{-exponent}` (k = 1..classes).
pub fn zipf_counts(exponent: f64, total: usize, classes: usize) -> Vec<usize> {
    let w: Vec<f64> = (1..=classes).map(|k| (k as f64).powf(-exponent)).collect();
    allocate(&w, total)
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_seen == 0 || self.n_unseen == 0 {
            return bad("class counts must be positive".into());
        }
        if self.feature_dim == 0 || self.attribute_dim == 0 {
            return bad("dimensions must be positive".into());
        }
        if self.train_per_class == 0 {
            return bad("train_per_class must be positive".into());
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return bad(format!("noise must be >= 0, got {}", self.noise));
        }
        if !(self.separation > 0.0) {
            return bad("separation must be > 0".into());
        }
        if self.prototype_jitter < 0.0 {
            return bad("prototype_jitter must be >= 0".into());
        }
        if !(0.0..=1.0).contains(&self.hardness_strength) {
            return bad("hardness_strength must be in [0, 1]".into());
        }
        match &self.unseen {
            Imbalance::Uniform { per_class } if *per_class == 0 => return bad("per_class must be positive".into()),
            Imbalance::Zipf { exponent, .. } if !(*exponent >= 0.0) => return bad("zipf exponent must be >= 0".into()),
            Imbalance::Proportions { weights, .. } => {
                if weights.len() != self.n_unseen {
                    return bad(format!("{} proportions for {} unseen classes", weights.len(), self.n_unseen));
                }
                if weights.iter().any(|w| !(*w > 0.0)) {
                    return bad("proportions must be positive".into());
                }
                if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return bad("proportions must sum to 1".into());
                }
            }
            _ => {}
        }
        if self.unseen_counts().contains(&0) {
            return bad("imbalance law leaves an unseen class with zero samples".into());
        }
        match &self.hardness {
            HardClasses::Fraction { fraction } if !(0.0..=1.0).contains(fraction) => {
                return bad("hard fraction must be in [0, 1]".into())
            }
            HardClasses::Explicit { positions } if positions.iter().any(|&p| p >= self.n_unseen) => {
                return bad("hard class position out of range".into())
            }
            _ => {}
        }
        if let AttributeScheme::Binary { density } = self.attributes {
            if !(density > 0.0 && density <= 1.0) {
                return bad("binary attribute density must be in (0, 1]".into());
            }
        }
        Ok(())
    }

    /// Per-unseen-class pool sizes implied by the imbalance law.
    pub fn unseen_counts(&self) -> Vec<usize> {
        match &self.unseen {
            Imbalance::Uniform { per_class } => vec![*per_class; self.n_unseen],
            Imbalance::Zipf { exponent, total } => zipf_counts(*exponent, *total, self.n_unseen),
            Imbalance::Proportions { weights, total } => allocate(weights, *total),
        }
    }

    /// Positions (within the unseen list) of the classes given a hardness offset.
    pub fn hard_positions(&self) -> Vec<usize> {
        match &self.hardness {
            HardClasses::None => Vec::new(),
            HardClasses::Explicit { positions } => {
                let mut p = positions.clone();
                p.sort_unstable();
                p.dedup();
                p
            }
            HardClasses::Fraction { fraction } => {
                let k = (fraction * self.n_unseen as f64).round() as usize;
                let mut idx: Vec<usize> = (0..self.n_unseen).collect();
                idx.shuffle(&mut stream(self.seed, TAG_HARD));
                let mut p = idx[..k.min(self.n_unseen)].to_vec();
                p.sort_unstable();
                p
            }
        }
    }
}

fn normal_vec(rng: &mut Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * scale
        })
        .collect()
}

fn draw_samples(rng: &mut Rng, proto: &[f64], noise: f64, n: usize, out: &mut Matrix) {
    for _ in 0..n {
        let row: Vec<f64> = proto
            .iter()
            .map(|&m| {
                let z: f64 = StandardNormal.sample(rng);
                // stored at f32 precision so the binary format round-trips exactly
                (m + noise * z) as f32 as f64
            })
            .collect();
        out.push_row(&row);
    }
}

/// Generates a dataset as a pure function of `cfg`.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<ZslDataset> {
    cfg.validate()?;
    let n_classes = cfg.n_seen + cfg.n_unseen;
    let (v, s) = (cfg.feature_dim, cfg.attribute_dim);

    let mut rng = stream(cfg.seed, TAG_ATTR);
    let mut attr_rows = Vec::with_capacity(n_classes);
    for _ in 0..n_classes {
        let row = loop {
            let row: Vec<f64> = match cfg.attributes {
                AttributeScheme::Gaussian => normal_vec(&mut rng, s, 1.0),
                AttributeScheme::Binary { density } => {
                    (0..s).map(|_| if rng.random::<f64>() < density { 1.0 } else { 0.0 }).collect()
                }
            };
            if row.iter().any(|&x| x != 0.0) {
                break row;
            }
        };
        attr_rows.push(row);
    }
    let attributes = AttributeMatrix::new(Matrix::from_rows(&attr_rows)?)?;

    let mut rng = stream(cfg.seed, TAG_MAP);
    let w_scale = cfg.separation / (s as f64).sqrt();
    let w: Vec<Vec<f64>> = (0..v).map(|_| normal_vec(&mut rng, s, w_scale)).collect();
    let mut protos: Vec<Vec<f64>> = attr_rows
        .iter()
        .map(|e| w.iter().map(|wr| crate::matrix::dot(wr, e)).collect())
        .collect();

    if cfg.prototype_jitter > 0.0 {
        let mut rng = stream(cfg.seed, TAG_JITTER);
        for p in protos.iter_mut() {
            let off = normal_vec(&mut rng, v, cfg.prototype_jitter * cfg.separation);
            p.iter_mut().zip(off).for_each(|(a, b)| *a += b);
        }
    }

    let mut rng = stream(cfg.seed, TAG_HARD ^ 0xA5);
    let hard = cfg.hard_positions();
    let easy: Vec<usize> = (0..cfg.n_unseen).filter(|p| !hard.contains(p)).map(|p| cfg.n_seen + p).collect();
    for &pos in &hard {
        let class = cfg.n_seen + pos;
        let anchor = match cfg.hardness_anchor {
            HardnessAnchor::Unseen if !easy.is_empty() => easy[rng.random_range(0..easy.len())],
            _ => rng.random_range(0..cfg.n_seen),
        };
        let target = protos[anchor].clone();
        for (m, t) in protos[class].iter_mut().zip(target) {
            *m += cfg.hardness_strength * (t - *m);
        }
    }

    let mut rng = stream(cfg.seed, TAG_SAMPLES);
    let mut train = Matrix::empty(v);
    let mut train_labels = Vec::new();
    for c in 0..cfg.n_seen {
        draw_samples(&mut rng, &protos[c], cfg.noise, cfg.train_per_class, &mut train);
        train_labels.extend(std::iter::repeat_n(ClassId(c), cfg.train_per_class));
    }
    let mut pool = Matrix::empty(v);
    let mut pool_labels = Vec::new();
    for (k, &n) in cfg.unseen_counts().iter().enumerate() {
        let c = cfg.n_seen + k;
        draw_samples(&mut rng, &protos[c], cfg.noise, n, &mut pool);
        pool_labels.extend(std::iter::repeat_n(ClassId(c), n));
    }
    let mut seen_pool = Matrix::empty(v);
    let mut seen_pool_labels = Vec::new();
    if cfg.test_seen_per_class > 0 {
        for c in 0..cfg.n_seen {
            draw_samples(&mut rng, &protos[c], cfg.noise, cfg.test_seen_per_class, &mut seen_pool);
            seen_pool_labels.extend(std::iter::repeat_n(ClassId(c), cfg.test_seen_per_class));
        }
    }

    let mut rng = stream(cfg.seed, TAG_SHUFFLE);
    let shuffled = |rng: &mut Rng, m: Matrix, l: Vec<ClassId>| -> Result<SampleSet> {
        let mut order: Vec<usize> = (0..l.len()).collect();
        order.shuffle(rng);
        let labels = order.iter().map(|&i| l[i]).collect();
        SampleSet::labeled(m.select_rows(&order), labels)
    };
    let test_unseen = shuffled(&mut rng, pool, pool_labels)?;
    let test_seen = if cfg.test_seen_per_class > 0 {
        Some(shuffled(&mut rng, seen_pool, seen_pool_labels)?)
    } else {
        None
    };

    let split = ClassSplit::new(
        (0..cfg.n_seen).map(ClassId).collect(),
        (cfg.n_seen..n_classes).map(ClassId).collect(),
    )?;
    let class_names = (0..n_classes)
        .map(|c| if c < cfg.n_seen { format!("seen_{c}") } else { format!("unseen_{c}") })
        .collect();
    let meta = DatasetMeta {
        name: cfg.name.clone(),
        feature_dim: v,
        attribute_dim: s,
        class_names,
    };
    ZslDataset::new(
        meta,
        split,
        attributes,
        SampleSet::labeled(train, train_labels)?,
        test_unseen,
        test_seen,
    )
}

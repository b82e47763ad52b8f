//! Class-frequency hardness and hard-class sampling.
//!
//! A class is treated as hard when the current model rarely predicts it. The
//! frequency histogram over the candidate classes (optionally divided by a
//! class prior) is sorted ascending, the first `K` classes are the hard set,
//! and pseudo-labeled samples are drawn with replacement from pool members
//! predicted as those classes.
//!
//! Indices passed to [`class_frequency`] and [`hardness_order`] are positions
//! `0..C` in a candidate list; [`select_subset`] maps [`ClassId`]s onto those
//! positions.

use std::collections::BTreeMap;

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::ClassId;
use crate::error::{Error, Result};
use crate::rng::stream;

/// Floor applied to prior entries when the prior did not come from the
/// consistency estimator.
pub const DEFAULT_PRIOR_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassFrequency {
    pub counts: Vec<usize>,
    pub f: Vec<f64>,
}

pub fn class_frequency(predictions: &[usize], n_classes: usize) -> Result<ClassFrequency> {
    if n_classes == 0 {
        return Err(Error::param("n_classes", "must be >= 1"));
    }
    if predictions.is_empty() {
        return Err(Error::EmptyInput("prediction vector"));
    }
    let mut counts = vec![0usize; n_classes];
    for (row, &p) in predictions.iter().enumerate() {
        if p >= n_classes {
            return Err(Error::LabelOutOfRange {
                context: "predictions".into(),
                row,
                label: p as i64,
            });
        }
        counts[p] += 1;
    }
    let n = predictions.len() as f64;
    let f = counts.iter().map(|&c| c as f64 / n).collect();
    Ok(ClassFrequency { counts, f })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardnessRanking {
    /// Positions sorted hardest first.
    pub order: Vec<usize>,
    /// Metric value per position (not reordered).
    pub metric: Vec<f64>,
}

impl HardnessRanking {
    pub fn top(&self, k: usize) -> &[usize] {
        &self.order[..k.min(self.order.len())]
    }
}

/// Stable ascending argsort; equal values keep the smaller position first.
pub fn hardness_order(metric: &[f64]) -> Result<HardnessRanking> {
    if metric.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("hardness metric"));
    }
    let mut order: Vec<usize> = (0..metric.len()).collect();
    order.sort_by(|&a, &b| metric[a].total_cmp(&metric[b]).then(a.cmp(&b)));
    Ok(HardnessRanking {
        order,
        metric: metric.to_vec(),
    })
}

/// Class prior over the candidate classes plus the floor used when dividing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPrior {
    pub p: Vec<f64>,
    pub epsilon: f64,
}

impl ClassPrior {
    pub fn new(p: Vec<f64>, epsilon: f64) -> Result<Self> {
        if p.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::param("prior", "entries must be finite and >= 0"));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-6 {
            return Err(Error::param("prior", format!("must sum to 1, sums to {s}")));
        }
        if !(epsilon > 0.0) {
            return Err(Error::param("epsilon", "must be > 0"));
        }
        Ok(Self { p, epsilon })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            p: vec![1.0 / n as f64; n],
            epsilon: DEFAULT_PRIOR_FLOOR,
        }
    }
}

pub fn prior_normalize(f: &ClassFrequency, p: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    if p.len() != f.f.len() {
        return Err(Error::LengthMismatch {
            left: f.f.len(),
            right: p.len(),
        });
    }
    if p.iter().any(|&v| v < 0.0) {
        return Err(Error::param("prior", "entries must be >= 0"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::param("epsilon", "must be > 0"));
    }
    Ok(f.f.iter().zip(p).map(|(fc, pc)| fc / pc.max(epsilon)).collect())
}

/// `floor(M/T)·t`.
pub fn schedule_budget(pool: usize, steps: usize, t: usize) -> Result<usize> {
    if steps == 0 || steps > pool {
        return Err(Error::param("steps", format!("need 1 <= T <= M, got T={steps}, M={pool}")));
    }
    if t == 0 || t > steps {
        return Err(Error::param("t", format!("need 1 <= t <= T, got t={t}, T={steps}")));
    }
    Ok(pool / steps * t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Rs,
    Cfbs,
    PnCfbs,
}

impl PolicyKind {
    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::Rs => "RS",
            PolicyKind::Cfbs => "CFBS",
            PolicyKind::PnCfbs => "PN-CFBS",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPolicy {
    pub kind: PolicyKind,
    /// Number of hard classes; ignored by RS.
    pub k: usize,
    pub seed: u64,
}

impl SamplingPolicy {
    pub fn validate(&self, n_classes: usize) -> Result<()> {
        if self.kind != PolicyKind::Rs && (self.k == 0 || self.k > n_classes) {
            return Err(Error::param("k", format!("need 1 <= K <= C = {n_classes}, got {}", self.k)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardnessReport {
    pub classes: Vec<ClassId>,
    pub counts: Vec<usize>,
    pub frequency: Vec<f64>,
    pub normalized: Option<Vec<f64>>,
    /// Candidate classes hardest first.
    pub ranking: Vec<ClassId>,
    pub hard: Vec<ClassId>,
    /// Quota per hard class after forfeits, aligned with `hard`.
    pub quotas: Vec<usize>,
    /// Hard classes with no predicted pool members.
    pub forfeited: Vec<ClassId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabeledSet {
    pub iteration: usize,
    pub policy: SamplingPolicy,
    /// Pool row for each drawn sample; repeats are allowed.
    pub indices: Vec<usize>,
    pub labels: Vec<ClassId>,
    pub per_class: BTreeMap<ClassId, usize>,
}

impl PseudoLabeledSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    fn from_draws(iteration: usize, policy: SamplingPolicy, indices: Vec<usize>, predictions: &[ClassId]) -> Self {
        let labels: Vec<ClassId> = indices.iter().map(|&i| predictions[i]).collect();
        let mut per_class = BTreeMap::new();
        for &l in &labels {
            *per_class.entry(l).or_insert(0) += 1;
        }
        Self {
            iteration,
            policy,
            indices,
            labels,
            per_class,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Selection {
    Selected {
        set: PseudoLabeledSet,
        report: Option<HardnessReport>,
    },
    /// No pool member is predicted as any hard class.
    Empty { report: HardnessReport },
}

/// Quotas for `k` hard classes: `floor(budget/k)` each plus one extra for the
/// first `budget mod k`.
pub fn base_quotas(budget: usize, k: usize) -> Vec<usize> {
    let n = budget / k;
    (0..k).map(|i| n + usize::from(i < budget % k)).collect()
}

/// Moves the quota of every memberless class to the next class in order
/// (wrapping) that has members. Returns `None` if no class has members.
pub fn redistribute(quotas: &[usize], has_members: &[bool]) -> Option<Vec<usize>> {
    let k = quotas.len();
    if !has_members.iter().any(|&m| m) {
        return None;
    }
    let mut out: Vec<usize> = quotas.iter().zip(has_members).map(|(&q, &m)| if m { q } else { 0 }).collect();
    for i in (0..k).filter(|&i| !has_members[i]) {
        let j = (1..k).map(|s| (i + s) % k).find(|&j| has_members[j]).unwrap();
        out[j] += quotas[i];
    }
    Some(out)
}

/// Draws `budget` pseudo-labeled pool rows.
///
/// `predictions[i]` is the model's label for pool row `i` and must be one of
/// `classes`. The random stream is derived from `policy.seed` and
/// `iteration`, so identical inputs give identical output.
pub fn select_subset(
    predictions: &[ClassId],
    classes: &[ClassId],
    policy: &SamplingPolicy,
    prior: Option<&ClassPrior>,
    budget: usize,
    iteration: usize,
) -> Result<Selection> {
    if budget == 0 {
        return Err(Error::param("budget", "must be >= 1"));
    }
    if classes.is_empty() {
        return Err(Error::EmptyInput("candidate classes"));
    }
    if predictions.is_empty() {
        return Err(Error::EmptyInput("pool predictions"));
    }
    policy.validate(classes.len())?;
    let mut rng = stream(policy.seed, iteration as u64);

    if policy.kind == PolicyKind::Rs {
        let m = predictions.len();
        let indices = if budget <= m {
            let mut idx = sample_indices(&mut rng, m, budget).into_vec();
            idx.sort_unstable();
            idx
        } else {
            (0..budget).map(|_| rng.random_range(0..m)).collect()
        };
        let set = PseudoLabeledSet::from_draws(iteration, policy.clone(), indices, predictions);
        return Ok(Selection::Selected { set, report: None });
    }

    let position: BTreeMap<ClassId, usize> = classes.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let positions = predictions
        .iter()
        .enumerate()
        .map(|(row, c)| {
            position.get(c).copied().ok_or(Error::LabelOutOfRange {
                context: "predictions outside candidate classes".into(),
                row,
                label: c.0 as i64,
            })
        })
        .collect::<Result<Vec<usize>>>()?;
    let freq = class_frequency(&positions, classes.len())?;
    let normalized = match policy.kind {
        PolicyKind::PnCfbs => {
            let prior = prior.ok_or_else(|| Error::param("prior", "PN-CFBS needs a class prior"))?;
            Some(prior_normalize(&freq, &prior.p, prior.epsilon)?)
        }
        _ => None,
    };
    let ranking = hardness_order(normalized.as_deref().unwrap_or(&freq.f))?;
    let hard_pos = ranking.top(policy.k);
    let has_members: Vec<bool> = hard_pos.iter().map(|&p| freq.counts[p] > 0).collect();
    let base = base_quotas(budget, policy.k);
    let mut report = HardnessReport {
        classes: classes.to_vec(),
        counts: freq.counts.clone(),
        frequency: freq.f.clone(),
        normalized,
        ranking: ranking.order.iter().map(|&p| classes[p]).collect(),
        hard: hard_pos.iter().map(|&p| classes[p]).collect(),
        quotas: base.clone(),
        forfeited: hard_pos.iter().zip(&has_members).filter(|(_, &m)| !m).map(|(&p, _)| classes[p]).collect(),
    };
    let Some(quotas) = redistribute(&base, &has_members) else {
        report.quotas = vec![0; policy.k];
        return Ok(Selection::Empty { report });
    };
    report.quotas = quotas.clone();

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes.len()];
    for (row, &p) in positions.iter().enumerate() {
        members[p].push(row);
    }
    let mut indices = Vec::with_capacity(budget);
    for (&p, &q) in hard_pos.iter().zip(&quotas) {
        let m = &members[p];
        for _ in 0..q {
            indices.push(m[rng.random_range(0..m.len())]);
        }
    }
    let set = PseudoLabeledSet::from_draws(iteration, policy.clone(), indices, predictions);
    Ok(Selection::Selected {
        set,
        report: Some(report),
    })
}

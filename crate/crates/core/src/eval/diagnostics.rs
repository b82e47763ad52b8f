//! Controlled experiments on the unseen pool using true labels.
//!
//! Each experiment starts from the inductive model (seen data only), ranks
//! the unseen classes by its per-class accuracy, and measures what happens
//! when true-labeled pool samples from different class groups are added.

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::metrics::{confusion, group_precision};
use super::Oracle;
use crate::dataset::{ClassId, ZslDataset};
use crate::error::{Error, Result};
use crate::hardness::base_quotas;
use crate::models::{BaseModel, FittedModel, ModelSpec, Origin, TrainingSet};
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticConfig {
    pub model: ModelSpec,
    /// Classes per easy/hard group; `None` uses `min(6, floor(C/2))`.
    pub group_size: Option<usize>,
    /// True-labeled samples added per experiment; `None` uses 10% of the pool.
    pub budget: Option<usize>,
    pub top_counts: Vec<usize>,
    pub seed: u64,
}

impl Default for DiagnosticConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::default(),
            group_size: None,
            budget: None,
            top_counts: vec![1, 2, 4],
            seed: 0,
        }
    }
}

impl DiagnosticConfig {
    pub fn group_size(&self, n_unseen: usize) -> usize {
        self.group_size.unwrap_or(6.min(n_unseen / 2)).min(n_unseen)
    }

    pub fn budget(&self, pool: usize) -> usize {
        self.budget.unwrap_or(pool / 10)
    }
}

fn model_seed(seed: u64) -> u64 {
    derive_seed(seed, 0xD1A6)
}

/// Fits on the labeled seen data alone.
pub fn fit_inductive(ds: &ZslDataset, spec: &ModelSpec, seed: u64) -> Result<FittedModel> {
    spec.fit(&TrainingSet::from_seen(&ds.train_seen)?, &ds.attributes, model_seed(seed))
}

/// Unseen classes with per-class accuracy, in split order.
fn unseen_accuracy(oracle: &Oracle, model: &dyn BaseModel) -> Result<(Vec<ClassId>, Vec<f64>, f64)> {
    let ds = oracle.dataset();
    let pred = model.predict(&ds.test_unseen.features, &ds.split.unseen)?;
    let s = oracle.unseen_snapshot(&pred)?;
    let acc = s.per_class_accuracy.iter().map(|a| a.unwrap_or(0.0)).collect();
    Ok((s.classes, acc, s.acc))
}

/// Classes sorted by accuracy ascending, ties to the smaller id.
fn by_accuracy(classes: &[ClassId], acc: &[f64]) -> Vec<ClassId> {
    let mut idx: Vec<usize> = (0..classes.len()).collect();
    idx.sort_by(|&a, &b| acc[a].total_cmp(&acc[b]).then(classes[a].cmp(&classes[b])));
    idx.into_iter().map(|i| classes[i]).collect()
}

/// `(easy, hard)`: the `g` most and least accurate classes, each ordered from
/// the extreme inward with ties going to the smaller id.
pub fn easy_hard_groups(classes: &[ClassId], acc: &[f64], g: usize) -> (Vec<ClassId>, Vec<ClassId>) {
    let hard = by_accuracy(classes, acc).into_iter().take(g).collect();
    let mut idx: Vec<usize> = (0..classes.len()).collect();
    idx.sort_by(|&a, &b| acc[b].total_cmp(&acc[a]).then(classes[a].cmp(&classes[b])));
    let easy = idx.into_iter().take(g).map(|i| classes[i]).collect();
    (easy, hard)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnevenReport {
    pub classes: Vec<ClassId>,
    pub per_class_accuracy: Vec<f64>,
    pub acc: f64,
    /// Max minus min per-class accuracy.
    pub spread: f64,
    /// Split at the median: the lower half is hard.
    pub easy: Vec<ClassId>,
    pub hard: Vec<ClassId>,
}

pub fn diag_uneven_prediction(oracle: &Oracle, model: &dyn BaseModel) -> Result<UnevenReport> {
    let (classes, acc, mean) = unseen_accuracy(oracle, model)?;
    let max = acc.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = acc.iter().cloned().fold(f64::INFINITY, f64::min);
    let order = by_accuracy(&classes, &acc);
    let half = classes.len() / 2;
    Ok(UnevenReport {
        spread: max - min,
        hard: order[..half].to_vec(),
        easy: order[half..].to_vec(),
        classes,
        per_class_accuracy: acc,
        acc: mean,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrainMode {
    Easy,
    Hard,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainResult {
    pub mode: RetrainMode,
    pub group: Vec<ClassId>,
    pub budget: usize,
    pub acc: f64,
    pub baseline_acc: f64,
    /// The group had fewer samples than the budget.
    pub with_replacement: bool,
}

/// Draws `n` pool rows from `rows`; without replacement when possible.
fn draw(rows: &[usize], n: usize, rng: &mut crate::rng::Rng) -> (Vec<usize>, bool) {
    if n == 0 || rows.is_empty() {
        return (vec![], false);
    }
    if n <= rows.len() {
        let mut idx: Vec<usize> = sample_indices(rng, rows.len(), n).into_iter().map(|i| rows[i]).collect();
        idx.sort_unstable();
        (idx, false)
    } else {
        ((0..n).map(|_| rows[rng.random_range(0..rows.len())]).collect(), true)
    }
}

fn refit_with(oracle: &Oracle, spec: &ModelSpec, rows: &[usize], seed: u64) -> Result<f64> {
    let ds = oracle.dataset();
    let mut ts = TrainingSet::from_seen(&ds.train_seen)?;
    if !rows.is_empty() {
        let labels: Vec<ClassId> = rows.iter().map(|&i| oracle.unseen_labels()[i]).collect();
        ts.extend_unseen(&ds.test_unseen.features.select_rows(rows), &labels, Origin::UnseenTruth, &ds.split)?;
    }
    let model = spec.fit(&ts, &ds.attributes, model_seed(seed))?;
    Ok(unseen_accuracy(oracle, &model)?.2)
}

fn members(oracle: &Oracle, group: &[ClassId]) -> Vec<usize> {
    (0..oracle.unseen_labels().len()).filter(|&i| group.contains(&oracle.unseen_labels()[i])).collect()
}

/// Adds `budget` true-labeled pool samples from the chosen group, refits and
/// returns the pool ACC.
pub fn diag_retrain_contrast(oracle: &Oracle, cfg: &DiagnosticConfig, mode: RetrainMode, budget: usize) -> Result<RetrainResult> {
    let ds = oracle.dataset();
    let base = fit_inductive(ds, &cfg.model, cfg.seed)?;
    let (classes, acc, baseline_acc) = unseen_accuracy(oracle, &base)?;
    let (easy, hard) = easy_hard_groups(&classes, &acc, cfg.group_size(classes.len()));
    let group = match mode {
        RetrainMode::Easy => easy,
        RetrainMode::Hard => hard,
        RetrainMode::All => classes.clone(),
    };
    let mut rng = stream(cfg.seed, 0xB0B);
    let (rows, with_replacement) = draw(&members(oracle, &group), budget, &mut rng);
    Ok(RetrainResult {
        acc: refit_with(oracle, &cfg.model, &rows, cfg.seed)?,
        mode,
        group,
        budget,
        baseline_acc,
        with_replacement,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionContrast {
    pub easy_classes: Vec<ClassId>,
    pub hard_classes: Vec<ClassId>,
    /// `None` when every class of the group is never predicted.
    pub easy: Option<f64>,
    pub hard: Option<f64>,
    pub all: Option<f64>,
}

/// Group precisions of the inductive model's pool predictions.
pub fn diag_precision_contrast(oracle: &Oracle, model: &dyn BaseModel, group_size: Option<usize>) -> Result<PrecisionContrast> {
    let ds = oracle.dataset();
    let pred = model.predict(&ds.test_unseen.features, &ds.split.unseen)?;
    let cm = confusion(oracle.unseen_labels(), &pred, ds.n_classes())?;
    let (classes, acc, _) = unseen_accuracy(oracle, model)?;
    let g = group_size.unwrap_or(6.min(classes.len() / 2)).min(classes.len());
    let (easy_classes, hard_classes) = easy_hard_groups(&classes, &acc, g);
    Ok(PrecisionContrast {
        easy: group_precision(&cm, &easy_classes),
        hard: group_precision(&cm, &hard_classes),
        all: group_precision(&cm, &classes),
        easy_classes,
        hard_classes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityPoint {
    pub top: usize,
    pub classes: Vec<ClassId>,
    pub acc: f64,
    pub with_replacement: bool,
}

/// For each entry of `top_counts`, spreads the same budget over that many of
/// the hardest classes, refits and reports ACC.
pub fn diag_diversity(oracle: &Oracle, cfg: &DiagnosticConfig, budget: usize) -> Result<Vec<DiversityPoint>> {
    let ds = oracle.dataset();
    let base = fit_inductive(ds, &cfg.model, cfg.seed)?;
    let (classes, acc, _) = unseen_accuracy(oracle, &base)?;
    let order = by_accuracy(&classes, &acc);
    let mut out = Vec::new();
    for &top in &cfg.top_counts {
        if top == 0 || top > classes.len() {
            return Err(Error::param("top_counts", format!("{top} not in 1..={}", classes.len())));
        }
        let chosen = order[..top].to_vec();
        let mut rng = stream(cfg.seed, 0xD17 + top as u64);
        let mut rows = Vec::new();
        let mut with_replacement = false;
        for (c, q) in chosen.iter().zip(base_quotas(budget, top)) {
            let (r, w) = draw(&members(oracle, &[*c]), q, &mut rng);
            rows.extend(r);
            with_replacement |= w;
        }
        out.push(DiversityPoint {
            acc: refit_with(oracle, &cfg.model, &rows, cfg.seed)?,
            top,
            classes: chosen,
            with_replacement,
        });
    }
    Ok(out)
}

/// Fraction of the true hardest classes (lowest accuracy, ties to the smaller
/// id) found among the first classes of `ranking`. Both sets have
/// `max(1, floor(fraction · C))` members.
pub fn hard_class_identification_ratio(ranking: &[ClassId], accuracy: &[(ClassId, f64)], fraction: f64) -> Result<f64> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::param("fraction", "must be in (0, 1]"));
    }
    if ranking.len() != accuracy.len() || ranking.is_empty() {
        return Err(Error::LengthMismatch {
            left: ranking.len(),
            right: accuracy.len(),
        });
    }
    let n = ((fraction * ranking.len() as f64 + 1e-9).floor() as usize).max(1);
    let classes: Vec<ClassId> = accuracy.iter().map(|a| a.0).collect();
    let acc: Vec<f64> = accuracy.iter().map(|a| a.1).collect();
    let truth = &by_accuracy(&classes, &acc)[..n];
    let hits = ranking[..n].iter().filter(|c| truth.contains(c)).count();
    Ok(hits as f64 / n as f64)
}

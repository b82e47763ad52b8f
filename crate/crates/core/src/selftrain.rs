//! The iterative self-training driver.
//!
//! Step 0 fits a model on the labeled seen classes, predicts the unlabeled
//! pool and selects the first pseudo-labeled subset. Each step `t = 1..T`
//! refits from scratch on the seen data plus the subset selected for it,
//! predicts the whole pool again and, if `t < T`, reselects with the budget
//! for `t + 1`. Nothing here reads hidden pool labels; metrics are attached to
//! a finished trace by [`crate::eval::annotate_trace`].

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassId, ZslDataset};
use crate::error::{Error, Result};
use crate::eval::MetricsSnapshot;
use crate::hardness::{
    schedule_budget, select_subset, ClassPrior, HardnessReport, PolicyKind, PseudoLabeledSet, SamplingPolicy, Selection,
    DEFAULT_PRIOR_FLOOR,
};
use crate::matrix::Matrix;
use crate::models::{save_checkpoint, BaseModel, FittedModel, ModelSpec, Origin, TrainingSet};
use crate::prior::{estimate_prior_3c, EstimatedPrior, ThreeCConfig};
use crate::rng::{derive_seed, stream};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// Where PN-CFBS gets its class prior.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum PriorSource {
    #[default]
    None,
    /// A prior supplied by the caller, one entry per unseen class in split
    /// order.
    Known { p: Vec<f64> },
    /// Re-estimated from the current predictions at every step.
    ThreeC(ThreeCConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SthsConfig {
    pub steps: usize,
    pub policy: PolicyKind,
    pub k: usize,
    pub model: ModelSpec,
    #[serde(default)]
    pub prior: PriorSource,
    pub seed: u64,
    /// Keep every fitted model in the outcome (for checkpointing).
    #[serde(default)]
    pub keep_models: bool,
}

impl SthsConfig {
    pub fn validate(&self, n_candidates: usize) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::param("steps", "must be >= 1"));
        }
        SamplingPolicy {
            kind: self.policy,
            k: self.k,
            seed: self.seed,
        }
        .validate(n_candidates)?;
        self.model.validate()?;
        match (&self.policy, &self.prior) {
            (PolicyKind::PnCfbs, PriorSource::None) => Err(Error::param("prior", "PN-CFBS needs a prior source")),
            (_, PriorSource::Known { p }) if p.len() != n_candidates => Err(Error::param(
                "prior",
                format!("known prior has {} entries, expected {n_candidates}", p.len()),
            )),
            (_, PriorSource::ThreeC(c)) => c.validate(),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Conventional,
    GzslStrict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// Hard-class selection was empty; random sampling over the pool instead.
    RandomSampling,
    /// Strict setting: nothing predicted as unseen, step trains on seen data
    /// only.
    SeenOnly,
}

/// A row of the pool in the strict setting, kept so evaluation can split the
/// final predictions; training never reads it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolRef {
    pub unseen_side: bool,
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorRecord {
    pub source: String,
    pub p: Vec<f64>,
    pub epsilon: f64,
    pub estimate: Option<EstimatedPrior>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub seen_rows: usize,
    pub pseudo_rows: usize,
    pub pseudo_per_class: BTreeMap<ClassId, usize>,
    /// Model predictions over the pool after this step's fit.
    pub predictions: Vec<ClassId>,
    /// Selection made from these predictions for step `t + 1`.
    pub next_budget: Option<usize>,
    pub prior: Option<PriorRecord>,
    pub hardness: Option<HardnessReport>,
    pub selection: Option<PseudoLabeledSet>,
    pub fallback: Option<Fallback>,
    /// Strict setting: unseen classes that received any prediction.
    pub unseen_predicted: Option<usize>,
    pub flags: Vec<String>,
    pub metrics: Option<MetricsSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub schema_version: u32,
    pub setting: Setting,
    pub config: SthsConfig,
    pub candidates: Vec<ClassId>,
    pub pool_size: usize,
    /// Strict setting only: the shuffled composition of the mixed pool.
    pub pool_order: Option<Vec<PoolRef>>,
    /// Step 0: the seen-only model.
    pub initial: StepRecord,
    /// Exactly `T` records for steps `1..=T`.
    pub iterations: Vec<StepRecord>,
    pub final_predictions: Vec<ClassId>,
}

impl RunTrace {
    pub fn fallback_count(&self) -> usize {
        std::iter::once(&self.initial).chain(&self.iterations).filter(|r| r.fallback.is_some()).count()
    }
}

#[derive(Debug, Clone)]
pub struct SthsOutcome {
    pub trace: RunTrace,
    pub final_model: FittedModel,
    /// Fitted model per step, step 0 first, when `keep_models` is set.
    pub models: Vec<FittedModel>,
    /// Wall-clock seconds per step, kept apart from the trace so traces stay
    /// reproducible.
    pub step_seconds: Vec<f64>,
}

struct StepSelection {
    set: Option<PseudoLabeledSet>,
    hardness: Option<HardnessReport>,
    prior: Option<PriorRecord>,
    fallback: Option<Fallback>,
    unseen_predicted: Option<usize>,
    flags: Vec<String>,
}

fn positions(preds: &[ClassId], classes: &[ClassId]) -> Vec<usize> {
    let pos: BTreeMap<ClassId, usize> = classes.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    preds.iter().map(|c| pos[c]).collect()
}

fn resolve_prior(cfg: &SthsConfig, feats: &Matrix, preds: &[ClassId], classes: &[ClassId], t: usize) -> Result<Option<PriorRecord>> {
    if cfg.policy != PolicyKind::PnCfbs {
        return Ok(None);
    }
    Ok(match &cfg.prior {
        PriorSource::None => None,
        PriorSource::Known { p } => Some(PriorRecord {
            source: "known".into(),
            p: p.clone(),
            epsilon: DEFAULT_PRIOR_FLOOR,
            estimate: None,
        }),
        PriorSource::ThreeC(c) => {
            let c = ThreeCConfig {
                seed: derive_seed(c.seed ^ cfg.seed, 0x3C00 + t as u64),
                ..c.clone()
            };
            let out = estimate_prior_3c(feats, &positions(preds, classes), classes.len(), &c)?;
            Some(PriorRecord {
                source: "3c".into(),
                p: out.prior.p.clone(),
                epsilon: out.prior.epsilon(),
                estimate: Some(out.prior),
            })
        }
    })
}

/// Selects from the pool rows listed in `members`, whose predictions must
/// lie in `classes`, with RS fallback on an empty hard-class selection.
#[allow(clippy::too_many_arguments)]
fn select_step(
    cfg: &SthsConfig,
    pool: &Matrix,
    preds: &[ClassId],
    members: &[usize],
    classes: &[ClassId],
    budget: usize,
    t_next: usize,
) -> Result<StepSelection> {
    let sub_preds: Vec<ClassId> = members.iter().map(|&i| preds[i]).collect();
    let sub_feats = pool.select_rows(members);
    let prior = resolve_prior(cfg, &sub_feats, &sub_preds, classes, t_next)?;
    let policy = SamplingPolicy {
        kind: cfg.policy,
        k: cfg.k,
        seed: derive_seed(cfg.seed, 0x5E1),
    };
    let class_prior = prior.as_ref().map(|p| ClassPrior {
        p: p.p.clone(),
        epsilon: p.epsilon,
    });
    let remap = |mut set: PseudoLabeledSet| {
        set.indices.iter_mut().for_each(|i| *i = members[*i]);
        set
    };
    match select_subset(&sub_preds, classes, &policy, class_prior.as_ref(), budget, t_next)? {
        Selection::Selected { set, report } => Ok(StepSelection {
            set: Some(remap(set)),
            hardness: report,
            prior,
            fallback: None,
            unseen_predicted: None,
            flags: vec![],
        }),
        Selection::Empty { report } => {
            warn!("step {t_next}: no pool member predicted as a hard class; falling back to random sampling");
            let rs = SamplingPolicy {
                kind: PolicyKind::Rs,
                ..policy
            };
            let Selection::Selected { set, .. } = select_subset(&sub_preds, classes, &rs, None, budget, t_next)? else {
                unreachable!("random sampling never returns an empty selection")
            };
            Ok(StepSelection {
                set: Some(remap(set)),
                hardness: Some(report),
                prior,
                fallback: Some(Fallback::RandomSampling),
                unseen_predicted: None,
                flags: vec!["empty hard-class selection".into()],
            })
        }
    }
}

fn training_set(ds: &ZslDataset, pool: &Matrix, set: Option<&PseudoLabeledSet>) -> Result<TrainingSet> {
    let mut ts = TrainingSet::from_seen(&ds.train_seen)?;
    if let Some(set) = set {
        ts.extend_unseen(&pool.select_rows(&set.indices), &set.labels, Origin::UnseenPseudo, &ds.split)?;
    }
    Ok(ts)
}

fn per_class(set: Option<&PseudoLabeledSet>) -> BTreeMap<ClassId, usize> {
    set.map(|s| s.per_class.clone()).unwrap_or_default()
}

struct Driver<'a> {
    ds: &'a ZslDataset,
    cfg: &'a SthsConfig,
    pool: Matrix,
    candidates: Vec<ClassId>,
    strict: bool,
}

impl Driver<'_> {
    fn fit(&self, ts: &TrainingSet, t: usize) -> Result<FittedModel> {
        self.cfg
            .model
            .fit(ts, &self.ds.attributes, derive_seed(self.cfg.seed, 0xF17 + t as u64))
            .map_err(|e| Error::FitFailed {
                iteration: t,
                source: Box::new(e),
            })
    }

    fn select(&self, preds: &[ClassId], budget: usize, t_next: usize) -> Result<StepSelection> {
        let unseen = &self.ds.split.unseen;
        if !self.strict {
            let all: Vec<usize> = (0..preds.len()).collect();
            return select_step(self.cfg, &self.pool, preds, &all, unseen, budget, t_next);
        }
        let members: Vec<usize> = (0..preds.len()).filter(|&i| self.ds.split.is_unseen(preds[i])).collect();
        let mut distinct: Vec<ClassId> = members.iter().map(|&i| preds[i]).collect();
        distinct.sort_unstable();
        distinct.dedup();
        let mut flags = Vec::new();
        if distinct.len() < self.cfg.k {
            flags.push(format!("only {} unseen classes predicted, K = {}", distinct.len(), self.cfg.k));
        }
        if members.is_empty() {
            warn!("step {t_next}: no pool member predicted as unseen; training on seen data only");
            flags.push("no unseen predictions".into());
            return Ok(StepSelection {
                set: None,
                hardness: None,
                prior: None,
                fallback: Some(Fallback::SeenOnly),
                unseen_predicted: Some(0),
                flags,
            });
        }
        let mut s = select_step(self.cfg, &self.pool, preds, &members, unseen, budget, t_next)?;
        s.unseen_predicted = Some(distinct.len());
        flags.append(&mut s.flags);
        s.flags = flags;
        Ok(s)
    }

    fn run(self) -> Result<SthsOutcome> {
        let m = self.pool.rows();
        let steps = self.cfg.steps;
        let mut models = Vec::new();
        let mut seconds = Vec::new();

        let clock = Instant::now();
        let ts = training_set(self.ds, &self.pool, None)?;
        let model = self.fit(&ts, 0)?;
        let preds = model.predict(&self.pool, &self.candidates)?;
        let budget = schedule_budget(m, steps, 1)?;
        let sel = self.select(&preds, budget, 1)?;
        seconds.push(clock.elapsed().as_secs_f64());
        let mut current = sel.set.clone();
        let initial = StepRecord {
            t: 0,
            seen_rows: ts.count_origin(Origin::SeenTruth),
            pseudo_rows: 0,
            pseudo_per_class: BTreeMap::new(),
            predictions: preds,
            next_budget: Some(budget),
            prior: sel.prior,
            hardness: sel.hardness,
            selection: sel.set,
            fallback: sel.fallback,
            unseen_predicted: sel.unseen_predicted,
            flags: sel.flags,
            metrics: None,
        };
        if self.cfg.keep_models {
            models.push(model.clone());
        }

        let mut iterations = Vec::with_capacity(steps);
        let mut last = model;
        for t in 1..=steps {
            let clock = Instant::now();
            let ts = training_set(self.ds, &self.pool, current.as_ref())?;
            let model = self.fit(&ts, t)?;
            let preds = model.predict(&self.pool, &self.candidates)?;
            let mut rec = StepRecord {
                t,
                seen_rows: ts.count_origin(Origin::SeenTruth),
                pseudo_rows: ts.count_origin(Origin::UnseenPseudo),
                pseudo_per_class: per_class(current.as_ref()),
                predictions: preds,
                next_budget: None,
                prior: None,
                hardness: None,
                selection: None,
                fallback: None,
                unseen_predicted: None,
                flags: vec![],
                metrics: None,
            };
            current = None;
            if t < steps {
                let budget = schedule_budget(m, steps, t + 1)?;
                let sel = self.select(&rec.predictions, budget, t + 1)?;
                rec.next_budget = Some(budget);
                rec.prior = sel.prior;
                rec.hardness = sel.hardness;
                current = sel.set.clone();
                rec.selection = sel.set;
                rec.fallback = sel.fallback;
                rec.unseen_predicted = sel.unseen_predicted;
                rec.flags = sel.flags;
            } else if self.strict {
                rec.unseen_predicted = Some({
                    let mut d: Vec<ClassId> = rec.predictions.iter().copied().filter(|c| self.ds.split.is_unseen(*c)).collect();
                    d.sort_unstable();
                    d.dedup();
                    d.len()
                });
            }
            seconds.push(clock.elapsed().as_secs_f64());
            if self.cfg.keep_models {
                models.push(model.clone());
            }
            last = model;
            iterations.push(rec);
        }

        let final_predictions = iterations.last().map(|r| r.predictions.clone()).unwrap_or_default();
        let trace = RunTrace {
            schema_version: TRACE_SCHEMA_VERSION,
            setting: if self.strict { Setting::GzslStrict } else { Setting::Conventional },
            config: self.cfg.clone(),
            candidates: self.candidates.clone(),
            pool_size: m,
            pool_order: None,
            initial,
            iterations,
            final_predictions,
        };
        Ok(SthsOutcome {
            trace,
            final_model: last,
            models,
            step_seconds: seconds,
        })
    }
}

/// Conventional transductive setting: candidates are the unseen classes and
/// the pool is `test_unseen`.
pub fn run_sths(ds: &ZslDataset, cfg: &SthsConfig) -> Result<SthsOutcome> {
    cfg.validate(ds.n_unseen())?;
    if ds.test_unseen.is_empty() {
        return Err(Error::EmptyInput("unseen test pool"));
    }
    let driver = Driver {
        ds,
        cfg,
        pool: ds.test_unseen.features.clone(),
        candidates: ds.split.unseen.clone(),
        strict: false,
    };
    driver.run()
}

/// [`run_sths`] restricted to the random-sampling policy.
pub fn run_baseline_rs(ds: &ZslDataset, cfg: &SthsConfig) -> Result<SthsOutcome> {
    if cfg.policy != PolicyKind::Rs {
        return Err(Error::param("policy", "the baseline runs with random sampling"));
    }
    run_sths(ds, cfg)
}

/// Strict generalized setting: seen and unseen test rows are shuffled into one
/// pool, every class is a candidate, and pseudo-labels are drawn only from
/// rows predicted as unseen.
///
/// The schedule budget uses the mixed pool size.
pub fn run_sths_gzsl_strict(ds: &ZslDataset, cfg: &SthsConfig) -> Result<SthsOutcome> {
    cfg.validate(ds.n_unseen())?;
    let test_seen = ds
        .test_seen
        .as_ref()
        .ok_or_else(|| Error::InvalidDataset("strict generalized setting needs a seen test pool".into()))?;
    let mut order: Vec<PoolRef> = (0..ds.test_unseen.len())
        .map(|row| PoolRef { unseen_side: true, row })
        .chain((0..test_seen.len()).map(|row| PoolRef { unseen_side: false, row }))
        .collect();
    if order.is_empty() {
        return Err(Error::EmptyInput("mixed test pool"));
    }
    order.shuffle(&mut stream(cfg.seed, 0x9001));
    let mut pool = Matrix::empty(ds.test_unseen.features.cols());
    for r in &order {
        let src = if r.unseen_side { &ds.test_unseen.features } else { &test_seen.features };
        pool.push_row(src.row(r.row));
    }
    let driver = Driver {
        ds,
        cfg,
        pool,
        candidates: ds.split.all(),
        strict: true,
    };
    let mut out = driver.run()?;
    out.trace.pool_order = Some(order);
    Ok(out)
}

/// Writes `trace.json`, `predictions_final.csv` and, when models are given,
/// `checkpoints/step-<t>.ckpt` under `dir`.
pub fn save_trace_dir(trace: &RunTrace, models: &[FittedModel], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("trace.json");
    let text = serde_json::to_string_pretty(trace)?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;

    let mut csv = String::from(if trace.pool_order.is_some() { "row,side,source_row,class\n" } else { "row,class\n" });
    for (i, c) in trace.final_predictions.iter().enumerate() {
        match trace.pool_order.as_ref().map(|o| o[i]) {
            Some(r) => csv.push_str(&format!("{i},{},{},{}\n", if r.unseen_side { "unseen" } else { "seen" }, r.row, c.0)),
            None => csv.push_str(&format!("{i},{}\n", c.0)),
        }
    }
    let path = dir.join("predictions_final.csv");
    fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;

    if !models.is_empty() {
        let ck = dir.join("checkpoints");
        fs::create_dir_all(&ck).map_err(|e| Error::io(&ck, e))?;
        for (t, m) in models.iter().enumerate() {
            save_checkpoint(m, &ck.join(format!("step-{t}.ckpt")))?;
        }
    }
    Ok(())
}

pub fn load_trace(dir: &Path) -> Result<RunTrace> {
    let path = dir.join("trace.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let trace: RunTrace = serde_json::from_str(&text)?;
    if trace.schema_version != TRACE_SCHEMA_VERSION {
        return Err(Error::InvalidConfig(format!(
            "{} has trace schema {}, expected {TRACE_SCHEMA_VERSION}",
            path.display(),
            trace.schema_version
        )));
    }
    Ok(trace)
}

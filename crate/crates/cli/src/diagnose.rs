//! Oracle-label diagnostics over a seed sweep.
//!
//! Per-seed raw results go to `diagnostics.json`; `report.json` and
//! `report.csv` are derived from it and can be re-emitted without recomputing.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sths_core::dataset::ClassId;
use sths_core::eval::{
    diag_diversity, diag_precision_contrast, diag_retrain_contrast, diag_uneven_prediction, fit_inductive,
    hard_class_identification_ratio, DiagnosticConfig, DiversityPoint, Oracle, PrecisionContrast, RetrainMode, RetrainResult,
    UnevenReport,
};
use sths_core::hardness::{class_frequency, hardness_order};
use sths_core::models::BaseModel;

use crate::commands::{now, with_jobs, Options};
use crate::config::{DiagnoseSection, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::manifest::Stat;

pub const DIAGNOSTICS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Diversity {
    Done { points: Vec<DiversityPoint> },
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Identification {
    pub fraction: f64,
    /// Unseen classes in ascending predicted frequency of the inductive model.
    pub ranking: Vec<ClassId>,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedDiagnostics {
    pub seed: u64,
    pub budget: usize,
    pub uneven: UnevenReport,
    pub retrain: Vec<RetrainResult>,
    pub precision: PrecisionContrast,
    pub diversity: Diversity,
    pub identification: Identification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRun {
    pub schema_version: u32,
    pub name: String,
    pub config_hash: String,
    pub created_at: String,
    pub seeds: Vec<SeedDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub section: String,
    pub metric: String,
    pub stat: Option<Stat>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub schema_version: u32,
    pub name: String,
    pub config_hash: String,
    pub rows: Vec<ReportRow>,
}

impl DiagnosticsReport {
    pub fn get(&self, section: &str, metric: &str) -> Option<Stat> {
        self.rows.iter().find(|r| r.section == section && r.metric == metric).and_then(|r| r.stat)
    }
}

fn one_seed(cfg: &ExperimentConfig, d: &DiagnoseSection, seed: u64) -> Result<SeedDiagnostics> {
    let ds = cfg.dataset_for(seed)?;
    let oracle = Oracle::new(&ds);
    let dc = DiagnosticConfig {
        model: cfg.model.clone(),
        group_size: d.group_size,
        budget: d.budget,
        top_counts: d.top_counts.clone(),
        seed,
    };
    let budget = dc.budget(ds.test_unseen.len());
    let f0 = fit_inductive(&ds, &cfg.model, seed)?;
    let uneven = diag_uneven_prediction(&oracle, &f0)?;
    let retrain = [RetrainMode::Easy, RetrainMode::Hard, RetrainMode::All]
        .into_iter()
        .map(|m| diag_retrain_contrast(&oracle, &dc, m, budget))
        .collect::<sths_core::Result<Vec<_>>>()?;
    let precision = diag_precision_contrast(&oracle, &f0, d.group_size)?;
    let n_unseen = ds.n_unseen();
    let diversity = if n_unseen < 2 {
        Diversity::Skipped {
            reason: format!("{n_unseen} unseen class(es); spreading a budget needs at least 2"),
        }
    } else if let Some(t) = d.top_counts.iter().find(|&&t| t == 0 || t > n_unseen) {
        Diversity::Skipped {
            reason: format!("top count {t} is outside 1..={n_unseen}"),
        }
    } else {
        Diversity::Done {
            points: diag_diversity(&oracle, &dc, budget)?,
        }
    };

    let pred = f0.predict(&ds.test_unseen.features, &ds.split.unseen)?;
    let pos: Vec<usize> = pred.iter().map(|c| ds.split.unseen_position(*c).expect("prediction is a candidate")).collect();
    let ranking: Vec<ClassId> = hardness_order(&class_frequency(&pos, n_unseen)?.f)?
        .order
        .iter()
        .map(|&i| ds.split.unseen[i])
        .collect();
    let accs: Vec<(ClassId, f64)> = uneven.classes.iter().copied().zip(uneven.per_class_accuracy.iter().copied()).collect();
    let ratio = hard_class_identification_ratio(&ranking, &accs, d.identification_fraction)?;
    Ok(SeedDiagnostics {
        seed,
        budget,
        uneven,
        retrain,
        precision,
        diversity,
        identification: Identification {
            fraction: d.identification_fraction,
            ranking,
            ratio,
        },
    })
}

fn row(section: &str, metric: &str, values: &[f64]) -> ReportRow {
    ReportRow {
        section: section.into(),
        metric: metric.into(),
        stat: Stat::of(values),
        note: None,
    }
}

/// Sections A-D follow the four panels of the uneven-prediction study:
/// spread of per-class accuracy, retraining on easy vs hard classes, group
/// precision, and diversity of hard classes at a fixed budget.
pub fn summarize_diagnostics(run: &DiagnosticsRun) -> DiagnosticsReport {
    let s = &run.seeds;
    let col = |f: &dyn Fn(&SeedDiagnostics) -> Option<f64>| s.iter().filter_map(f).collect::<Vec<f64>>();
    let retrain = |mode: RetrainMode| col(&|d: &SeedDiagnostics| d.retrain.iter().find(|r| r.mode == mode).map(|r| r.acc));
    let mut rows = vec![
        row("A_uneven", "acc", &col(&|d| Some(d.uneven.acc))),
        row("A_uneven", "spread", &col(&|d| Some(d.uneven.spread))),
        row("B_retrain", "baseline", &col(&|d| d.retrain.first().map(|r| r.baseline_acc))),
        row("B_retrain", "easy", &retrain(RetrainMode::Easy)),
        row("B_retrain", "hard", &retrain(RetrainMode::Hard)),
        row("B_retrain", "all", &retrain(RetrainMode::All)),
        row("C_precision", "easy", &col(&|d| d.precision.easy)),
        row("C_precision", "hard", &col(&|d| d.precision.hard)),
        row("C_precision", "all", &col(&|d| d.precision.all)),
    ];
    let mut tops: Vec<usize> = s
        .iter()
        .flat_map(|d| match &d.diversity {
            Diversity::Done { points } => points.iter().map(|p| p.top).collect(),
            Diversity::Skipped { .. } => vec![],
        })
        .collect();
    tops.sort_unstable();
    tops.dedup();
    for t in tops {
        let v = col(&|d| match &d.diversity {
            Diversity::Done { points } => points.iter().find(|p| p.top == t).map(|p| p.acc),
            Diversity::Skipped { .. } => None,
        });
        rows.push(row("D_diversity", &format!("top{t}"), &v));
    }
    if let Some(reason) = s.iter().find_map(|d| match &d.diversity {
        Diversity::Skipped { reason } => Some(reason.clone()),
        Diversity::Done { .. } => None,
    }) {
        rows.push(ReportRow {
            section: "D_diversity".into(),
            metric: "skipped".into(),
            stat: None,
            note: Some(reason),
        });
    }
    rows.push(row("identification", "ratio", &col(&|d| Some(d.identification.ratio))));
    DiagnosticsReport {
        schema_version: DIAGNOSTICS_SCHEMA_VERSION,
        name: run.name.clone(),
        config_hash: run.config_hash.clone(),
        rows,
    }
}

pub fn report_csv(report: &DiagnosticsReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Report(e.to_string());
    w.write_record(["section", "metric", "mean", "stddev", "n", "note"]).map_err(io)?;
    for r in &report.rows {
        let (m, sd, n) = match r.stat {
            Some(s) => (format!("{:.6}", s.mean), format!("{:.6}", s.stddev), s.n.to_string()),
            None => (String::new(), String::new(), "0".into()),
        };
        w.write_record([r.section.as_str(), &r.metric, &m, &sd, &n, r.note.as_deref().unwrap_or("")])
            .map_err(io)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| CliError::Report(e.to_string()))?).map_err(|e| CliError::Report(e.to_string()))
}

fn emit(run: &DiagnosticsRun, out: &Path) -> Result<DiagnosticsReport> {
    let report = summarize_diagnostics(run);
    let json = serde_json::to_string_pretty(&report).map_err(sths_core::Error::from)?;
    let p = out.join("report.json");
    fs::write(&p, json).map_err(|e| CliError::io(&p, e))?;
    let p = out.join("report.csv");
    fs::write(&p, report_csv(&report)?).map_err(|e| CliError::io(&p, e))?;
    Ok(report)
}

pub fn read_diagnostics(dir: &Path) -> Result<DiagnosticsRun> {
    let p = dir.join("diagnostics.json");
    let text = fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))?;
    let run: DiagnosticsRun = serde_json::from_str(&text).map_err(sths_core::Error::from)?;
    if run.schema_version != DIAGNOSTICS_SCHEMA_VERSION {
        return Err(CliError::Report(format!("diagnostics schema {} is not supported", run.schema_version)));
    }
    Ok(run)
}

/// Re-emits `report.json` and `report.csv` from the diagnostics stored under
/// the `--from-trace` directory.
pub fn cmd_diagnose_from(opts: &Options) -> Result<DiagnosticsReport> {
    let dir = opts
        .from_trace
        .as_ref()
        .ok_or_else(|| CliError::Usage("diagnose needs a config or --from-trace".into()))?;
    emit(&read_diagnostics(dir)?, dir)
}

pub fn cmd_diagnose(cfg: &ExperimentConfig, opts: &Options) -> Result<DiagnosticsReport> {
    if opts.from_trace.is_some() {
        return cmd_diagnose_from(opts);
    }
    let d = cfg.diagnose.clone().unwrap_or_default();
    let out = opts.out_dir(cfg);
    fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let seeds = with_jobs(opts.jobs, || {
        cfg.seeds.par_iter().map(|&s| one_seed(cfg, &d, s)).collect::<Result<Vec<_>>>()
    })??;
    let run = DiagnosticsRun {
        schema_version: DIAGNOSTICS_SCHEMA_VERSION,
        name: cfg.name.clone(),
        config_hash: cfg.hash(),
        created_at: now(),
        seeds,
    };
    let p = out.join("diagnostics.json");
    let json = serde_json::to_string_pretty(&run).map_err(sths_core::Error::from)?;
    fs::write(&p, json).map_err(|e| CliError::io(&p, e))?;
    emit(&run, &out)
}

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::Serialize;
use sths_core::dataset::{save_dataset, validate_dataset, FeatureFormat, ValidationReport, ZslDataset};
use sths_core::eval::{annotate_trace, summarize, GzslMetrics, Oracle};
use sths_core::hardness::PolicyKind;
use sths_core::selftrain::{
    load_trace, run_baseline_rs, run_sths, run_sths_gzsl_strict, save_trace_dir, PriorSource, Setting, SthsConfig,
};

use crate::config::{ArmConfig, ArmPrior, DatasetSource, ExperimentConfig, RunSection, CONFIG_SCHEMA_VERSION};
use crate::error::{CliError, Result};
use crate::manifest::{aggregate, RunEntry, RunManifest, MANIFEST_SCHEMA_VERSION};

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub from_trace: Option<PathBuf>,
}

impl Options {
    pub fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.out.clone())
            .unwrap_or_else(|| PathBuf::from("runs").join(&cfg.name))
    }
}

/// Runs `f` on a pool of `jobs` threads (all cores when `None`).
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be >= 1".into()));
        }
        b = b.num_threads(j);
    }
    let pool = b.build().map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(sths_core::Error::from)?;
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn run_dir(arm: &str, seed: u64) -> String {
    format!("{arm}/seed-{seed}")
}

fn sths_config(cfg: &ExperimentConfig, run: &RunSection, arm: &ArmConfig, ds: &ZslDataset, seed: u64) -> SthsConfig {
    let prior = match &arm.prior {
        ArmPrior::None => PriorSource::None,
        ArmPrior::ThreeC(c) => PriorSource::ThreeC(c.clone()),
        ArmPrior::Known { p } => PriorSource::Known { p: p.clone() },
        ArmPrior::Oracle => PriorSource::Known {
            p: Oracle::new(ds).true_unseen_prior(),
        },
    };
    SthsConfig {
        steps: run.steps,
        policy: arm.policy,
        k: run.k,
        model: cfg.model.clone(),
        prior,
        seed,
        keep_models: run.keep_models,
    }
}

#[derive(Serialize)]
struct Timing<'a> {
    arm: &'a str,
    seed: u64,
    step_seconds: &'a [f64],
}

fn run_one(cfg: &ExperimentConfig, run: &RunSection, arm: &ArmConfig, seed: u64, out: &Path) -> Result<RunEntry> {
    let ds = cfg.dataset_for(seed)?;
    let oracle = Oracle::new(&ds);
    let sc = sths_config(cfg, run, arm, &ds, seed);
    let outcome = match (run.setting, arm.policy) {
        (Setting::GzslStrict, _) => run_sths_gzsl_strict(&ds, &sc)?,
        (Setting::Conventional, PolicyKind::Rs) => run_baseline_rs(&ds, &sc)?,
        (Setting::Conventional, _) => run_sths(&ds, &sc)?,
    };
    let mut trace = outcome.trace;
    annotate_trace(&oracle, &mut trace)?;
    let summary = summarize(&trace)?;

    let rel = run_dir(&arm.name, seed);
    let dir = out.join(&rel);
    save_trace_dir(&trace, &outcome.models, &dir)?;
    write_json(
        &dir.join("timing.json"),
        &Timing {
            arm: &arm.name,
            seed,
            step_seconds: &outcome.step_seconds,
        },
    )?;

    let separate_gzsl = if run.setting == Setting::GzslStrict && run.compare_separate {
        let conv = run_sths(&ds, &sc)?;
        let g = oracle.gzsl_separate(&conv.final_model)?;
        write_json(&dir.join("separate.json"), &g)?;
        Some(g)
    } else {
        None
    };
    info!("{rel}: ACC {:.4} -> {:.4}", summary.initial_acc, summary.final_acc);
    Ok(RunEntry {
        arm: arm.name.clone(),
        seed,
        dir: rel,
        initial_acc: summary.initial_acc,
        final_acc: summary.final_acc,
        gzsl: summary.final_gzsl,
        separate_gzsl,
        fallbacks: summary.fallbacks,
    })
}

fn reload_one(arm: &ArmConfig, seed: u64, out: &Path) -> Result<RunEntry> {
    let rel = run_dir(&arm.name, seed);
    let dir = out.join(&rel);
    let summary = summarize(&load_trace(&dir)?)?;
    let sep = dir.join("separate.json");
    let separate_gzsl = if sep.exists() {
        let text = fs::read_to_string(&sep).map_err(|e| CliError::io(&sep, e))?;
        Some(serde_json::from_str::<GzslMetrics>(&text).map_err(sths_core::Error::from)?)
    } else {
        None
    };
    Ok(RunEntry {
        arm: arm.name.clone(),
        seed,
        dir: rel,
        initial_acc: summary.initial_acc,
        final_acc: summary.final_acc,
        gzsl: summary.final_gzsl,
        separate_gzsl,
        fallbacks: summary.fallbacks,
    })
}

/// Every (arm, seed) pair of the sweep, one trace directory each, then the
/// manifest. With `from_trace`, traces under that directory are read back
/// instead of recomputed.
pub fn cmd_run(cfg: &ExperimentConfig, opts: &Options) -> Result<RunManifest> {
    let run = cfg
        .run
        .as_ref()
        .ok_or_else(|| CliError::Config("config has no [run] section".into()))?;
    let started_at = now();
    let out = opts.from_trace.clone().unwrap_or_else(|| opts.out_dir(cfg));
    create_dir(&out)?;
    let tasks: Vec<(&ArmConfig, u64)> = cfg.seeds.iter().flat_map(|&s| run.arms.iter().map(move |a| (a, s))).collect();
    let runs: Vec<RunEntry> = with_jobs(opts.jobs, || {
        tasks
            .par_iter()
            .map(|(arm, seed)| match &opts.from_trace {
                Some(_) => reload_one(arm, *seed, &out),
                None => run_one(cfg, run, arm, *seed, &out),
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut runs = runs;
    let order = |r: &RunEntry| {
        let a = run.arms.iter().position(|a| a.name == r.arm).unwrap_or(usize::MAX);
        let s = cfg.seeds.iter().position(|s| *s == r.seed).unwrap_or(usize::MAX);
        (a, s)
    };
    runs.sort_by_key(order);
    let arms: Vec<String> = run.arms.iter().map(|a| a.name.clone()).collect();
    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        config_schema_version: CONFIG_SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        name: cfg.name.clone(),
        config_hash: cfg.hash(),
        config: serde_json::from_str(&cfg.canonical_json()).map_err(sths_core::Error::from)?,
        setting: run.setting,
        started_at,
        finished_at: now(),
        seeds: cfg.seeds.clone(),
        aggregates: aggregate(&arms, &runs),
        runs,
    };
    manifest.write(&out.join("manifest.json"))?;
    Ok(manifest)
}

/// Writes the configured dataset. A synthetic source with several seeds
/// yields one `seed-<s>` subdirectory per seed; otherwise `out` itself.
pub fn cmd_synth(cfg: &ExperimentConfig, seeds: Option<&[u64]>, out: &Path, format: FeatureFormat) -> Result<Vec<PathBuf>> {
    if let DatasetSource::Path(_) = cfg.dataset {
        return Err(CliError::Config("synth needs a synthetic dataset source".into()));
    }
    create_dir(out)?;
    let seeds = seeds.unwrap_or(&[0]);
    let mut written = Vec::new();
    for &s in seeds {
        let dir = if seeds.len() == 1 { out.to_path_buf() } else { out.join(format!("seed-{s}")) };
        let ds = cfg.dataset_for(s)?;
        save_dataset(&ds, &dir, format)?;
        written.push(dir);
    }
    Ok(written)
}

#[derive(Debug, Serialize)]
pub struct ValidationOutput {
    pub schema_version: u32,
    pub dataset: String,
    pub valid: bool,
    pub report: ValidationReport,
}

pub fn cmd_validate(ds: &ZslDataset, label: &str) -> ValidationOutput {
    let report = validate_dataset(ds);
    ValidationOutput {
        schema_version: 1,
        dataset: label.to_string(),
        valid: report.is_valid(),
        report,
    }
}

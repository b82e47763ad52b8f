use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sths_core::eval::GzslMetrics;
use sths_core::selftrain::Setting;

use crate::error::{CliError, Result};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub stddev: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let stddev = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Some(Stat { mean, stddev, n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub arm: String,
    pub seed: u64,
    /// Run directory relative to the manifest.
    pub dir: String,
    /// ACC of the seen-only model over the unseen pool.
    pub initial_acc: f64,
    pub final_acc: f64,
    pub gzsl: Option<GzslMetrics>,
    /// Same seed trained in the conventional setting, evaluated over all
    /// classes.
    pub separate_gzsl: Option<GzslMetrics>,
    pub fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmAggregate {
    pub arm: String,
    pub initial_acc: Stat,
    pub final_acc: Stat,
    pub u: Option<Stat>,
    pub s: Option<Stat>,
    pub h: Option<Stat>,
    pub separate_h: Option<Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub config_schema_version: u32,
    pub tool_version: String,
    pub name: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub setting: Setting,
    pub started_at: String,
    pub finished_at: String,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunEntry>,
    pub aggregates: Vec<ArmAggregate>,
}

pub fn aggregate(arms: &[String], runs: &[RunEntry]) -> Vec<ArmAggregate> {
    arms.iter()
        .filter_map(|arm| {
            let rs: Vec<&RunEntry> = runs.iter().filter(|r| &r.arm == arm).collect();
            let col = |f: &dyn Fn(&RunEntry) -> Option<f64>| Stat::of(&rs.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
            Some(ArmAggregate {
                arm: arm.clone(),
                initial_acc: col(&|r| Some(r.initial_acc))?,
                final_acc: col(&|r| Some(r.final_acc))?,
                u: col(&|r| r.gzsl.map(|g| g.u)),
                s: col(&|r| r.gzsl.map(|g| g.s)),
                h: col(&|r| r.gzsl.map(|g| g.h)),
                separate_h: col(&|r| r.separate_gzsl.map(|g| g.h)),
            })
        })
        .collect()
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let m: RunManifest = serde_json::from_str(&text).map_err(sths_core::Error::from)?;
        if m.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(CliError::Report(format!(
                "manifest schema {} is not supported (expected {MANIFEST_SCHEMA_VERSION})",
                m.schema_version
            )));
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(sths_core::Error::from)?;
        fs::write(path, text).map_err(|e| CliError::io(path, e))
    }

    pub fn aggregate(&self, arm: &str) -> Option<&ArmAggregate> {
        self.aggregates.iter().find(|a| a.arm == arm)
    }

    /// The manifest with run timestamps blanked, for comparing reruns.
    pub fn without_timestamps(&self) -> Self {
        let mut m = self.clone();
        m.started_at.clear();
        m.finished_at.clear();
        m
    }
}

//! Experiment configs: TOML on disk, canonical JSON for hashing.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sths_core::dataset::{generate_synthetic, load_dataset, SyntheticConfig, ZslDataset};
use sths_core::hardness::PolicyKind;
use sths_core::models::ModelSpec;
use sths_core::prior::ThreeCConfig;
use sths_core::selftrain::Setting;

use crate::error::{CliError, Result};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

const PRESETS: &[(&str, &str)] = &[
    ("smoke", include_str!("../presets/smoke.toml")),
    ("table3-direction", include_str!("../presets/table3-direction.toml")),
    ("table3-zipf", include_str!("../presets/table3-zipf.toml")),
    ("fig1", include_str!("../presets/fig1.toml")),
    ("gzsl-strict", include_str!("../presets/gzsl-strict.toml")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Path(PathBuf),
    Synthetic(SyntheticConfig),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ArmPrior {
    #[default]
    None,
    ThreeC(ThreeCConfig),
    /// The true pool proportions, read through the evaluation oracle.
    Oracle,
    Known { p: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmConfig {
    pub name: String,
    pub policy: PolicyKind,
    #[serde(default)]
    pub prior: ArmPrior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "conventional")]
    pub setting: Setting,
    pub steps: usize,
    pub k: usize,
    #[serde(default)]
    pub keep_models: bool,
    /// Strict setting: also train in the conventional setting and record its
    /// generalized U/S/H.
    #[serde(default)]
    pub compare_separate: bool,
    pub arms: Vec<ArmConfig>,
}

fn conventional() -> Setting {
    Setting::Conventional
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseSection {
    pub group_size: Option<usize>,
    pub budget: Option<usize>,
    pub top_counts: Vec<usize>,
    pub identification_fraction: f64,
}

impl Default for DiagnoseSection {
    fn default() -> Self {
        Self {
            group_size: None,
            budget: None,
            top_counts: vec![1, 2, 4],
            identification_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub run: Option<RunSection>,
    #[serde(default)]
    pub diagnose: Option<DiagnoseSection>,
}

impl ExperimentConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML file; a relative dataset path is resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        if let DatasetSource::Path(p) = &mut cfg.dataset {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let text = preset_source(name)
            .ok_or_else(|| CliError::Usage(format!("unknown preset `{name}`; available: {}", preset_names().join(", "))))?;
        Self::parse(text, &format!("preset {name}"))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(CliError::Config("seed list must not be empty".into()));
        }
        if let DatasetSource::Synthetic(s) = &self.dataset {
            s.validate()?;
        }
        self.model.validate()?;
        if let Some(run) = &self.run {
            if run.arms.is_empty() {
                return Err(CliError::Config("run.arms must not be empty".into()));
            }
            let mut names: Vec<&str> = run.arms.iter().map(|a| a.name.as_str()).collect();
            names.sort_unstable();
            if names.windows(2).any(|w| w[0] == w[1]) {
                return Err(CliError::Config("arm names must be unique".into()));
            }
            for a in &run.arms {
                if a.name.is_empty() || a.name.contains(['/', '\\']) || a.name.starts_with('.') {
                    return Err(CliError::Config(format!("arm name `{}` is not a valid directory name", a.name)));
                }
            }
        }
        if let Some(d) = &self.diagnose {
            if !(d.identification_fraction > 0.0 && d.identification_fraction <= 1.0) {
                return Err(CliError::Config("diagnose.identification_fraction must be in (0, 1]".into()));
            }
        }
        Ok(())
    }

    /// Canonical JSON of the semantic content: object keys sorted, defaults
    /// filled in, output location dropped.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let value = serde_json::to_value(&c).expect("config serializes");
        serde_json::to_string(&value).expect("value serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    /// The dataset for one sweep seed. Synthetic datasets offset their seed by
    /// the sweep seed so each seed sees a fresh draw.
    pub fn dataset_for(&self, seed: u64) -> Result<ZslDataset> {
        match &self.dataset {
            DatasetSource::Path(p) => Ok(load_dataset(p)?),
            DatasetSource::Synthetic(s) => {
                let mut s = s.clone();
                s.seed = s.seed.wrapping_add(seed);
                Ok(generate_synthetic(&s)?)
            }
        }
    }
}

/// Parses `0,1,5` or the half-open range `0..10`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || CliError::Usage(format!("cannot parse seed list `{text}`"));
    let text = text.trim();
    let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        (a..b).collect()
    } else {
        text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

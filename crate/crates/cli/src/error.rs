use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

pub const ERROR_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("report error: {0}")]
    Report(String),

    #[error("dataset has {0} violation(s)")]
    Violations(usize),

    #[error(transparent)]
    Core(#[from] sths_core::Error),
}

/// Exit codes, one per failure class.
pub mod exit {
    pub const OK: u8 = 0;
    pub const USAGE: u8 = 2;
    pub const CONFIG: u8 = 3;
    pub const IO: u8 = 4;
    pub const DATASET: u8 = 5;
    pub const RUN: u8 = 6;
    pub const REPORT: u8 = 7;
    pub const VIOLATIONS: u8 = 8;
    pub const FORMAT: u8 = 9;
}

#[derive(Debug, Serialize)]
pub struct ErrorBody<'a> {
    pub kind: &'a str,
    pub code: u8,
    pub message: String,
}

#[derive(Debug, Serialize)]
pub struct ErrorReport<'a> {
    pub schema_version: u32,
    pub error: ErrorBody<'a>,
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        use sths_core::Error as E;
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Report(_) => "report",
            CliError::Violations(_) => "violations",
            CliError::Core(e) => match e {
                E::MissingFile(_) | E::Io { .. } => "io",
                E::Parse { .. }
                | E::DimensionMismatch { .. }
                | E::SplitOverlap(_)
                | E::LabelOutOfRange { .. }
                | E::ZeroAttributeRow(_)
                | E::InvalidDataset(_) => "dataset",
                E::InvalidConfig(_) | E::InvalidParameter { .. } => "config",
                E::Checkpoint(_) | E::Json(_) => "format",
                _ => "run",
            },
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.kind() {
            "usage" => exit::USAGE,
            "config" => exit::CONFIG,
            "io" => exit::IO,
            "dataset" => exit::DATASET,
            "report" => exit::REPORT,
            "violations" => exit::VIOLATIONS,
            "format" => exit::FORMAT,
            _ => exit::RUN,
        }
    }

    pub fn to_json(&self) -> String {
        let report = ErrorReport {
            schema_version: ERROR_SCHEMA_VERSION,
            error: ErrorBody {
                kind: self.kind(),
                code: self.exit_code(),
                message: self.to_string(),
            },
        };
        serde_json::to_string(&report).unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", self.kind()))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

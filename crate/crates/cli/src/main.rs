use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sths_cli::commands::{cmd_run, cmd_synth, cmd_validate, Options};
use sths_cli::config::parse_seeds;
use sths_cli::diagnose::cmd_diagnose;
use sths_cli::error::exit;
use sths_cli::manifest::RunManifest;
use sths_cli::report::cmd_report;
use sths_cli::{CliError, ExperimentConfig, Result};
use sths_core::dataset::{load_dataset, FeatureFormat};

#[derive(Parser)]
#[command(name = "sths", version, about = "Self-training with hardness sampling for transductive zero-shot learning")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Bundled experiment preset.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long, global = true, env = "STHS_OUT")]
    out: Option<PathBuf>,
    /// Seed list overriding the config: `0,1,2` or `0..10`.
    #[arg(long, global = true)]
    seeds: Option<String>,
    /// Worker threads for seed sweeps.
    #[arg(long, global = true, env = "STHS_JOBS")]
    jobs: Option<usize>,
    /// Rebuild outputs from an existing run directory instead of recomputing.
    #[arg(long, global = true)]
    from_trace: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    F32,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured synthetic dataset.
    Synth {
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Run every arm of the config over the seed sweep.
    Run,
    /// Run the oracle diagnostics.
    Diagnose,
    /// Print the table for a run manifest and write report.csv.
    Report { manifest: PathBuf },
    /// Check a dataset directory, or the configured dataset.
    Validate { dataset: Option<PathBuf> },
    /// List bundled presets.
    Presets,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(p), _) => ExperimentConfig::load(p)?,
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => return Err(CliError::Usage("pass --config <file> or --preset <name>".into())),
    };
    if let Some(s) = &cli.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    Ok(cfg)
}

fn options(cli: &Cli) -> Options {
    Options {
        out: cli.out.clone(),
        jobs: cli.jobs,
        from_trace: cli.from_trace.clone(),
    }
}

fn write_file(path: &std::path::Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Presets => {
            for n in sths_cli::config::preset_names() {
                println!("{n}");
            }
        }
        Command::Synth { format } => {
            let cfg = load_config(cli)?;
            let out = options(cli).out_dir(&cfg);
            let seeds = cli.seeds.as_ref().map(|_| cfg.seeds.clone());
            let format = match format {
                Format::Csv => FeatureFormat::Csv,
                Format::F32 => FeatureFormat::F32,
            };
            for dir in cmd_synth(&cfg, seeds.as_deref(), &out, format)? {
                println!("{}", dir.display());
            }
        }
        Command::Run => {
            let cfg = load_config(cli)?;
            let opts = options(cli);
            let m = cmd_run(&cfg, &opts)?;
            let (table, _) = cmd_report(&m)?;
            print!("{table}");
        }
        Command::Diagnose => {
            let opts = options(cli);
            let cfg = match (&cli.config, &cli.preset, &opts.from_trace) {
                (None, None, Some(_)) => None,
                _ => Some(load_config(cli)?),
            };
            let report = match cfg {
                Some(cfg) => cmd_diagnose(&cfg, &opts)?,
                None => sths_cli::diagnose::cmd_diagnose_from(&opts)?,
            };
            print!("{}", sths_cli::diagnose::report_csv(&report)?);
        }
        Command::Report { manifest } => {
            let m = RunManifest::read(manifest)?;
            let (table, csv) = cmd_report(&m)?;
            let dir = cli.out.clone().or_else(|| manifest.parent().map(|p| p.to_path_buf())).unwrap_or_default();
            std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            write_file(&dir.join("report.csv"), &csv)?;
            print!("{table}");
        }
        Command::Validate { dataset } => {
            let out = match dataset {
                Some(dir) => cmd_validate(&load_dataset(dir)?, &dir.display().to_string()),
                None => {
                    let cfg = load_config(cli)?;
                    let seed = cfg.seeds[0];
                    cmd_validate(&cfg.dataset_for(seed)?, &format!("{} (seed {seed})", cfg.name))
                }
            };
            println!("{}", serde_json::to_string_pretty(&out).map_err(sths_core::Error::from)?);
            if !out.valid {
                return Err(CliError::Violations(out.report.violations.len()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                e.exit();
            }
            eprintln!("{}", CliError::Usage(e.to_string().trim().to_string()).to_json());
            return ExitCode::from(exit::USAGE);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}

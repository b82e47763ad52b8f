use std::fs;
use std::path::Path;

use sths_cli::commands::{cmd_run, cmd_synth, Options};
use sths_cli::config::DatasetSource;
use sths_cli::diagnose::{cmd_diagnose, cmd_diagnose_from, Diversity, read_diagnostics};
use sths_cli::manifest::RunManifest;
use sths_cli::ExperimentConfig;
use sths_core::dataset::{load_dataset, FeatureFormat};

fn opts(dir: &Path) -> Options {
    Options {
        out: Some(dir.to_path_buf()),
        ..Default::default()
    }
}

fn read_tree(p: &Path) -> Vec<(std::path::PathBuf, Vec<u8>)> {
    let mut entries: Vec<_> = fs::read_dir(p).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    entries
        .into_iter()
        .flat_map(|f| if f.is_dir() { read_tree(&f) } else { vec![(f.clone(), fs::read(&f).unwrap())] })
        .collect()
}

fn smoke() -> ExperimentConfig {
    ExperimentConfig::preset("smoke").unwrap()
}

#[test]
fn rerun_gives_identical_outputs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = smoke();
    let ma = cmd_run(&cfg, &opts(a.path())).unwrap();
    let mb = cmd_run(&cfg, &Options { jobs: Some(1), ..opts(b.path()) }).unwrap();
    assert_eq!(ma.without_timestamps(), mb.without_timestamps());
    for r in &ma.runs {
        let x = fs::read(a.path().join(&r.dir).join("trace.json")).unwrap();
        let y = fs::read(b.path().join(&r.dir).join("trace.json")).unwrap();
        assert_eq!(x, y, "{}", r.dir);
    }
    assert_eq!(RunManifest::read(&a.path().join("manifest.json")).unwrap(), ma);
}

#[test]
fn manifest_rebuilds_from_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke();
    let m = cmd_run(&cfg, &opts(dir.path())).unwrap();
    let again = cmd_run(
        &cfg,
        &Options {
            from_trace: Some(dir.path().to_path_buf()),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(m.runs, again.runs);
    assert_eq!(m.aggregates, again.aggregates);
}

#[test]
fn missing_trace_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = cmd_run(
        &smoke(),
        &Options {
            from_trace: Some(dir.path().to_path_buf()),
            ..Default::default()
        },
    )
    .unwrap_err();
    assert_eq!(err.kind(), "io");
}

#[test]
fn zero_jobs_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = cmd_run(&smoke(), &Options { jobs: Some(0), ..opts(dir.path()) }).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn synth_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke();
    for format in [FeatureFormat::Csv, FeatureFormat::F32] {
        let out = dir.path().join(format!("{format:?}"));
        let first = cmd_synth(&cfg, None, &out, format).unwrap();
        let bytes = read_tree(&first[0]);
        cmd_synth(&cfg, None, &out, format).unwrap();
        assert_eq!(read_tree(&first[0]), bytes);
        assert_eq!(load_dataset(&first[0]).unwrap(), cfg.dataset_for(0).unwrap());
    }
    let many = cmd_synth(&cfg, Some(&[3, 4]), dir.path(), FeatureFormat::Csv).unwrap();
    assert_eq!(many, vec![dir.path().join("seed-3"), dir.path().join("seed-4")]);
    assert_eq!(load_dataset(&many[1]).unwrap(), cfg.dataset_for(4).unwrap());
}

#[test]
fn synth_needs_a_synthetic_source() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = smoke();
    cfg.dataset = DatasetSource::Path(dir.path().join("x"));
    assert_eq!(cmd_synth(&cfg, None, dir.path(), FeatureFormat::Csv).unwrap_err().kind(), "config");
}

#[test]
fn diagnostics_reemit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let report = cmd_diagnose(&smoke(), &opts(dir.path())).unwrap();
    let csv = fs::read(dir.path().join("report.csv")).unwrap();
    let again = cmd_diagnose_from(&Options {
        from_trace: Some(dir.path().to_path_buf()),
        ..Default::default()
    })
    .unwrap();
    assert_eq!(report, again);
    assert_eq!(fs::read(dir.path().join("report.csv")).unwrap(), csv);
    assert_eq!(read_diagnostics(dir.path()).unwrap().seeds.len(), 2);
}

#[test]
fn single_unseen_class_skips_diversity() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = smoke();
    let DatasetSource::Synthetic(s) = &mut cfg.dataset else {
        unreachable!()
    };
    s.n_unseen = 1;
    s.hardness = sths_core::dataset::HardClasses::None;
    cfg.diagnose = Some(Default::default());
    let report = cmd_diagnose(&cfg, &opts(dir.path())).unwrap();
    let run = read_diagnostics(dir.path()).unwrap();
    assert!(run.seeds.iter().all(|d| matches!(d.diversity, Diversity::Skipped { .. })));
    let row = report.rows.iter().find(|r| r.section == "D_diversity").unwrap();
    assert_eq!(row.metric, "skipped");
    assert!(row.stat.is_none() && row.note.is_some());
}

#[test]
fn cfbs_beats_the_inductive_model_on_most_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::preset("table3-direction").unwrap();
    cfg.run.as_mut().unwrap().arms.retain(|a| a.name == "cfbs");
    let m = cmd_run(&cfg, &opts(dir.path())).unwrap();
    let better = m.runs.iter().filter(|r| r.final_acc > r.initial_acc).count();
    assert!(better >= 9, "{better} of {} seeds improved", m.runs.len());
}

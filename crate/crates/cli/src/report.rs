//! Text table and CSV from a run manifest.
//!
//! Numbers are recomputed from the per-seed entries, so the table does not
//! depend on the stored aggregates. H is the mean over seeds of the harmonic
//! mean of each seed's U and S.

use std::fmt::Write as _;

use sths_core::eval::{harmonic_mean, Scale};

use crate::error::{CliError, Result};
use crate::manifest::{RunEntry, RunManifest, Stat};

#[derive(Debug, Clone, PartialEq)]
pub struct ReportLine {
    pub arm: String,
    pub n: usize,
    pub initial_acc: Stat,
    pub final_acc: Stat,
    pub u: Option<Stat>,
    pub s: Option<Stat>,
    pub h: Option<Stat>,
    pub separate_h: Option<Stat>,
}

fn pct(v: f64) -> String {
    format!("{:.1}", 100.0 * v)
}

fn opt(s: Option<Stat>, f: impl Fn(Stat) -> f64) -> String {
    s.map(|s| pct(f(s))).unwrap_or_else(|| "-".into())
}

pub fn report_lines(m: &RunManifest) -> Result<Vec<ReportLine>> {
    if m.runs.is_empty() {
        return Err(CliError::Report("manifest has an empty sweep".into()));
    }
    let mut arms: Vec<&str> = Vec::new();
    for r in &m.runs {
        if !arms.contains(&r.arm.as_str()) {
            arms.push(&r.arm);
        }
    }
    arms.into_iter()
        .map(|arm| {
            let rs: Vec<&RunEntry> = m.runs.iter().filter(|r| r.arm == arm).collect();
            let col = |f: &dyn Fn(&RunEntry) -> Option<f64>| Stat::of(&rs.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
            let hs = rs
                .iter()
                .filter_map(|r| r.gzsl.map(|g| harmonic_mean(g.u, g.s, Scale::Fraction)))
                .collect::<sths_core::Result<Vec<f64>>>()?;
            Ok(ReportLine {
                arm: arm.to_string(),
                n: rs.len(),
                initial_acc: col(&|r| Some(r.initial_acc)).expect("arm has runs"),
                final_acc: col(&|r| Some(r.final_acc)).expect("arm has runs"),
                u: col(&|r| r.gzsl.map(|g| g.u)),
                s: col(&|r| r.gzsl.map(|g| g.s)),
                h: Stat::of(&hs),
                separate_h: col(&|r| r.separate_gzsl.map(|g| g.h)),
            })
        })
        .collect()
}

pub fn render_table(m: &RunManifest, lines: &[ReportLine]) -> String {
    let gzsl = lines.iter().any(|l| l.h.is_some());
    let sep = lines.iter().any(|l| l.separate_h.is_some());
    let mut header = vec!["arm", "seeds", "ACC_0", "ACC_T", "sd"];
    if gzsl {
        header.extend(["U", "S", "H", "sd_H"]);
    }
    if sep {
        header.push("H_sep");
    }
    let rows: Vec<Vec<String>> = lines
        .iter()
        .map(|l| {
            let mut r = vec![
                l.arm.clone(),
                l.n.to_string(),
                pct(l.initial_acc.mean),
                pct(l.final_acc.mean),
                pct(l.final_acc.stddev),
            ];
            if gzsl {
                r.extend([
                    opt(l.u, |s| s.mean),
                    opt(l.s, |s| s.mean),
                    opt(l.h, |s| s.mean),
                    opt(l.h, |s| s.stddev),
                ]);
            }
            if sep {
                r.push(opt(l.separate_h, |s| s.mean));
            }
            r
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|j| rows.iter().map(|r| r[j].len()).chain([header[j].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let _ = writeln!(out, "{} ({}), config {}", m.name, serde_json::to_string(&m.setting).unwrap_or_default().trim_matches('"'), &m.config_hash[..12.min(m.config_hash.len())]);
    let fmt_row = |cells: Vec<&str>| {
        cells
            .iter()
            .enumerate()
            .map(|(j, c)| if j == 0 { format!("{c:<w$}", w = widths[j]) } else { format!("{c:>w$}", w = widths[j]) })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let _ = writeln!(out, "{}", fmt_row(header.clone()));
    for r in &rows {
        let _ = writeln!(out, "{}", fmt_row(r.iter().map(String::as_str).collect()));
    }
    out
}

pub fn render_csv(lines: &[ReportLine]) -> Result<String> {
    let err = |e: csv::Error| CliError::Report(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "arm", "seeds", "acc_initial", "acc_final", "acc_final_sd", "u", "s", "h", "h_sd", "h_separate",
    ])
    .map_err(err)?;
    for l in lines {
        w.write_record([
            l.arm.clone(),
            l.n.to_string(),
            pct(l.initial_acc.mean),
            pct(l.final_acc.mean),
            pct(l.final_acc.stddev),
            opt(l.u, |s| s.mean),
            opt(l.s, |s| s.mean),
            opt(l.h, |s| s.mean),
            opt(l.h, |s| s.stddev),
            opt(l.separate_h, |s| s.mean),
        ])
        .map_err(err)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| CliError::Report(e.to_string()))?).map_err(|e| CliError::Report(e.to_string()))
}

/// Table text and CSV text for a manifest.
pub fn cmd_report(m: &RunManifest) -> Result<(String, String)> {
    let lines = report_lines(m)?;
    Ok((render_table(m, &lines), render_csv(&lines)?))
}

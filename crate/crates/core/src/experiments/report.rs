//! Markdown summary of the reports in a results directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{ExpResult, ExperimentError, ExperimentReport, REPORT_SUFFIX};

pub const REPORT_FILE: &str = "report.md";

fn load_reports(dir: &Path) -> ExpResult<Vec<(PathBuf, ExperimentReport)>> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(ExperimentError::NoResults(dir.to_path_buf()))
        }
        Err(e) => return Err(ExperimentError::io(dir, e)),
    };
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(REPORT_SUFFIX))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(ExperimentError::NoResults(dir.to_path_buf()));
    }
    paths
        .into_iter()
        .map(|p| {
            let text = fs::read_to_string(&p).map_err(|e| ExperimentError::io(&p, e))?;
            let report =
                serde_json::from_str(&text).map_err(|e| ExperimentError::CorruptReport {
                    path: p.clone(),
                    detail: e.to_string(),
                })?;
            Ok((p, report))
        })
        .collect()
}

/// Render the markdown document; the flag is the overall verdict.
pub fn emit_report(dir: &Path) -> ExpResult<(String, bool)> {
    let reports = load_reports(dir)?;
    let overall = reports.iter().all(|(_, r)| r.passed);
    let mut md = String::new();
    let verdict = |p: bool| if p { "PASS" } else { "FAIL" };
    writeln!(md, "# Experiment report\n").unwrap();
    writeln!(md, "Overall: **{}**\n", verdict(overall)).unwrap();
    writeln!(
        md,
        "| experiment | result | seed | version | wall time (s) |"
    )
    .unwrap();
    writeln!(md, "|---|---|---|---|---|").unwrap();
    for (_, r) in &reports {
        writeln!(
            md,
            "| {} | {} | {} | {} | {:.3} |",
            r.experiment,
            verdict(r.passed),
            r.seed,
            r.version,
            r.wall_time_s
        )
        .unwrap();
    }
    for (path, r) in &reports {
        let file = path.file_name().unwrap_or_default().to_string_lossy();
        writeln!(md, "\n## {} ({})\n", r.experiment, verdict(r.passed)).unwrap();
        writeln!(md, "Source: `{file}`\n").unwrap();
        writeln!(md, "| measurement | value | condition | result |").unwrap();
        writeln!(md, "|---|---|---|---|").unwrap();
        for m in &r.measurements {
            let (open, close) = if m.passed { ("", "") } else { ("**", "**") };
            writeln!(
                md,
                "| {open}{}{close} | {open}{:.6e}{close} | {} {:e} | {open}{}{close} |",
                m.name,
                m.value,
                m.bound.symbol(),
                m.limit,
                verdict(m.passed)
            )
            .unwrap();
        }
    }
    Ok((md, overall))
}

/// Write `report.md` into `dir`; returns its path and the overall verdict.
pub fn write_report(dir: &Path) -> ExpResult<(PathBuf, bool)> {
    let (md, overall) = emit_report(dir)?;
    let path = dir.join(REPORT_FILE);
    fs::write(&path, md).map_err(|e| ExperimentError::io(&path, e))?;
    Ok((path, overall))
}

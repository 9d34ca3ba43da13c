//! Report emission: `report.json` with stable key order plus a per-trial
//! CSV, both byte-reproducible for a given seed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::metrics::{MetricsReport, TrialRow};
use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Both,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "both" => Ok(ReportFormat::Both),
            other => Err(format!("unknown format `{other}` (expected json|csv|both)")),
        }
    }
}

pub const TRIALS_CSV_HEADER: &str = "trial,seed,S_i,n_i,replans,failure_modes";

fn encode_failure_modes(modes: &BTreeMap<String, u32>) -> String {
    if modes.is_empty() {
        return "-".into();
    }
    modes.iter().map(|(k, v)| format!("{k}:{v}")).collect::<Vec<_>>().join("|")
}

fn decode_failure_modes(cell: &str) -> Result<BTreeMap<String, u32>, String> {
    let mut out = BTreeMap::new();
    if cell == "-" {
        return Ok(out);
    }
    for part in cell.split('|') {
        let (mode, count) = part.split_once(':').ok_or_else(|| format!("bad failure mode `{part}`"))?;
        let count: u32 = count.parse().map_err(|_| format!("bad failure count in `{part}`"))?;
        out.insert(mode.to_string(), count);
    }
    Ok(out)
}

/// Serializes the per-trial rows as CSV under the pinned header.
pub fn trials_csv(rows: &[TrialRow]) -> String {
    let mut out = String::from(TRIALS_CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.trial,
            row.seed,
            row.success as u8,
            row.subtasks_passed,
            row.replans,
            encode_failure_modes(&row.failure_modes),
        ));
    }
    out
}

/// Parses a `trials.csv` back into rows (collision counts are not part of
/// the CSV contract and reload as zero).
pub fn parse_trials_csv(text: &str) -> Result<Vec<TrialRow>, HarnessError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == TRIALS_CSV_HEADER => {}
        Some((_, header)) => {
            return Err(HarnessError::Parse {
                path: "<trials.csv>".into(),
                detail: format!("expected header `{TRIALS_CSV_HEADER}`, got `{}`", header.trim()),
            })
        }
        None => {
            return Err(HarnessError::Parse { path: "<trials.csv>".into(), detail: "empty file".into() })
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(HarnessError::Parse {
                path: "<trials.csv>".into(),
                detail: format!("line {}: expected 6 fields, got {}", idx + 1, fields.len()),
            });
        }
        let parse = |s: &str, what: &str| -> Result<u64, HarnessError> {
            s.parse().map_err(|_| HarnessError::Parse {
                path: "<trials.csv>".into(),
                detail: format!("line {}: invalid {what} `{s}`", idx + 1),
            })
        };
        let success = match fields[2] {
            "0" => false,
            "1" => true,
            other => {
                return Err(HarnessError::Parse {
                    path: "<trials.csv>".into(),
                    detail: format!("line {}: S_i must be 0 or 1, got `{other}`", idx + 1),
                })
            }
        };
        rows.push(TrialRow {
            trial: parse(fields[0], "trial")? as usize,
            seed: parse(fields[1], "seed")?,
            success,
            subtasks_passed: parse(fields[3], "n_i")? as u32,
            replans: parse(fields[4], "replans")? as u32,
            failure_modes: decode_failure_modes(fields[5]).map_err(|detail| HarnessError::Parse {
                path: "<trials.csv>".into(),
                detail: format!("line {}: {detail}", idx + 1),
            })?,
            collision_events: 0,
        });
    }
    Ok(rows)
}

/// The report JSON body: pretty-printed with the struct's fixed key order.
pub fn report_json(report: &MetricsReport) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("serializable report");
    text.push('\n');
    text
}

/// Writes the report files into `dir` and returns their paths.
pub fn emit_report(
    report: &MetricsReport,
    dir: &Path,
    format: ReportFormat,
) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir)
        .map_err(|source| HarnessError::Io { path: dir.display().to_string(), source })?;
    let mut written = Vec::new();
    if matches!(format, ReportFormat::Json | ReportFormat::Both) {
        let path = dir.join("report.json");
        std::fs::write(&path, report_json(report))
            .map_err(|source| HarnessError::Io { path: path.display().to_string(), source })?;
        written.push(path);
    }
    if matches!(format, ReportFormat::Csv | ReportFormat::Both) {
        let path = dir.join("trials.csv");
        std::fs::write(&path, trials_csv(&report.per_trial))
            .map_err(|source| HarnessError::Io { path: path.display().to_string(), source })?;
        written.push(path);
    }
    Ok(written)
}

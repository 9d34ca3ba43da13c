//! Task and subtask success rates over a batch of trials.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::executor::TrialResult;

/// One row of the per-trial table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    pub subtasks_passed: u32,
    pub replans: u32,
    pub failure_modes: BTreeMap<String, u32>,
    pub collision_events: u32,
}

impl TrialRow {
    pub fn from_result(trial: usize, result: &TrialResult) -> Self {
        Self {
            trial,
            seed: result.seed,
            success: result.success,
            subtasks_passed: result.subtasks_passed,
            replans: result.replans_used,
            failure_modes: result.failure_modes(),
            collision_events: result.collision_events,
        }
    }
}

/// Batch metrics: the task success rate (fraction of fully successful
/// trials) and the subtask success rate (mean fraction of completed
/// subtasks), plus the evidence they were computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub trials: usize,
    pub expected_subtasks: usize,
    pub tsr: f64,
    pub ssr: f64,
    pub per_trial: Vec<TrialRow>,
    pub failure_histogram: BTreeMap<String, u32>,
    /// Echo of the full effective configuration; a report alone suffices to
    /// reproduce its run.
    pub config: serde_json::Value,
}

/// Computes TSR and SSR over per-trial rows.
///
/// Both rates reduce to integer sums divided once, which keeps the
/// arithmetic exact for decimal-valued expectations.
pub fn compute_metrics_from_rows(
    rows: Vec<TrialRow>,
    expected_subtasks: usize,
) -> Result<MetricsReport, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::InsufficientData("no trial results to aggregate".into()));
    }
    if expected_subtasks == 0 {
        return Err(HarnessError::Validation("expected_subtasks must be positive".into()));
    }
    let mut successes: u64 = 0;
    let mut passed_total: u64 = 0;
    let mut failure_histogram: BTreeMap<String, u32> = BTreeMap::new();
    for row in &rows {
        if row.subtasks_passed as usize > expected_subtasks {
            return Err(HarnessError::Validation(format!(
                "trial {} passed {} subtasks, more than the task's {expected_subtasks}",
                row.trial, row.subtasks_passed
            )));
        }
        if row.success && row.subtasks_passed as usize != expected_subtasks {
            return Err(HarnessError::Validation(format!(
                "trial {} marked successful with only {}/{expected_subtasks} subtasks",
                row.trial, row.subtasks_passed
            )));
        }
        successes += row.success as u64;
        passed_total += row.subtasks_passed as u64;
        for (mode, count) in &row.failure_modes {
            *failure_histogram.entry(mode.clone()).or_insert(0) += count;
        }
    }
    let n = rows.len();
    let tsr = successes as f64 / n as f64;
    let ssr = passed_total as f64 / (expected_subtasks as u64 * n as u64) as f64;
    assert!(tsr <= ssr, "TSR {tsr} exceeded SSR {ssr}");
    Ok(MetricsReport {
        trials: n,
        expected_subtasks,
        tsr,
        ssr,
        per_trial: rows,
        failure_histogram,
        config: serde_json::json!({}),
    })
}

/// Computes the metrics report from full trial results.
pub fn compute_metrics(
    results: &[TrialResult],
    expected_subtasks: usize,
) -> Result<MetricsReport, HarnessError> {
    let rows = results
        .iter()
        .enumerate()
        .map(|(i, r)| TrialRow::from_result(i, r))
        .collect();
    compute_metrics_from_rows(rows, expected_subtasks)
}

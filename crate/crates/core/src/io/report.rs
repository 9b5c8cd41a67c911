//! Aggregation of repeated runs into mean ± standard deviation rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsm::Outcome;
use crate::run::RunReport;

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Values are sorted before summation so the result does not depend on
    /// input order.
    pub fn of(values: &[f64]) -> Option<MeanStd> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mean = sorted.iter().sum::<f64>() / n;
        let mut sq: Vec<f64> = sorted.iter().map(|v| (v - mean).powi(2)).collect();
        sq.sort_by(f64::total_cmp);
        let std = (sq.iter().sum::<f64>() / n).sqrt();
        Some(MeanStd { mean, std })
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.2} ± {:.2}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub source: String,
    pub runs: usize,
    pub successes: usize,
    pub duration_s: MeanStd,
    pub compression_pct: MeanStd,
    pub slips: MeanStd,
}

/// Groups reports by source and summarizes each group, sorted by name.
pub fn summarize(reports: &[RunReport]) -> Result<Vec<SummaryRow>> {
    if reports.is_empty() {
        return Err(Error::Report("no run reports to aggregate".into()));
    }
    let mut groups: BTreeMap<&str, Vec<&RunReport>> = BTreeMap::new();
    for r in reports {
        groups.entry(r.source.as_str()).or_default().push(r);
    }
    Ok(groups
        .into_iter()
        .map(|(source, runs)| {
            let metric = |f: fn(&RunReport) -> f64| {
                MeanStd::of(&runs.iter().map(|r| f(r)).collect::<Vec<_>>())
                    .expect("non-empty group")
            };
            SummaryRow {
                source: source.to_string(),
                runs: runs.len(),
                successes: runs
                    .iter()
                    .filter(|r| r.outcome == Outcome::Success)
                    .count(),
                duration_s: metric(|r| r.duration_s),
                compression_pct: metric(|r| r.compression_pct),
                slips: metric(|r| f64::from(r.slip_count)),
            }
        })
        .collect())
}

/// Renders rows as a Markdown table.
pub fn format_table(rows: &[SummaryRow]) -> String {
    let mut out = String::from(
        "| Experiment | Runs | Success | Duration [s] | % Compression | # Slippages |\n\
         |---|---|---|---|---|---|\n",
    );
    for row in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {}/{} | {} | {} | {} |",
            row.source,
            row.runs,
            row.successes,
            row.runs,
            row.duration_s,
            row.compression_pct,
            row.slips
        );
    }
    out
}

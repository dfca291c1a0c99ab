//! Aggregates a run store into a table and `report.json`.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Result};
use serde::Serialize;

use crate::record::{Record, Verdict};
use crate::thresholds;

#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub criterion: Option<u8>,
    pub threshold_id: Option<&'static str>,
    pub scenario: String,
    pub quantity: String,
    pub n: Option<usize>,
    pub delta: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub value: f64,
    pub rule: Option<&'static str>,
    pub known_failure: Option<&'static str>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub threshold_table: &'static str,
    pub scenario: Option<String>,
    pub rows: Vec<ReportRow>,
    pub passed: usize,
    pub failed: usize,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.failed > 0 {
            1
        } else {
            0
        }
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<4} {:<16} {:<26} {:>3} {:>10} {:>12} {:>14}  {:<7} rule",
            "crit", "scenario", "quantity", "n", "delta", "alpha,beta", "measured", "verdict"
        );
        for r in &self.rows {
            let crit = r.criterion.map(|c| c.to_string()).unwrap_or_else(|| "-".into());
            let n = r.n.map(|v| v.to_string()).unwrap_or_default();
            let delta = r.delta.map(|d| format!("{d:.3e}")).unwrap_or_default();
            let w = match (r.alpha, r.beta) {
                (Some(a), Some(b)) => format!("{a},{b}"),
                _ => String::new(),
            };
            let flag = match r.verdict {
                Verdict::Fail | Verdict::Error if r.known_failure.is_some() => "FAIL*",
                Verdict::Fail => "FAIL",
                Verdict::Error => "ERROR",
                Verdict::Pass => "pass",
                Verdict::Info => "info",
            };
            let _ = writeln!(
                s,
                "{crit:<4} {:<16} {:<26} {n:>3} {delta:>10} {w:>12} {:>14.6e}  {flag:<7} {}",
                r.scenario,
                r.quantity,
                r.value,
                r.rule.unwrap_or("")
            );
        }
        let _ = writeln!(s, "{} passed, {} failed (threshold table v{})", self.passed, self.failed, self.threshold_table);
        if self.rows.iter().any(|r| r.verdict.is_failure() && r.known_failure.is_some()) {
            let _ = writeln!(s, "* failure listed as known in the threshold table");
        }
        s
    }
}

/// Builds the report over `records`, optionally restricted to one scenario.
pub fn build(records: &[Record], scenario: Option<&str>) -> Result<Report> {
    let selected: Vec<&Record> = records.iter().filter(|r| scenario.is_none_or(|s| r.scenario == s)).collect();
    if selected.is_empty() {
        match scenario {
            Some(s) => bail!("empty report: no records for scenario `{s}`"),
            None => bail!("empty report: the store has no records"),
        }
    }
    let rows: Vec<ReportRow> = selected
        .iter()
        .map(|r| {
            let t = thresholds::lookup(&r.scenario, &r.quantity);
            ReportRow {
                criterion: t.map(|t| t.criterion),
                threshold_id: t.map(|t| t.id),
                scenario: r.scenario.clone(),
                quantity: r.quantity.clone(),
                n: r.n,
                delta: r.delta,
                alpha: r.alpha,
                beta: r.beta,
                value: r.value,
                rule: t.map(|t| t.rule),
                known_failure: t.and_then(|t| t.known_failure),
                verdict: r.verdict,
            }
        })
        .collect();
    let passed = rows.iter().filter(|r| r.verdict == Verdict::Pass).count();
    let failed = rows.iter().filter(|r| r.verdict.is_failure()).count();
    Ok(Report { threshold_table: thresholds::TABLE_VERSION, scenario: scenario.map(str::to_string), rows, passed, failed })
}

pub fn write_json(dir: &Path, report: &Report) -> Result<()> {
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(scenario: &str, quantity: &str, verdict: Verdict) -> Record {
        let mut r = Record::new(scenario, quantity, 1.0, 1);
        r.verdict = verdict;
        r
    }

    #[test]
    fn exit_codes_and_filter() {
        let all_pass = [rec("reconstruct", "max_residual", Verdict::Pass), rec("converge", "error_ratio", Verdict::Pass)];
        let r = build(&all_pass, None).unwrap();
        assert_eq!(r.exit_code(), 0);
        assert!(r.table().contains("max_residual"));
        let mixed = [rec("reconstruct", "max_residual", Verdict::Pass), rec("converge", "error_ratio", Verdict::Fail)];
        let r = build(&mixed, None).unwrap();
        assert_eq!(r.exit_code(), 1);
        assert!(r.table().contains("FAIL"));
        let only = build(&mixed, Some("reconstruct")).unwrap();
        assert_eq!(only.rows.len(), 1);
        assert_eq!(only.exit_code(), 0);
        assert!(build(&mixed, Some("a2-check")).unwrap_err().to_string().contains("empty report"));
        assert!(build(&[], None).is_err());
    }

    #[test]
    fn rows_cite_the_table() {
        let r = build(&[rec("slice-volume", "kendall_tau", Verdict::Fail)], None).unwrap();
        assert_eq!(r.rows[0].threshold_id, Some("C6.tau"));
        assert!(r.rows[0].known_failure.is_some());
        assert!(r.table().contains("FAIL*"));
    }
}

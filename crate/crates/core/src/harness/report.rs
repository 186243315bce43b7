use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::{HarnessError, RankedCandidate, RecordError};
use crate::classify::{classification_report, ClassificationReport, ConfusionTable};
use crate::config::EvalConfig;
use crate::metrics::{ScoreBreakdown, SubScores};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateSummary {
    pub candidate_index: usize,
    pub rank: usize,
    pub composite: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// The top-ranked candidate of one record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordRow {
    pub id: String,
    pub candidates: usize,
    pub best_candidate: usize,
    pub breakdown: ScoreBreakdown,
    pub ranking: Vec<CandidateSummary>,
}

impl RecordRow {
    pub(crate) fn new(
        id: &str,
        candidates: usize,
        best_candidate: usize,
        breakdown: ScoreBreakdown,
        ranking: &[RankedCandidate],
    ) -> Self {
        RecordRow {
            id: id.to_string(),
            candidates,
            best_candidate,
            breakdown,
            ranking: ranking
                .iter()
                .map(|r| CandidateSummary {
                    candidate_index: r.candidate_index,
                    rank: r.rank,
                    composite: r.composite(),
                    error: r.error.clone(),
                })
                .collect(),
        }
    }

    fn values(&self) -> [f64; 9] {
        let s = self.breakdown.scores.values();
        [s[0], s[1], s[2], s[3], s[4], s[5], s[6], s[7], self.breakdown.composite]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct SubScoreStats {
    pub mean: f64,
    pub median: f64,
}

impl SubScoreStats {
    fn of(mut xs: Vec<f64>) -> Self {
        if xs.is_empty() {
            return SubScoreStats::default();
        }
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.sort_by(f64::total_cmp);
        let n = xs.len();
        let median = if n % 2 == 1 {
            xs[n / 2]
        } else {
            (xs[n / 2 - 1] + xs[n / 2]) / 2.0
        };
        SubScoreStats { mean, median }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub records: usize,
    /// Keyed by sub-score name plus `composite`.
    pub scores: BTreeMap<String, SubScoreStats>,
}

const COLUMNS: [&str; 9] = ["wc", "vu", "is", "or", "rc", "cc", "pl", "compile", "composite"];

impl Aggregate {
    fn of(rows: &[RecordRow]) -> Self {
        debug_assert_eq!(&COLUMNS[..8], &SubScores::NAMES);
        let scores = COLUMNS
            .iter()
            .enumerate()
            .map(|(i, name)| {
                (
                    name.to_string(),
                    SubScoreStats::of(rows.iter().map(|r| r.values()[i]).collect()),
                )
            })
            .collect();
        Aggregate {
            records: rows.len(),
            scores,
        }
    }

    pub fn mean(&self, name: &str) -> Option<f64> {
        self.scores.get(name).map(|s| s.mean)
    }
}

/// Canonical output of a dataset run. Contains no timestamps, so identical
/// inputs give byte-identical JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub tool_version: String,
    pub config: EvalConfig,
    pub aggregate: Aggregate,
    pub classification: ClassificationReport,
    pub records: Vec<RecordRow>,
    pub errors: Vec<RecordError>,
}

fn csv_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Emit(e.to_string())
}

impl Report {
    pub(crate) fn assemble(
        rows: Vec<RecordRow>,
        errors: Vec<RecordError>,
        confusion: &ConfusionTable,
        config: &EvalConfig,
    ) -> Self {
        Report {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            aggregate: Aggregate::of(&rows),
            classification: classification_report(confusion),
            records: rows,
            errors,
        }
    }

    pub fn has_errors(&self) -> bool {
        !self.errors.is_empty()
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        serde_json::to_string_pretty(self).map_err(csv_err)
    }

    /// Flat per-record rows; errored records have empty score cells.
    pub fn to_csv(&self) -> Result<String, HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["id", "best_candidate"];
        header.extend(COLUMNS);
        header.push("error");
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.records {
            let mut row = vec![r.id.clone(), r.best_candidate.to_string()];
            row.extend(r.values().iter().map(|v| format!("{v:.6}")));
            row.push(String::new());
            w.write_record(&row).map_err(csv_err)?;
        }
        for e in &self.errors {
            let mut row = vec![e.id.clone()];
            row.extend(std::iter::repeat_n(String::new(), COLUMNS.len() + 1));
            row.push(e.message.clone());
            w.write_record(&row).map_err(csv_err)?;
        }
        String::from_utf8(w.into_inner().map_err(csv_err)?).map_err(csv_err)
    }

    /// Clause by F1 matrix, one row per vocabulary keyword.
    pub fn per_clause_f1_csv(&self) -> Result<String, HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["clause", "f1"]).map_err(csv_err)?;
        for (k, v) in &self.classification.per_clause_f1 {
            w.write_record([k.clone(), v.to_string()]).map_err(csv_err)?;
        }
        String::from_utf8(w.into_inner().map_err(csv_err)?).map_err(csv_err)
    }

    pub fn to_table(&self) -> String {
        let id_w = self
            .records
            .iter()
            .map(|r| r.id.len())
            .chain(self.errors.iter().map(|e| e.id.len()))
            .chain([6])
            .max()
            .unwrap_or(6);
        let mut out = String::new();
        let _ = write!(out, "{:<id_w$}", "record");
        for c in COLUMNS {
            let _ = write!(out, " {c:>9}");
        }
        out.push('\n');
        for r in &self.records {
            let _ = write!(out, "{:<id_w$}", r.id);
            for v in r.values() {
                let _ = write!(out, " {v:>9.4}");
            }
            out.push('\n');
        }
        for (label, pick) in [("mean", true), ("median", false)] {
            let _ = write!(out, "{label:<id_w$}");
            for c in COLUMNS {
                let s = self.aggregate.scores[c];
                let _ = write!(out, " {:>9.4}", if pick { s.mean } else { s.median });
            }
            out.push('\n');
        }
        let c = &self.classification;
        let _ = writeln!(
            out,
            "\nclauses: precision {} recall {} f1 {} (tp {} fp {} fn {})",
            c.precision, c.recall, c.f1, c.counts.tp, c.counts.fp, c.counts.fn_
        );
        for e in &self.errors {
            let _ = writeln!(out, "error {}: {}", e.id, e.message);
        }
        out
    }
}

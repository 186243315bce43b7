//! Batch evaluation: datasets, score@k ranking, reports.

mod dataset;
mod report;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::classify::{clause_confusion, ClauseVocabulary, ConfusionTable, VocabularyError};
use crate::config::{ConfigError, EvalConfig};
use crate::metrics::{CodeAnalysis, EvalError, Evaluator, ScoreBreakdown};

pub use dataset::{
    load_dataset, load_dirs, load_jsonl, parse_jsonl, DatasetFormat, DatasetRecord, LoadedDataset, RecordError,
};
pub use report::{Aggregate, RecordRow, Report, SubScoreStats};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("no records")]
    NoRecords,
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Vocabulary(#[from] VocabularyError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("cannot build worker pool: {0}")]
    Pool(String),
    #[error("cannot write report: {0}")]
    Emit(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedCandidate {
    pub candidate_index: usize,
    /// 1-based.
    pub rank: usize,
    pub breakdown: Option<ScoreBreakdown>,
    pub error: Option<String>,
}

impl RankedCandidate {
    pub fn composite(&self) -> Option<f64> {
        self.breakdown.as_ref().map(|b| b.composite)
    }
}

/// Score every candidate and order them by descending composite.
///
/// Ties go to the lower index; candidates that failed to score rank last.
pub fn rank_candidates(reference: &str, candidates: &[String], evaluator: &Evaluator) -> Vec<RankedCandidate> {
    let mut ranked: Vec<RankedCandidate> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let (breakdown, error) = match evaluator.score(reference, c) {
                Ok(b) => (Some(b), None),
                Err(e) => (None, Some(e.to_string())),
            };
            RankedCandidate {
                candidate_index: i,
                rank: 0,
                breakdown,
                error,
            }
        })
        .collect();
    ranked.sort_by(|a, b| match (a.composite(), b.composite()) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(a.candidate_index.cmp(&b.candidate_index)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.candidate_index.cmp(&b.candidate_index),
    });
    for (r, c) in ranked.iter_mut().enumerate() {
        c.rank = r + 1;
    }
    ranked
}

pub fn clause_vocabulary(config: &EvalConfig) -> Result<ClauseVocabulary, VocabularyError> {
    match &config.clause_vocabulary {
        Some(p) => ClauseVocabulary::load(p),
        None => Ok(ClauseVocabulary::builtin()),
    }
}

struct Scored {
    row: RecordRow,
    confusion: ConfusionTable,
}

fn score_record(r: &DatasetRecord, evaluator: &Evaluator, vocab: &ClauseVocabulary) -> Result<Scored, RecordError> {
    let ranking = rank_candidates(&r.reference, &r.candidates, evaluator);
    let best = &ranking[0];
    let Some(breakdown) = best.breakdown.clone() else {
        return Err(RecordError {
            id: r.id.clone(),
            message: format!(
                "no candidate could be scored: {}",
                best.error.as_deref().unwrap_or("unknown error")
            ),
        });
    };
    let opts = evaluator.parse_options();
    let gt = CodeAnalysis::new(&r.reference, opts);
    let gen = CodeAnalysis::new(&r.candidates[best.candidate_index], opts);
    Ok(Scored {
        confusion: clause_confusion(&gt.directives, &gen.directives, vocab),
        row: RecordRow::new(&r.id, r.candidates.len(), best.candidate_index, breakdown, &ranking),
    })
}

/// Score already-loaded records on `jobs` workers (0 = all cores).
pub fn evaluate_records(dataset: LoadedDataset, config: &EvalConfig, jobs: usize) -> Result<Report, HarnessError> {
    if dataset.records.is_empty() && dataset.errors.is_empty() {
        return Err(HarnessError::NoRecords);
    }
    let evaluator = Evaluator::new(config)?;
    let vocab = clause_vocabulary(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let results: Vec<Result<Scored, RecordError>> = pool.install(|| {
        dataset
            .records
            .par_iter()
            .map(|r| score_record(r, &evaluator, &vocab))
            .collect()
    });

    let mut rows = Vec::new();
    let mut errors = dataset.errors;
    let mut confusion = ConfusionTable::default();
    for r in results {
        match r {
            Ok(s) => {
                confusion = confusion.merge(&s.confusion);
                rows.push(s.row);
            }
            Err(e) => errors.push(e),
        }
    }
    rows.sort_by(|a, b| a.id.cmp(&b.id));
    errors.sort_by(|a, b| a.id.cmp(&b.id).then(a.message.cmp(&b.message)));
    Ok(Report::assemble(rows, errors, &confusion, config))
}

pub fn evaluate_dataset(
    path: &Path,
    format: DatasetFormat,
    config: &EvalConfig,
    jobs: usize,
) -> Result<Report, HarnessError> {
    evaluate_records(load_dataset(path, format)?, config, jobs)
}

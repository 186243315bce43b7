//! Clause-level presence confusion matrices and precision/recall/F1.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::syntax::{squash_ws, ClauseKind, Directive};

const BUILTIN_VOCABULARY: &str = include_str!("../data/clause_vocabulary.txt");

#[derive(Debug, Error)]
pub enum VocabularyError {
    #[error("duplicate vocabulary entry `{0}`")]
    Duplicate(String),
    #[error("vocabulary is empty")]
    Empty,
    #[error("cannot read vocabulary {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Ordered directive and clause keywords.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClauseVocabulary {
    kinds: Vec<String>,
}

impl ClauseVocabulary {
    /// One keyword per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, VocabularyError> {
        let mut seen = BTreeSet::new();
        let mut kinds = Vec::new();
        for line in text.lines() {
            let entry = squash_ws(line.split('#').next().unwrap_or_default());
            if entry.is_empty() {
                continue;
            }
            if !seen.insert(entry.clone()) {
                return Err(VocabularyError::Duplicate(entry));
            }
            kinds.push(entry);
        }
        if kinds.is_empty() {
            return Err(VocabularyError::Empty);
        }
        Ok(ClauseVocabulary { kinds })
    }

    pub fn load(path: &Path) -> Result<Self, VocabularyError> {
        let text = std::fs::read_to_string(path).map_err(|source| VocabularyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn builtin() -> Self {
        Self::parse(BUILTIN_VOCABULARY).expect("built-in vocabulary is well formed")
    }

    pub fn kinds(&self) -> &[String] {
        &self.kinds
    }

    pub fn size(&self) -> usize {
        self.kinds.len()
    }

    pub fn contains(&self, kind: &str) -> bool {
        self.kinds.iter().any(|k| k == kind)
    }
}

impl Default for ClauseVocabulary {
    fn default() -> Self {
        Self::builtin()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    fn add(&mut self, o: &ConfusionCounts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
    }

    fn record(&mut self, in_gt: bool, in_gen: bool) {
        match (in_gt, in_gen) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }
}

/// Confusion counts per vocabulary keyword over one or more cases.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionTable {
    pub per_kind: BTreeMap<String, ConfusionCounts>,
    /// Keywords outside the vocabulary; never contribute true negatives.
    pub unknown: BTreeMap<String, ConfusionCounts>,
    pub cases: u64,
    pub diagnostics: Vec<String>,
}

impl ConfusionTable {
    pub fn aggregate(&self) -> ConfusionCounts {
        let mut total = ConfusionCounts::default();
        self.per_kind.values().for_each(|c| total.add(c));
        total
    }

    /// Combine two tables; associative and commutative.
    pub fn merge(mut self, other: &ConfusionTable) -> ConfusionTable {
        for (k, c) in &other.per_kind {
            self.per_kind.entry(k.clone()).or_default().add(c);
        }
        for (k, c) in &other.unknown {
            self.unknown.entry(k.clone()).or_default().add(c);
        }
        self.cases += other.cases;
        self.diagnostics.extend(other.diagnostics.iter().cloned());
        self
    }
}

/// Directive names and clause names present on one side.
fn present_keywords(ds: &[Directive]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for d in ds {
        out.insert(d.name());
        for c in &d.clauses {
            match c.kind {
                // Arguments of a directive, not clauses.
                ClauseKind::CriticalName => {}
                ClauseKind::Unknown if c.name.ends_with("-args") => {}
                ClauseKind::Unknown => {
                    out.insert(c.name.clone());
                }
                k => {
                    out.insert(k.as_str().to_string());
                }
            }
        }
    }
    out
}

/// Presence confusion of one case.
pub fn clause_confusion(gt: &[Directive], gen: &[Directive], vocab: &ClauseVocabulary) -> ConfusionTable {
    let (g, c) = (present_keywords(gt), present_keywords(gen));
    let mut table = ConfusionTable {
        cases: 1,
        ..ConfusionTable::default()
    };
    for k in vocab.kinds() {
        table
            .per_kind
            .entry(k.clone())
            .or_default()
            .record(g.contains(k), c.contains(k));
    }
    for k in g.union(&c).filter(|k| !vocab.contains(k)) {
        table
            .diagnostics
            .push(format!("keyword `{k}` is outside the vocabulary"));
        table
            .unknown
            .entry(k.clone())
            .or_default()
            .record(g.contains(k), c.contains(k));
    }
    table
}

/// A percentage truncated (not rounded) to two decimals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Percent {
    hundredths: u64,
}

impl Percent {
    /// `floor(10000 · num / den) / 100`, in exact integer arithmetic.
    pub fn from_ratio(num: u64, den: u64) -> Option<Percent> {
        (den != 0).then(|| Percent {
            hundredths: (10_000 * u128::from(num) / u128::from(den)) as u64,
        })
    }

    pub fn hundredths(self) -> u64 {
        self.hundredths
    }

    pub fn value(self) -> f64 {
        self.hundredths as f64 / 100.0
    }
}

impl std::fmt::Display for Percent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{:02}", self.hundredths / 100, self.hundredths % 100)
    }
}

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.value())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClauseF1 {
    Score(f64),
    /// The keyword never appears in the reference; distinct from a score of 0.
    AbsentInGt,
}

impl Serialize for ClauseF1 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ClauseF1::Score(v) => s.serialize_f64(*v),
            ClauseF1::AbsentInGt => s.serialize_str("absent_in_gt"),
        }
    }
}

impl std::fmt::Display for ClauseF1 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ClauseF1::Score(v) => write!(f, "{v:.4}"),
            ClauseF1::AbsentInGt => f.write_str("absent_in_gt"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub counts: ConfusionCounts,
    pub precision: Percent,
    pub recall: Percent,
    pub f1: Percent,
    pub per_clause_f1: BTreeMap<String, ClauseF1>,
    pub diagnostics: Vec<String>,
}

fn f1_parts(c: &ConfusionCounts) -> (u64, u64) {
    (2 * c.tp, 2 * c.tp + c.fp + c.fn_)
}

pub fn classification_report(table: &ConfusionTable) -> ClassificationReport {
    let counts = table.aggregate();
    let mut diagnostics = Vec::new();
    let mut pct = |name: &str, num: u64, den: u64| {
        Percent::from_ratio(num, den).unwrap_or_else(|| {
            diagnostics.push(format!("{name} is undefined (zero denominator); reported as 0"));
            Percent::default()
        })
    };
    let precision = pct("precision", counts.tp, counts.tp + counts.fp);
    let recall = pct("recall", counts.tp, counts.tp + counts.fn_);
    let (n, d) = f1_parts(&counts);
    let f1 = pct("f1", n, d);
    let per_clause_f1 = table
        .per_kind
        .iter()
        .map(|(k, c)| {
            let v = if c.tp + c.fn_ == 0 {
                ClauseF1::AbsentInGt
            } else {
                let (n, d) = f1_parts(c);
                ClauseF1::Score(n as f64 / d as f64)
            };
            (k.clone(), v)
        })
        .collect();
    ClassificationReport {
        counts,
        precision,
        recall,
        f1,
        per_clause_f1,
        diagnostics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{extract_directives, SourceUnit};

    fn dirs(src: &str) -> Vec<Directive> {
        extract_directives(&SourceUnit::new(src))
    }

    fn counts(tp: u64, fp: u64, fn_: u64) -> ConfusionTable {
        ConfusionTable {
            per_kind: BTreeMap::from([("x".to_string(), ConfusionCounts { tp, fp, fn_, tn: 0 })]),
            cases: 1,
            ..ConfusionTable::default()
        }
    }

    #[test]
    fn builtin_has_54_entries() {
        assert_eq!(ClauseVocabulary::builtin().size(), 54);
        assert!(matches!(
            ClauseVocabulary::parse("a\nb\n a \n"),
            Err(VocabularyError::Duplicate(_))
        ));
        assert!(matches!(
            ClauseVocabulary::parse("# only\n"),
            Err(VocabularyError::Empty)
        ));
    }

    #[test]
    fn set_partition() {
        let v = ClauseVocabulary::builtin();
        let gt = dirs("#pragma omp for reduction(+:s)\nfor(;;){}");
        let gen = dirs("#pragma omp for reduction(+:s) private(i)\nfor(;;){}");
        let a = clause_confusion(&gt, &gen, &v).aggregate();
        // `for` and `reduction` agree, `private` is extra.
        assert_eq!((a.tp, a.fp, a.fn_, a.tn), (2, 1, 0, 51));
        let same = clause_confusion(&gt, &gt, &v).aggregate();
        assert_eq!((same.fp, same.fn_), (0, 0));
    }

    #[test]
    fn combined_names_are_distinct() {
        let v = ClauseVocabulary::builtin();
        let gt = dirs("#pragma omp parallel\n{\n#pragma omp for\nfor(;;){\n#pragma omp critical\n{}\n}\n}");
        let gen = dirs("#pragma omp parallel for reduction(+:s)\nfor(;;){}");
        let t = clause_confusion(&gt, &gen, &v);
        assert_eq!(t.per_kind["critical"].fn_, 1);
        assert_eq!(t.per_kind["parallel for"].fp, 1);
        assert_eq!(t.per_kind["parallel"].fn_, 1);
    }

    #[test]
    fn unknown_bucket_and_swap() {
        let v = ClauseVocabulary::builtin();
        let gt = dirs("#pragma omp parallel for num_teams(4) private(i)\nfor(;;){}");
        let gen = dirs("#pragma omp parallel for shared(a)\nfor(;;){}");
        let t = clause_confusion(&gt, &gen, &v);
        assert!(t.unknown.contains_key("num_teams"));
        assert_eq!(t.aggregate().total(), 54);
        let s = clause_confusion(&gen, &gt, &v).aggregate();
        let a = t.aggregate();
        assert_eq!((a.tp, a.tn, a.fp, a.fn_), (s.tp, s.tn, s.fn_, s.fp));
    }

    #[test]
    fn critical_name_is_not_a_clause() {
        let v = ClauseVocabulary::builtin();
        let gt = dirs("#pragma omp critical(lock)\n{}");
        let t = clause_confusion(&gt, &gt, &v);
        assert!(t.unknown.is_empty());
        assert_eq!(t.aggregate().tp, 1);
    }

    #[test]
    fn report_examples() {
        let r = classification_report(&counts(39, 13, 29));
        assert_eq!(
            (r.precision.to_string(), r.recall.to_string(), r.f1.to_string()),
            ("75.00".into(), "57.35".into(), "65.00".into())
        );
        let r = classification_report(&counts(9, 3, 59));
        assert_eq!(
            (r.precision.to_string(), r.recall.to_string(), r.f1.to_string()),
            ("75.00".into(), "13.23".into(), "22.50".into())
        );
        let r = classification_report(&counts(0, 0, 0));
        assert_eq!(r.f1, Percent::default());
        assert_eq!(r.diagnostics.len(), 3);
        assert_eq!(r.per_clause_f1["x"], ClauseF1::AbsentInGt);
    }

    #[test]
    fn merge_is_commutative() {
        let v = ClauseVocabulary::builtin();
        let a = clause_confusion(&dirs("#pragma omp for\nfor(;;){}"), &dirs(""), &v);
        let b = clause_confusion(&dirs(""), &dirs("#pragma omp single\n{}"), &v);
        let ab = a.clone().merge(&b);
        let ba = b.clone().merge(&a);
        assert_eq!(ab.aggregate(), ba.aggregate());
        assert_eq!(ab.aggregate().total(), 2 * 54);
    }
}

//! OMPBLEU sub-scores and the weighted composite.

mod scores;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compile::{CompileError, Compiler};
use crate::config::{ConfigError, EvalConfig};
use crate::similarity::{SimilarityEngine, SimilarityError};
use crate::syntax::{extract_directives, parallel_region_blocks, ClauseComponent, Directive, ParseOptions, SourceUnit};

pub use scores::{
    cyclomatic_ratio, directive_string, forgiven_components, integrated_semantic_score, loop_index_penalty,
    ordering_score, pragma_location_score, redundancy_coverage_score, variable_usage_score, weighted_clause_score,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClauseWeightTable {
    pub default_weight: f64,
    /// Clause name to weight; names not listed get `default_weight`.
    pub weights: BTreeMap<String, f64>,
}

impl Default for ClauseWeightTable {
    fn default() -> Self {
        ClauseWeightTable {
            default_weight: 1.0,
            weights: BTreeMap::from([("reduction".to_string(), 5.0)]),
        }
    }
}

impl ClauseWeightTable {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |w: f64| !(w > 0.0 && w.is_finite());
        if bad(self.default_weight) {
            return Err(ConfigError::Invalid(format!(
                "default clause weight must be > 0, got {}",
                self.default_weight
            )));
        }
        if let Some((name, w)) = self.weights.iter().find(|(_, &w)| bad(w)) {
            return Err(ConfigError::Invalid(format!(
                "clause weight for `{name}` must be > 0, got {w}"
            )));
        }
        Ok(())
    }

    pub fn weight(&self, c: &ClauseComponent) -> f64 {
        let name = c.canonical.split('(').next().unwrap_or_default();
        self.weights.get(name).copied().unwrap_or(self.default_weight)
    }
}

/// Composite weights (must sum to 1) and the IS blend factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricWeights {
    pub wc: f64,
    pub vu: f64,
    pub is: f64,
    pub or: f64,
    pub rc: f64,
    pub cc: f64,
    pub pl: f64,
    pub compile: f64,
    pub is_blend_alpha: f64,
}

impl Default for MetricWeights {
    fn default() -> Self {
        MetricWeights {
            wc: 0.3,
            vu: 0.05,
            is: 0.10,
            or: 0.05,
            rc: 0.05,
            cc: 0.05,
            pl: 0.2,
            compile: 0.2,
            is_blend_alpha: 0.7,
        }
    }
}

impl MetricWeights {
    fn as_array(&self) -> [(&'static str, f64); 8] {
        [
            ("wc", self.wc),
            ("vu", self.vu),
            ("is", self.is),
            ("or", self.or),
            ("rc", self.rc),
            ("cc", self.cc),
            ("pl", self.pl),
            ("compile", self.compile),
        ]
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, w) in self
            .as_array()
            .into_iter()
            .chain([("is_blend_alpha", self.is_blend_alpha)])
        {
            if !(0.0..=1.0).contains(&w) {
                return Err(ConfigError::Invalid(format!(
                    "weight `{name}` must lie in [0, 1], got {w}"
                )));
            }
        }
        let sum: f64 = self.as_array().iter().map(|(_, w)| w).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ConfigError::Invalid(format!(
                "composite weights must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SubScores {
    pub wc: f64,
    pub vu: f64,
    pub is: f64,
    pub or: f64,
    pub rc: f64,
    pub cc: f64,
    pub pl: f64,
    pub compile: f64,
}

impl SubScores {
    pub const NAMES: [&'static str; 8] = ["wc", "vu", "is", "or", "rc", "cc", "pl", "compile"];

    pub fn values(&self) -> [f64; 8] {
        [
            self.wc,
            self.vu,
            self.is,
            self.or,
            self.rc,
            self.cc,
            self.pl,
            self.compile,
        ]
    }
}

/// `100 · Σ weight · sub-score`.
pub fn compose(s: &SubScores, w: &MetricWeights) -> f64 {
    100.0
        * s.values()
            .iter()
            .zip(w.as_array())
            .map(|(v, (_, w))| v * w)
            .sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub metric: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Diagnostics(pub Vec<Diagnostic>);

impl Diagnostics {
    pub fn push(&mut self, metric: &str, message: String) {
        self.0.push(Diagnostic {
            metric: metric.to_string(),
            message,
        });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    #[serde(flatten)]
    pub scores: SubScores,
    pub composite: f64,
    pub diagnostics: Diagnostics,
}

/// One side of a comparison, parsed once.
#[derive(Debug, Clone)]
pub struct CodeAnalysis {
    pub unit: SourceUnit,
    pub directives: Vec<Directive>,
}

impl CodeAnalysis {
    pub fn new(text: &str, options: ParseOptions) -> Self {
        let unit = SourceUnit::with_options(text, options);
        let directives = extract_directives(&unit);
        CodeAnalysis { unit, directives }
    }
}

/// Scores code pairs under one configuration; cheap to share across threads.
#[derive(Debug, Clone)]
pub struct Evaluator {
    weights: MetricWeights,
    clause_weights: ClauseWeightTable,
    options: ParseOptions,
    engine: SimilarityEngine,
    compiler: Arc<Compiler>,
}

impl Evaluator {
    pub fn new(config: &EvalConfig) -> Result<Self, EvalError> {
        config.validate()?;
        Ok(Evaluator {
            weights: config.weights,
            clause_weights: config.clause_weights.clone(),
            options: ParseOptions {
                relaxed_pragma: config.relaxed_pragma,
            },
            engine: SimilarityEngine::new(config.backend.clone()),
            compiler: Arc::new(Compiler::new(config.compile.clone())?),
        })
    }

    pub fn weights(&self) -> &MetricWeights {
        &self.weights
    }

    pub fn compiler(&self) -> &Compiler {
        &self.compiler
    }

    pub fn parse_options(&self) -> ParseOptions {
        self.options
    }

    /// Full pipeline, compiling `gen_code`.
    pub fn score(&self, gt_code: &str, gen_code: &str) -> Result<ScoreBreakdown, EvalError> {
        let result = self.compiler.compile_score(gen_code)?;
        let mut b = self.score_with_compile(gt_code, gen_code, result.score)?;
        if result.score == 0 {
            let excerpt: String = result.diagnostics.lines().take(8).collect::<Vec<_>>().join("\n");
            b.diagnostics.push("compile", format!("compilation failed:\n{excerpt}"));
        }
        Ok(b)
    }

    /// Every sub-score except compilation, which the caller supplies.
    pub fn score_with_compile(&self, gt_code: &str, gen_code: &str, compile: u8) -> Result<ScoreBreakdown, EvalError> {
        let gt = CodeAnalysis::new(gt_code, self.options);
        let gen = CodeAnalysis::new(gen_code, self.options);
        self.score_analyses(&gt, &gen, compile)
    }

    pub fn score_analyses(
        &self,
        gt: &CodeAnalysis,
        gen: &CodeAnalysis,
        compile: u8,
    ) -> Result<ScoreBreakdown, EvalError> {
        let mut d = Diagnostics::default();
        for (side, a) in [("reference", gt), ("generated", gen)] {
            if a.unit.is_degraded() {
                d.push(
                    "parse",
                    format!("{side} code has unbalanced brackets; directives extracted textually"),
                );
            }
        }
        let (gr, cr) = (parallel_region_blocks(&gt.unit), parallel_region_blocks(&gen.unit));
        let scores = SubScores {
            wc: weighted_clause_score(&gt.directives, &gen.directives, &self.clause_weights, &mut d),
            vu: variable_usage_score(&gt.directives, &gen.directives, &mut d),
            is: integrated_semantic_score(
                gt.unit.text(),
                gen.unit.text(),
                &gt.directives,
                &gen.directives,
                &self.engine,
                self.weights.is_blend_alpha,
            )?,
            or: ordering_score(&gt.directives, &gen.directives, &mut d),
            rc: redundancy_coverage_score(&gt.directives, &gen.directives, &mut d),
            cc: cyclomatic_ratio(&gr.blocks, &cr.blocks, &mut d),
            pl: pragma_location_score(
                &gt.unit,
                &gt.directives,
                &gen.unit,
                &gen.directives,
                &self.engine,
                &mut d,
            )?,
            compile: f64::from(compile.min(1)),
        };
        for msg in cr.diagnostics {
            d.push("cc", format!("generated: {msg}"));
        }
        Ok(ScoreBreakdown {
            composite: compose(&scores, &self.weights),
            scores,
            diagnostics: d,
        })
    }
}

/// Score one pair under `config`.
pub fn ompbleu(gt_source: &str, gen_source: &str, config: &EvalConfig) -> Result<ScoreBreakdown, EvalError> {
    Evaluator::new(config)?.score(gt_source, gen_source)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_weights_are_valid() {
        MetricWeights::default().validate().unwrap();
        let w = MetricWeights {
            wc: 0.4,
            ..MetricWeights::default()
        };
        assert!(w.validate().is_err());
    }

    #[test]
    fn compose_examples() {
        let w = MetricWeights::default();
        let ones = SubScores {
            wc: 1.0,
            vu: 1.0,
            is: 1.0,
            or: 1.0,
            rc: 1.0,
            cc: 1.0,
            pl: 1.0,
            compile: 1.0,
        };
        assert!((compose(&ones, &w) - 100.0).abs() < 1e-9);
        let printed = SubScores {
            wc: 0.16,
            vu: 0.8,
            is: 0.90,
            or: 0.0,
            rc: 0.5,
            ..SubScores::default()
        };
        assert!((compose(&printed, &w) - 20.51).abs() <= 0.5);
    }

    #[test]
    fn compose_is_linear() {
        let w = MetricWeights::default();
        let base = SubScores {
            wc: 0.2,
            pl: 0.3,
            ..SubScores::default()
        };
        let bumped = SubScores { pl: 0.5, ..base };
        assert!((compose(&bumped, &w) - compose(&base, &w) - 100.0 * 0.2 * 0.2).abs() < 1e-9);
    }

    #[test]
    fn clause_weights() {
        let t = ClauseWeightTable::default();
        let r = ClauseComponent {
            kind: crate::syntax::ClauseKind::Reduction,
            canonical: "reduction(+:s)".into(),
        };
        assert_eq!(t.weight(&r), 5.0);
        assert!(ClauseWeightTable {
            default_weight: 0.0,
            ..t
        }
        .validate()
        .is_err());
    }
}

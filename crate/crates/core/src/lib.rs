//! Static scoring of OpenMP parallelizations against expert references.

pub mod classify;
pub mod compile;
pub mod config;
pub mod harness;
pub mod metrics;
pub mod pretrain;
pub mod similarity;
pub mod syntax;

pub use config::{ConfigError, EvalConfig};
pub use metrics::{ompbleu, EvalError, Evaluator, ScoreBreakdown};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compile::CompileConfig;
use crate::metrics::{ClauseWeightTable, MetricWeights};
use crate::similarity::SimilarityBackend;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
}

/// Everything that influences a score; loaded from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub weights: MetricWeights,
    pub clause_weights: ClauseWeightTable,
    pub backend: SimilarityBackend,
    pub compile: CompileConfig,
    /// Accept `# pragma OMP` spellings.
    pub relaxed_pragma: bool,
    /// Clause vocabulary file for classification; the built-in list when unset.
    pub clause_vocabulary: Option<PathBuf>,
    /// Tag vocabulary file for syntax annotation; the built-in list when unset.
    pub tag_vocabulary: Option<PathBuf>,
}

impl EvalConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: EvalConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::from("<inline>"),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: EvalConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        // Relative vocabulary paths are relative to the config file.
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.clause_vocabulary, &mut cfg.tag_vocabulary]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.weights.validate()?;
        self.clause_weights.validate()?;
        self.compile
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let SimilarityBackend::RemoteEmbedding {
            endpoint, timeout_secs, ..
        } = &self.backend
        {
            if endpoint.is_empty() {
                return Err(ConfigError::Invalid("remote embedding endpoint is empty".into()));
            }
            if timeout_secs.is_nan() || *timeout_secs <= 0.0 {
                return Err(ConfigError::Invalid("remote embedding timeout must be positive".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_toml_is_default() {
        assert_eq!(EvalConfig::from_toml_str("").unwrap(), EvalConfig::default());
    }

    #[test]
    fn overrides() {
        let cfg = EvalConfig::from_toml_str(
            r#"
            [weights]
            wc = 0.25
            vu = 0.10
            [clause_weights.weights]
            reduction = 3.0
            schedule = 2.0
            [backend]
            kind = "remote_embedding"
            endpoint = "http://localhost:1"
            model_id = "codebert"
            [compile]
            compiler_command = ["clang"]
            mode = "full"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.weights.wc, 0.25);
        assert_eq!(cfg.clause_weights.weights["schedule"], 2.0);
        assert!(matches!(cfg.backend, SimilarityBackend::RemoteEmbedding { .. }));
        assert_eq!(cfg.compile.compiler_command, vec!["clang"]);
    }

    #[test]
    fn bad_configs() {
        assert!(EvalConfig::from_toml_str("[weights]\nwc = 0.9\n").is_err());
        assert!(EvalConfig::from_toml_str("bogus = 1\n").is_err());
        assert!(EvalConfig::from_toml_str("[clause_weights.weights]\nreduction = -1.0\n").is_err());
    }
}

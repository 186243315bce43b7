//! Edit-distance, subsequence and cosine similarity kernels.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::syntax::{tokenize, TokenKind};

#[derive(Debug, Error)]
pub enum SimilarityError {
    #[error("embedding request to {endpoint} failed: {reason}")]
    Request { endpoint: String, reason: String },
    #[error("embedding response from {endpoint} is malformed: {reason}")]
    Malformed { endpoint: String, reason: String },
}

/// Character-level Levenshtein distance.
pub fn levenshtein(a: &str, b: &str) -> usize {
    if a.is_ascii() && b.is_ascii() {
        return edit_distance(a.as_bytes(), b.as_bytes());
    }
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    edit_distance(&a, &b)
}

fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    // One row plus the diagonal carried in a local.
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = (diag + usize::from(ca != cb)).min(up + 1).min(row[j] + 1);
            diag = up;
        }
    }
    row[b.len()]
}

/// `1 - D(a, b) / max(|a|, |b|)`; two empty strings are identical.
pub fn lev_similarity(a: &str, b: &str) -> f64 {
    let longest = if a.is_ascii() && b.is_ascii() {
        a.len().max(b.len())
    } else {
        a.chars().count().max(b.chars().count())
    };
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `2·LCS / (|a| + |b|)`; two empty sequences match vacuously.
pub fn lcs_ratio<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    2.0 * lcs_len(a, b) as f64 / (a.len() + b.len()) as f64
}

/// Bag of code tokens (comments and whitespace excluded).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SparseTokenVector {
    counts: BTreeMap<String, u64>,
}

impl SparseTokenVector {
    pub fn from_code(text: &str) -> Self {
        let mut counts = BTreeMap::new();
        for t in tokenize(text) {
            if !matches!(t.kind, TokenKind::Whitespace | TokenKind::Comment) {
                *counts.entry(t.lexeme).or_insert(0) += 1;
            }
        }
        SparseTokenVector { counts }
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn cosine(&self, other: &Self) -> f64 {
        match (self.is_empty(), other.is_empty()) {
            (true, true) => return 1.0,
            (true, false) | (false, true) => return 0.0,
            _ => {}
        }
        // Integer sums keep the identical-vector case exactly 1.
        let dot: u64 = self
            .counts
            .iter()
            .filter_map(|(k, &a)| other.counts.get(k).map(|&b| a * b))
            .sum();
        let sq = |v: &Self| v.counts.values().map(|&c| c * c).sum::<u64>() as f64;
        (dot as f64 / (sq(self) * sq(other)).sqrt()).clamp(0.0, 1.0)
    }
}

/// Cosine of dense vectors, clamped to `[0, 1]` for scoring.
pub fn dense_cosine(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(a), norm(b));
    match (na == 0.0, nb == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ if a == b => 1.0,
        _ => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            (dot / (na * nb)).clamp(0.0, 1.0)
        }
    }
}

fn default_timeout_secs() -> f64 {
    30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimilarityBackend {
    #[default]
    BagOfTokens,
    RemoteEmbedding {
        endpoint: String,
        model_id: String,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: f64,
    },
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    text: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vector: Vec<f64>,
}

/// Embeddings keyed by sha256 of model id and text.
type EmbeddingCache = HashMap<[u8; 32], Arc<Vec<f64>>>;

/// Cosine similarity over code texts with a pluggable backend.
///
/// Clones share the embedding cache and connection pool.
#[derive(Clone)]
pub struct SimilarityEngine {
    backend: SimilarityBackend,
    agent: Option<ureq::Agent>,
    cache: Arc<Mutex<EmbeddingCache>>,
}

impl std::fmt::Debug for SimilarityEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SimilarityEngine")
            .field("backend", &self.backend)
            .finish_non_exhaustive()
    }
}

impl Default for SimilarityEngine {
    fn default() -> Self {
        Self::new(SimilarityBackend::BagOfTokens)
    }
}

impl SimilarityEngine {
    pub fn new(backend: SimilarityBackend) -> Self {
        let agent = match &backend {
            SimilarityBackend::BagOfTokens => None,
            SimilarityBackend::RemoteEmbedding { timeout_secs, .. } => Some(
                ureq::AgentBuilder::new()
                    .timeout(Duration::from_secs_f64(timeout_secs.max(0.001)))
                    .max_idle_connections_per_host(8)
                    .build(),
            ),
        };
        SimilarityEngine {
            backend,
            agent,
            cache: Arc::default(),
        }
    }

    pub fn backend(&self) -> &SimilarityBackend {
        &self.backend
    }

    pub fn context_cosine(&self, a: &str, b: &str) -> Result<f64, SimilarityError> {
        match &self.backend {
            SimilarityBackend::BagOfTokens => {
                Ok(SparseTokenVector::from_code(a).cosine(&SparseTokenVector::from_code(b)))
            }
            SimilarityBackend::RemoteEmbedding { .. } => {
                if a == b {
                    return Ok(1.0);
                }
                let (va, vb) = (self.embed(a)?, self.embed(b)?);
                Ok(dense_cosine(&va, &vb))
            }
        }
    }

    fn embed(&self, text: &str) -> Result<Arc<Vec<f64>>, SimilarityError> {
        let SimilarityBackend::RemoteEmbedding { endpoint, model_id, .. } = &self.backend else {
            unreachable!("embed is only called for the remote backend");
        };
        let key: [u8; 32] = Sha256::new()
            .chain_update(model_id.as_bytes())
            .chain_update([0u8])
            .chain_update(text.as_bytes())
            .finalize()
            .into();
        if let Some(v) = self.cache.lock().expect("embedding cache poisoned").get(&key) {
            return Ok(Arc::clone(v));
        }
        let url = format!("{}/embed", endpoint.trim_end_matches('/'));
        let agent = self.agent.as_ref().expect("remote backend has an agent");
        let response = agent
            .post(&url)
            .send_json(EmbedRequest { model: model_id, text })
            .map_err(|e| SimilarityError::Request {
                endpoint: url.clone(),
                reason: e.to_string(),
            })?;
        let body: EmbedResponse = response.into_json().map_err(|e| SimilarityError::Malformed {
            endpoint: url.clone(),
            reason: e.to_string(),
        })?;
        if body.vector.is_empty() || body.vector.iter().any(|x| !x.is_finite()) {
            return Err(SimilarityError::Malformed {
                endpoint: url,
                reason: "vector is empty or has non-finite entries".into(),
            });
        }
        let v = Arc::new(body.vector);
        self.cache
            .lock()
            .expect("embedding cache poisoned")
            .insert(key, Arc::clone(&v));
        Ok(v)
    }
}

//! Snippet embedding providers.
//!
//! The default [`HashEmbedder`] needs no network: each non-trivia token is
//! hashed into one of `dim` buckets, counts are accumulated and the result is
//! L2-normalised. [`RemoteEmbedder`] calls an HTTPS batch endpoint for
//! neural code embeddings.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::metrics::tokenize::tokenize;
use crate::model::Vector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("malformed embedding response: {0}")]
    Malformed(String),
}

pub trait EmbeddingProvider: Send + Sync {
    /// Stable identifier; part of the embedding cache key.
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed_batch(&self, codes: &[&str]) -> Result<Vec<Vector>, EmbedError>;

    fn embed(&self, code: &str) -> Result<Vector, EmbedError> {
        Ok(self.embed_batch(&[code])?.remove(0))
    }
}

/// Hex sha256 of the text; the content half of the embedding cache key.
pub fn content_hash(code: &str) -> String {
    hex::encode(Sha256::digest(code.as_bytes()))
}

#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
    id: String,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashEmbedder { dim, id: format!("hash-tf-{dim}") }
    }

    /// Bucket of a token: first eight bytes of its sha256, big-endian, mod dim.
    pub fn bucket(&self, token: &str) -> usize {
        let digest = Sha256::digest(token.as_bytes());
        let mut head = [0u8; 8];
        head.copy_from_slice(&digest[..8]);
        (u64::from_be_bytes(head) % self.dim as u64) as usize
    }

    /// Term-frequency vector before normalisation.
    pub fn counts(&self, code: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for t in tokenize(code).iter().filter(|t| !t.is_trivia()) {
            v[self.bucket(t.text)] += 1.0;
        }
        v
    }

    /// Never fails for non-empty code. Code without tokens maps to the zero
    /// vector.
    pub fn embed_one(&self, code: &str) -> Vector {
        let mut v = self.counts(code);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Vector::new(v).expect("counts are finite")
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, codes: &[&str]) -> Result<Vec<Vector>, EmbedError> {
        codes
            .iter()
            .map(|c| {
                if c.trim().is_empty() {
                    Err(EmbedError::Precondition("snippet code is empty".into()))
                } else {
                    Ok(self.embed_one(c))
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteEmbedConfig {
    pub endpoint: String,
    pub model: String,
    pub dim: usize,
    pub api_key_env: String,
    pub timeout_secs: u64,
}

impl Default for RemoteEmbedConfig {
    fn default() -> Self {
        RemoteEmbedConfig {
            endpoint: "http://127.0.0.1:8081/v1/embeddings".into(),
            model: "microsoft/codebert-base".into(),
            dim: 768,
            api_key_env: "PLANMINE_EMBED_KEY".into(),
            timeout_secs: 120,
        }
    }
}

/// Client for an OpenAI-style `/embeddings` batch endpoint.
pub struct RemoteEmbedder {
    config: RemoteEmbedConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
    id: String,
}

impl RemoteEmbedder {
    /// The API key is optional; self-hosted endpoints often need none.
    pub fn from_env(config: RemoteEmbedConfig) -> Self {
        let api_key = std::env::var(&config.api_key_env).ok();
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build()
            .into();
        let id = format!("remote:{}", config.model);
        RemoteEmbedder { config, api_key, agent, id }
    }
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    index: Option<usize>,
    embedding: Vec<f64>,
}

impl EmbeddingProvider for RemoteEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.config.dim
    }

    fn embed_batch(&self, codes: &[&str]) -> Result<Vec<Vector>, EmbedError> {
        if codes.iter().any(|c| c.trim().is_empty()) {
            return Err(EmbedError::Precondition("snippet code is empty".into()));
        }
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp: EmbeddingResponse = req
            .send_json(json!({"model": self.config.model, "input": codes}))
            .map_err(|e| EmbedError::Transport(e.to_string()))?
            .body_mut()
            .read_json()
            .map_err(|e| EmbedError::Transport(format!("decoding response: {e}")))?;
        if resp.data.len() != codes.len() {
            return Err(EmbedError::Malformed(format!("asked for {} vectors, got {}", codes.len(), resp.data.len())));
        }
        resp.data.sort_by_key(|d| d.index.unwrap_or(0));
        resp.data
            .into_iter()
            .map(|d| {
                if d.embedding.len() != self.config.dim {
                    return Err(EmbedError::Malformed(format!(
                        "expected dimension {}, got {}",
                        self.config.dim,
                        d.embedding.len()
                    )));
                }
                Vector::new(d.embedding).map_err(|e| EmbedError::Malformed(e.to_string()))
            })
            .collect()
    }
}

//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored; values may be wrapped
//! in double quotes. Unknown keys are errors so typos surface early.
//!
//! | key | default |
//! |-----|---------|
//! | `db` | `planmine.db` |
//! | `listen` | `127.0.0.1:8080` |
//! | `cors_origin` | any origin |
//! | `session_ttl_secs` | `3600` |
//! | `provider` | `mock` (`mock` or `remote`) |
//! | `fixtures` | `fixtures/mock` |
//! | `model`, `endpoint`, `temperature`, `api_key_env`, `timeout_secs` | remote chat settings |
//! | `max_in_flight` | `4` |
//! | `embedder` | `hash` (`hash` or `remote`) |
//! | `embed_endpoint`, `embed_model`, `embed_dim`, `embed_api_key_env` | remote embedding settings |
//! | `language` | `python` |
//! | `n_use_cases`, `pca_variance`, `k_min`, `k_max`, `n_init`, `max_iters`, `tol`, `top_clusters`, `n_representatives`, `seed`, `embedding_dim` | pipeline parameters |

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::RemoteEmbedConfig;
use crate::llm::RemoteConfig;
use crate::model::PipelineConfig;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigFileError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {message}")]
    BadValue { line: usize, key: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Mock,
    Remote,
}

impl FromStr for ProviderKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mock" => Ok(ProviderKind::Mock),
            "remote" => Ok(ProviderKind::Remote),
            _ => Err(format!("expected `mock` or `remote`, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    Hash,
    Remote,
}

impl FromStr for EmbedderKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "hash" => Ok(EmbedderKind::Hash),
            "remote" => Ok(EmbedderKind::Remote),
            _ => Err(format!("expected `hash` or `remote`, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub db: PathBuf,
    pub listen: String,
    pub cors_origin: Option<String>,
    pub session_ttl_secs: u64,
    pub provider: ProviderKind,
    pub fixtures: PathBuf,
    pub remote: RemoteConfig,
    pub max_in_flight: usize,
    pub embedder: EmbedderKind,
    pub remote_embed: RemoteEmbedConfig,
    pub language: String,
    pub pipeline: PipelineConfig,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            db: "planmine.db".into(),
            listen: "127.0.0.1:8080".into(),
            cors_origin: None,
            session_ttl_secs: 3600,
            provider: ProviderKind::Mock,
            fixtures: "fixtures/mock".into(),
            remote: RemoteConfig::default(),
            max_in_flight: 4,
            embedder: EmbedderKind::Hash,
            remote_embed: RemoteEmbedConfig::default(),
            language: "python".into(),
            pipeline: PipelineConfig::default(),
        }
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T, ConfigFileError>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e: T::Err| ConfigFileError::BadValue { line, key: key.into(), message: e.to_string() })
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self, ConfigFileError> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let Some((k, v)) = t.split_once('=') else {
                return Err(ConfigFileError::Syntax { line, message: "expected `key = value`".into() });
            };
            let key = k.trim();
            let v = v.trim();
            let v = v.strip_prefix('"').and_then(|x| x.strip_suffix('"')).unwrap_or(v);
            s.set(line, key, v)?;
        }
        s.validate()?;
        Ok(s)
    }

    /// Parses a file; relative paths in it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigFileError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigFileError::Invalid(format!("cannot read {}: {e}", path.display())))?;
        let mut s = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if s.db.is_relative() {
            s.db = base.join(&s.db);
        }
        if s.fixtures.is_relative() {
            s.fixtures = base.join(&s.fixtures);
        }
        Ok(s)
    }

    pub fn set(&mut self, line: usize, key: &str, v: &str) -> Result<(), ConfigFileError> {
        let p = &mut self.pipeline;
        match key {
            "db" => self.db = v.into(),
            "listen" => self.listen = v.into(),
            "cors_origin" => self.cors_origin = Some(v.into()),
            "session_ttl_secs" => self.session_ttl_secs = parse_value(line, key, v)?,
            "provider" => self.provider = parse_value(line, key, v)?,
            "fixtures" => self.fixtures = v.into(),
            "model" => self.remote.model = v.into(),
            "endpoint" => self.remote.endpoint = v.into(),
            "temperature" => self.remote.temperature = parse_value(line, key, v)?,
            "api_key_env" => self.remote.api_key_env = v.into(),
            "timeout_secs" => {
                self.remote.timeout_secs = parse_value(line, key, v)?;
                self.remote_embed.timeout_secs = self.remote.timeout_secs;
            }
            "max_in_flight" => self.max_in_flight = parse_value(line, key, v)?,
            "embedder" => self.embedder = parse_value(line, key, v)?,
            "embed_endpoint" => self.remote_embed.endpoint = v.into(),
            "embed_model" => self.remote_embed.model = v.into(),
            "embed_dim" => self.remote_embed.dim = parse_value(line, key, v)?,
            "embed_api_key_env" => self.remote_embed.api_key_env = v.into(),
            "language" => self.language = v.into(),
            "n_use_cases" => p.n_use_cases = parse_value(line, key, v)?,
            "pca_variance" => p.pca_variance = parse_value(line, key, v)?,
            "k_min" => p.k_min = parse_value(line, key, v)?,
            "k_max" => p.k_max = parse_value(line, key, v)?,
            "n_init" => p.n_init = parse_value(line, key, v)?,
            "max_iters" => p.max_iters = parse_value(line, key, v)?,
            "tol" => p.tol = parse_value(line, key, v)?,
            "top_clusters" => p.top_clusters = parse_value(line, key, v)?,
            "n_representatives" => p.n_representatives = parse_value(line, key, v)?,
            "seed" => p.seed = parse_value(line, key, v)?,
            "embedding_dim" => p.embedding_dim = parse_value(line, key, v)?,
            _ => return Err(ConfigFileError::UnknownKey { line, key: key.into() }),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigFileError> {
        self.pipeline.validate().map_err(|e| ConfigFileError::Invalid(e.to_string()))?;
        if self.max_in_flight == 0 {
            return Err(ConfigFileError::Invalid("max_in_flight must be >= 1".into()));
        }
        if self.listen.parse::<std::net::SocketAddr>().is_err() {
            return Err(ConfigFileError::Invalid(format!("listen `{}` is not a socket address", self.listen)));
        }
        Ok(())
    }
}

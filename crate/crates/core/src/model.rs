//! Domain types shared by every stage of the toolkit.

use std::fmt;

use rusqlite::types::{FromSql, FromSqlResult, ToSql, ToSqlOutput, ValueRef};
use serde::{Deserialize, Serialize};
use thiserror::Error;

macro_rules! id_type {
    ($($(#[$meta:meta])* $name:ident;)*) => {$(
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub i64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }

        impl ToSql for $name {
            fn to_sql(&self) -> rusqlite::Result<ToSqlOutput<'_>> {
                Ok(ToSqlOutput::from(self.0))
            }
        }

        impl FromSql for $name {
            fn column_result(value: ValueRef<'_>) -> FromSqlResult<Self> {
                i64::column_result(value).map($name)
            }
        }
    )*};
}

id_type! {
    DomainId;
    UseCaseId;
    ProgramId;
    SnippetId;
    CandidateId;
    PlanId;
    GroupId;
}

/// A dense embedding vector. Entries are always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

#[derive(Debug, Error, PartialEq)]
#[error("vector entry {index} is not finite ({value})")]
pub struct NonFiniteEntry {
    pub index: usize,
    pub value: f64,
}

impl Vector {
    pub fn new(values: Vec<f64>) -> Result<Self, NonFiniteEntry> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(NonFiniteEntry { index, value });
        }
        Ok(Vector(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(&self, other: &Vector) -> f64 {
        euclidean(&self.0, &other.0)
    }

    /// Packs the vector as little-endian `f32` values, the on-disk layout.
    pub fn to_le_f32_bytes(&self) -> Vec<u8> {
        self.0.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect()
    }

    pub fn from_le_f32_bytes(bytes: &[u8]) -> Option<Self> {
        if bytes.len() % 4 != 0 {
            return None;
        }
        let values = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Vector::new(values).ok()
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = NonFiniteEntry;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Vector::new(values)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_euclidean(a, b).sqrt()
}

pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// A half-open byte range `[start, end)` over some code text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSpan {
    pub start: usize,
    pub end: usize,
    #[serde(default)]
    pub note: Option<String>,
}

impl CodeSpan {
    pub fn new(start: usize, end: usize) -> Self {
        CodeSpan { start, end, note: None }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &CodeSpan) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// The covered text, if the span is valid for `text`.
    pub fn slice<'a>(&self, text: &'a str) -> Option<&'a str> {
        text.get(self.start..self.end)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpanError {
    #[error("span [{start}, {end}) is empty or reversed")]
    Empty { start: usize, end: usize },
    #[error("span [{start}, {end}) exceeds text length {len}")]
    OutOfBounds { start: usize, end: usize, len: usize },
    #[error("span [{start}, {end}) does not fall on UTF-8 character boundaries")]
    NotCharBoundary { start: usize, end: usize },
    #[error("span [{start}, {end}) overlaps an existing span")]
    Overlap { start: usize, end: usize },
}

impl CodeSpan {
    pub fn check(&self, text: &str) -> Result<(), SpanError> {
        let (start, end) = (self.start, self.end);
        if start >= end {
            return Err(SpanError::Empty { start, end });
        }
        if end > text.len() {
            return Err(SpanError::OutOfBounds { start, end, len: text.len() });
        }
        if !text.is_char_boundary(start) || !text.is_char_boundary(end) {
            return Err(SpanError::NotCharBoundary { start, end });
        }
        Ok(())
    }
}

/// Checks that every span is valid for `text` and that the list is sorted by
/// start with no overlaps.
pub fn check_spans(text: &str, spans: &[CodeSpan]) -> Result<(), SpanError> {
    for span in spans {
        span.check(text)?;
    }
    for pair in spans.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(SpanError::Overlap { start: pair[1].start, end: pair[1].end });
        }
    }
    Ok(())
}

/// Inserts `span` keeping the list sorted; rejects overlap.
pub fn insert_span(text: &str, spans: &mut Vec<CodeSpan>, span: CodeSpan) -> Result<(), SpanError> {
    span.check(text)?;
    if spans.iter().any(|s| s.overlaps(&span)) {
        return Err(SpanError::Overlap { start: span.start, end: span.end });
    }
    let at = spans.partition_point(|s| s.start < span.start);
    spans.insert(at, span);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub id: DomainId,
    pub name: String,
    /// Substituted for the `DOMAIN_NAME` prompt placeholder.
    pub library_name: String,
    /// Fence tag used in markdown export, e.g. `python`.
    pub language: String,
    /// Seconds since the Unix epoch.
    pub created_at: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UseCase {
    pub id: UseCaseId,
    pub domain_id: DomainId,
    pub description: String,
    /// 1-based position in the generated list.
    pub ordinal: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Generated,
    Ingested,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Generated => "generated",
            Origin::Ingested => "ingested",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "generated" => Some(Origin::Generated),
            "ingested" => Some(Origin::Ingested),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleProgram {
    pub id: ProgramId,
    pub domain_id: DomainId,
    /// Absent for ingested programs.
    pub use_case_id: Option<UseCaseId>,
    /// Ordering key: the use-case ordinal, or the file index for ingested corpora.
    pub ordinal: u32,
    /// File name for ingested programs.
    pub source_path: Option<String>,
    pub raw_source: String,
    pub annotated_source: String,
    pub syntactically_valid: bool,
    pub origin: Origin,
}

impl ExampleProgram {
    /// The text shown to instructors: annotated when available.
    pub fn display_source(&self) -> &str {
        if self.annotated_source.is_empty() {
            &self.raw_source
        } else {
            &self.annotated_source
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snippet {
    pub id: SnippetId,
    pub program_id: ProgramId,
    pub ordinal: u32,
    /// Empty for the unannotated preamble.
    pub goal: String,
    /// The comment lines the goal was read from, verbatim.
    pub comment: String,
    pub code: String,
    /// Byte offset of `code` inside the program's annotated source.
    pub code_offset: usize,
    pub changeable_spans: Vec<CodeSpan>,
    pub embedding: Option<Vector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanCandidate {
    pub id: CandidateId,
    pub domain_id: DomainId,
    pub name: String,
    /// Set when cluster naming failed and `name` is a placeholder.
    pub name_pending: bool,
    /// All members, ordered by ascending distance to the centroid.
    pub snippet_ids: Vec<SnippetId>,
    pub centroid: Vector,
    pub size: usize,
    pub representative_ids: Vec<SnippetId>,
    /// 0-based rank by size (largest first).
    pub rank: usize,
    /// Among the `top_clusters` largest; used for evaluation subsampling.
    pub top: bool,
}

/// Where a plan's initial content came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Empty,
    FromSelection { program_id: ProgramId, start: usize, end: usize },
    FromProgram { program_id: ProgramId },
    FromCandidate { candidate_id: CandidateId, snippet_id: SnippetId },
}

impl Provenance {
    pub fn kind(&self) -> &'static str {
        match self {
            Provenance::Empty => "empty",
            Provenance::FromSelection { .. } => "from_selection",
            Provenance::FromProgram { .. } => "from_program",
            Provenance::FromCandidate { .. } => "from_candidate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub id: PlanId,
    pub domain_id: DomainId,
    pub name: String,
    pub goal: String,
    pub solution: String,
    pub changeable_areas: Vec<CodeSpan>,
    pub provenance: Provenance,
    pub candidate_id: Option<CandidateId>,
    pub canvas_x: f64,
    pub canvas_y: f64,
    pub group_id: Option<GroupId>,
    /// Optimistic-concurrency counter, bumped on every edit.
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanGroup {
    pub id: GroupId,
    pub domain_id: DomainId,
    pub name: String,
    pub plan_ids: Vec<PlanId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub n_use_cases: usize,
    pub pca_variance: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub n_init: usize,
    pub max_iters: usize,
    pub tol: f64,
    /// `L`: how many of the largest clusters feed evaluation subsampling.
    pub top_clusters: usize,
    /// `R`: representatives kept per cluster.
    pub n_representatives: usize,
    pub seed: u64,
    pub embedding_dim: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            n_use_cases: 100,
            pca_variance: 0.90,
            k_min: 2,
            k_max: 10,
            n_init: 10,
            max_iters: 300,
            tol: 1e-6,
            top_clusters: 10,
            n_representatives: 4,
            seed: 0,
            embedding_dim: 256,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid pipeline config: {0}")]
pub struct ConfigError(pub String);

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.pca_variance > 0.0 && self.pca_variance <= 1.0) {
            return Err(ConfigError(format!("pca_variance must be in (0, 1], got {}", self.pca_variance)));
        }
        if self.k_min < 2 || self.k_min > self.k_max {
            return Err(ConfigError(format!(
                "need 2 <= k_min <= k_max, got k_min={} k_max={}",
                self.k_min, self.k_max
            )));
        }
        if self.n_representatives == 0 {
            return Err(ConfigError("n_representatives must be >= 1".into()));
        }
        if self.top_clusters == 0 {
            return Err(ConfigError("top_clusters must be >= 1".into()));
        }
        if self.n_init == 0 || self.max_iters == 0 {
            return Err(ConfigError("n_init and max_iters must be >= 1".into()));
        }
        if self.n_use_cases == 0 || self.embedding_dim == 0 {
            return Err(ConfigError("n_use_cases and embedding_dim must be >= 1".into()));
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(ConfigError("tol must be a non-negative number".into()));
        }
        Ok(())
    }
}

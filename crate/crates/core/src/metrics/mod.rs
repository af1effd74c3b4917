//! Code metrics and corpus-level comparison.

pub mod assignment;
pub mod complexity;
pub mod distance;
pub mod report;
pub mod tokenize;

use thiserror::Error;

pub use complexity::{
    cognitive, cyclomatic, distinct_methods, halstead, halstead_volume, loc, measure, ComplexityRecord,
    HalsteadCounts,
};
pub use distance::{hausdorff, wasserstein, WassersteinOptions};
pub use report::{evaluate, representative_subsample, EvaluationConfig, EvaluationCorpus, EvaluationReport};
pub use tokenize::{tokenize, Token, TokenKind};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("unknown corpus label `{0}`")]
    UnknownLabel(String),
    #[error("corpus `{label}`: {source}")]
    Corpus {
        label: String,
        #[source]
        source: Box<MetricsError>,
    },
}

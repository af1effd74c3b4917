//! Core of the plan-mining toolkit.
//!
//! The crate is organised the way the data flows: an LLM gateway generates
//! use cases and reference programs, the segmenter splits subgoal-annotated
//! programs into snippets, `cluster` turns snippet embeddings into plan
//! candidates, and `metrics` scores whole corpora. Everything is persisted in
//! a single-file SQLite [`store::Store`].

pub mod cluster;
pub mod config;
pub mod embed;
pub mod llm;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod segment;
pub mod store;

pub use model::*;

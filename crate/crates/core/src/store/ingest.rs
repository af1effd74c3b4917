//! Local-directory corpus ingestion.

use std::path::Path;

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::{NewProgram, Result, Store, StoreError};
use crate::model::{DomainId, ExampleProgram, Origin};
use crate::segment::validate_syntax;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusFilter {
    /// Every pattern must occur in the file's contents.
    pub required: Vec<String>,
    /// Files whose name contains this (case-insensitively) are skipped.
    pub exclude_name: Option<String>,
    /// Accepted file extensions, without the dot. Empty accepts all.
    pub extensions: Vec<String>,
}

impl Default for CorpusFilter {
    fn default() -> Self {
        CorpusFilter { required: Vec::new(), exclude_name: Some("test".into()), extensions: vec!["py".into()] }
    }
}

impl CorpusFilter {
    /// Files that import a library and call one of its constructors, e.g.
    /// `("from bs4 import BeautifulSoup", "BeautifulSoup(")`.
    pub fn library(import_pattern: &str, constructor_pattern: &str) -> Self {
        CorpusFilter { required: vec![import_pattern.into(), constructor_pattern.into()], ..Default::default() }
    }

    pub fn accepts_name(&self, file_name: &str) -> bool {
        let ext_ok = self.extensions.is_empty()
            || Path::new(file_name)
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| self.extensions.iter().any(|x| x == e));
        let name_ok = self
            .exclude_name
            .as_deref()
            .is_none_or(|pat| !file_name.to_lowercase().contains(&pat.to_lowercase()));
        ext_ok && name_ok
    }

    pub fn accepts(&self, file_name: &str, contents: &str) -> bool {
        self.accepts_name(file_name) && self.required.iter().all(|p| contents.contains(p.as_str()))
    }
}

impl Store {
    /// Stores every file under `dir` (recursively, in path order) that passes
    /// the filter, with its syntax-check result. Files that are not UTF-8 are
    /// skipped.
    pub fn ingest_corpus(&self, domain: DomainId, dir: &Path, filter: &CorpusFilter) -> Result<Vec<ExampleProgram>> {
        let mut found = Vec::new();
        for entry in WalkDir::new(dir).sort_by_file_name() {
            let entry = entry.map_err(|e| {
                StoreError::Io(e.into_io_error().unwrap_or_else(|| std::io::Error::other("directory walk failed")))
            })?;
            if !entry.file_type().is_file() {
                continue;
            }
            let name = entry.file_name().to_string_lossy();
            if !filter.accepts_name(&name) {
                continue;
            }
            let bytes = std::fs::read(entry.path())?;
            let Ok(text) = String::from_utf8(bytes) else {
                log::warn!("skipping non-UTF-8 file {}", entry.path().display());
                continue;
            };
            if !filter.accepts(&name, &text) {
                continue;
            }
            let rel = entry.path().strip_prefix(dir).unwrap_or(entry.path());
            found.push(NewProgram {
                use_case_id: None,
                source_path: Some(rel.to_string_lossy().replace('\\', "/")),
                syntactically_valid: validate_syntax(&text),
                annotated_source: text.clone(),
                raw_source: text,
                origin: Origin::Ingested,
            });
        }
        self.insert_programs(domain, &found)
    }
}

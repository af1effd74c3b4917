//! In-process providers: closures, fixture replay, and fixture recording.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{CompletionProvider, LlmError, PromptRequest};

/// Wraps a closure; handy in tests.
pub struct FnProvider<F> {
    id: String,
    f: F,
}

impl<F> FnProvider<F>
where
    F: Fn(&PromptRequest) -> Result<String, LlmError> + Send + Sync,
{
    pub fn new(id: impl Into<String>, f: F) -> Self {
        FnProvider { id: id.into(), f }
    }
}

impl<F> CompletionProvider for FnProvider<F>
where
    F: Fn(&PromptRequest) -> Result<String, LlmError> + Send + Sync,
{
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &PromptRequest) -> Result<String, LlmError> {
        (self.f)(request)
    }
}

/// Replays responses from `<dir>/<kind>/<fixture key>.txt`.
pub struct MockProvider {
    dir: PathBuf,
    calls: AtomicUsize,
}

impl MockProvider {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        MockProvider { dir: dir.into(), calls: AtomicUsize::new(0) }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Number of `complete` calls so far, hits and misses alike.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

pub fn fixture_path(dir: &Path, request: &PromptRequest) -> PathBuf {
    dir.join(request.kind.as_str()).join(format!("{}.txt", request.fixture_key()))
}

impl CompletionProvider for MockProvider {
    fn id(&self) -> &str {
        "mock"
    }

    fn complete(&self, request: &PromptRequest) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let path = fixture_path(&self.dir, request);
        match fs::read_to_string(&path) {
            Ok(text) => Ok(text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Err(LlmError::MissingFixture { kind: request.kind, key: request.fixture_key() })
            }
            Err(e) => Err(LlmError::Transport(format!("{}: {e}", path.display()))),
        }
    }
}

/// Forwards to an inner provider and writes every successful response as a
/// mock fixture.
pub struct RecordingProvider<P> {
    inner: P,
    dir: PathBuf,
}

impl<P: CompletionProvider> RecordingProvider<P> {
    pub fn new(inner: P, dir: impl Into<PathBuf>) -> Self {
        RecordingProvider { inner, dir: dir.into() }
    }
}

impl<P: CompletionProvider> CompletionProvider for RecordingProvider<P> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn complete(&self, request: &PromptRequest) -> Result<String, LlmError> {
        let text = self.inner.complete(request)?;
        let path = fixture_path(&self.dir, request);
        let write = || -> std::io::Result<()> {
            fs::create_dir_all(path.parent().expect("fixture path has a parent"))?;
            fs::write(&path, &text)
        };
        write().map_err(|e| LlmError::Transport(format!("recording {}: {e}", path.display())))?;
        Ok(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{Placeholder, PromptKind};

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let echo = FnProvider::new("echo", |r: &PromptRequest| Ok(format!("reply to {}", r.values[0].1)));
        let rec = RecordingProvider::new(echo, dir.path());
        let req = PromptRequest::new(PromptKind::UseCases, vec![(Placeholder::DomainName, "pandas".into())]).unwrap();
        assert_eq!(rec.complete(&req).unwrap(), "reply to pandas");

        let mock = MockProvider::new(dir.path());
        assert_eq!(mock.complete(&req).unwrap(), "reply to pandas");
        let other = PromptRequest::new(PromptKind::UseCases, vec![(Placeholder::DomainName, "numpy".into())]).unwrap();
        assert!(matches!(mock.complete(&other), Err(LlmError::MissingFixture { .. })));
        assert_eq!(mock.calls(), 2);
    }

    #[test]
    fn keys_separate_kinds_and_values() {
        let a = PromptRequest::new(PromptKind::ChangeableAreas, vec![(Placeholder::CodeSnippet, "x".into())]).unwrap();
        let b = PromptRequest::new(PromptKind::PredictOutput, vec![(Placeholder::CodeSnippet, "x".into())]).unwrap();
        let c = PromptRequest::new(PromptKind::ChangeableAreas, vec![(Placeholder::CodeSnippet, "y".into())]).unwrap();
        assert_ne!(a.fixture_key(), b.fixture_key());
        assert_ne!(a.fixture_key(), c.fixture_key());
        assert_eq!(a.fixture_key(), a.clone().fixture_key());
    }
}

//! The gateway: bounded concurrency, retries, and one method per prompt.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use super::templates::{Placeholder, PromptKind};
use super::{parse, CompletionProvider, LlmError, PromptRequest};
use crate::model::CodeSpan;
use crate::segment::validate_syntax;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { retries: 2, base_delay: Duration::from_millis(500) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatewayOptions {
    /// Maximum concurrent provider requests.
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
}

impl Default for GatewayOptions {
    fn default() -> Self {
        GatewayOptions { max_in_flight: 4, retry: RetryPolicy::default() }
    }
}

struct Limiter {
    max: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
    peak: AtomicUsize,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.max {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        self.peak.fetch_max(*n, Ordering::SeqCst);
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.0.freed.notify_one();
    }
}

/// Shareable across threads; clones share the provider and the limiter.
#[derive(Clone)]
pub struct Gateway {
    provider: Arc<dyn CompletionProvider>,
    limiter: Arc<Limiter>,
    retry: RetryPolicy,
    comment_marker: String,
}

impl Gateway {
    pub fn new(provider: Arc<dyn CompletionProvider>, options: GatewayOptions) -> Self {
        Gateway {
            provider,
            limiter: Arc::new(Limiter {
                max: options.max_in_flight.max(1),
                in_flight: Mutex::new(0),
                freed: Condvar::new(),
                peak: AtomicUsize::new(0),
            }),
            retry: options.retry,
            comment_marker: "#".into(),
        }
    }

    pub fn with_comment_marker(mut self, marker: impl Into<String>) -> Self {
        self.comment_marker = marker.into();
        self
    }

    pub fn provider_id(&self) -> &str {
        self.provider.id()
    }

    /// Highest number of simultaneous provider requests observed.
    pub fn peak_in_flight(&self) -> usize {
        self.limiter.peak.load(Ordering::SeqCst)
    }

    /// Sends a prompt, retrying transport errors with exponential backoff.
    pub fn complete(&self, request: &PromptRequest) -> Result<String, LlmError> {
        let mut attempt = 0;
        loop {
            let result = {
                let _permit = self.limiter.acquire();
                self.provider.complete(request)
            };
            match result {
                Err(LlmError::Transport(msg)) if attempt < self.retry.retries => {
                    log::warn!("{} request failed (attempt {}): {msg}", request.kind, attempt + 1);
                    thread::sleep(self.retry.base_delay * 2u32.pow(attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn ask(&self, kind: PromptKind, values: Vec<(Placeholder, String)>) -> Result<String, LlmError> {
        self.complete(&PromptRequest::new(kind, values)?)
    }

    pub fn generate_use_cases(&self, library_name: &str, n: usize) -> Result<Vec<String>, LlmError> {
        let text = self.ask(PromptKind::UseCases, vec![(Placeholder::DomainName, library_name.into())])?;
        Ok(parse::use_cases(&text, n)?)
    }

    /// Returns the generated source and its syntax-check result.
    pub fn generate_program(&self, library_name: &str, use_case: &str) -> Result<(String, bool), LlmError> {
        let text = self.ask(
            PromptKind::CodeForUseCase,
            vec![(Placeholder::DomainName, library_name.into()), (Placeholder::UseCase, use_case.into())],
        )?;
        let code = parse::code_body(&text)?;
        let valid = validate_syntax(&code);
        Ok((code, valid))
    }

    pub fn annotate_subgoals(&self, raw_source: &str) -> Result<String, LlmError> {
        let text = self.ask(PromptKind::SubgoalAnnotate, vec![(Placeholder::FullProgram, raw_source.into())])?;
        Ok(parse::code_body(&text)?)
    }

    pub fn extract_changeable_fragments(&self, code: &str) -> Result<Vec<String>, LlmError> {
        if code.trim().is_empty() {
            return Err(LlmError::Precondition("snippet code is empty".into()));
        }
        let text = self.ask(PromptKind::ChangeableAreas, vec![(Placeholder::CodeSnippet, code.into())])?;
        Ok(parse::fenced_blocks(&text))
    }

    /// Members are `(goal, code)` pairs.
    pub fn name_cluster(&self, members: &[(&str, &str)]) -> Result<String, LlmError> {
        if members.is_empty() {
            return Err(LlmError::Precondition("cluster has no members".into()));
        }
        let text = self.ask(
            PromptKind::ClusterName,
            vec![(Placeholder::ProgramsInCluster, cluster_text(members, &self.comment_marker))],
        )?;
        Ok(parse::cluster_name(&text)?)
    }

    pub fn explain_selection(&self, code: &str, selection: &CodeSpan) -> Result<String, LlmError> {
        let selected = selection_text(code, selection)?;
        self.ask(
            PromptKind::ExplainSelection,
            vec![(Placeholder::FullProgram, code.into()), (Placeholder::Selection, selected.into())],
        )
    }

    pub fn predict_output(&self, code: &str) -> Result<String, LlmError> {
        if code.trim().is_empty() {
            return Err(LlmError::Precondition("code is empty".into()));
        }
        let text = self.ask(PromptKind::PredictOutput, vec![(Placeholder::CodeSnippet, code.into())])?;
        Ok(parse::predicted_output(&text)?)
    }
}

pub fn selection_text<'a>(code: &'a str, selection: &CodeSpan) -> Result<&'a str, LlmError> {
    selection.check(code).map_err(|e| LlmError::Precondition(e.to_string()))?;
    Ok(&code[selection.start..selection.end])
}

/// Each member's goal as comment lines followed by its code; members are
/// separated by a blank line.
pub fn cluster_text(members: &[(&str, &str)], marker: &str) -> String {
    members
        .iter()
        .map(|(goal, code)| {
            let mut s = String::new();
            if !goal.is_empty() {
                s.push_str(marker);
                s.push(' ');
                s.push_str(goal);
                s.push('\n');
            }
            s.push_str(code.trim_end());
            s
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::FnProvider;
    use std::sync::atomic::AtomicU32;

    fn gateway<F>(f: F) -> Gateway
    where
        F: Fn(&PromptRequest) -> Result<String, LlmError> + Send + Sync + 'static,
    {
        let opts = GatewayOptions { max_in_flight: 2, retry: RetryPolicy { retries: 2, base_delay: Duration::ZERO } };
        Gateway::new(Arc::new(FnProvider::new("test", f)), opts)
    }

    #[test]
    fn retries_transport_only() {
        let calls = Arc::new(AtomicU32::new(0));
        let c = calls.clone();
        let g = gateway(move |_| {
            c.fetch_add(1, Ordering::SeqCst);
            Err(LlmError::Transport("down".into()))
        });
        assert!(matches!(g.predict_output("print(1)"), Err(LlmError::Transport(_))));
        assert_eq!(calls.load(Ordering::SeqCst), 3);

        let calls = Arc::new(AtomicU32::new(0));
        let c = calls.clone();
        let g = gateway(move |_| {
            c.fetch_add(1, Ordering::SeqCst);
            Ok("no delimiter".into())
        });
        assert!(matches!(g.predict_output("print(1)"), Err(LlmError::Malformed(_))));
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn transient_failure_recovers() {
        let calls = Arc::new(AtomicU32::new(0));
        let c = calls.clone();
        let g = gateway(move |_| {
            if c.fetch_add(1, Ordering::SeqCst) == 0 {
                Err(LlmError::Transport("blip".into()))
            } else {
                Ok("Name: Reading Files".into())
            }
        });
        assert_eq!(g.name_cluster(&[("read", "open(p)")]).unwrap(), "Reading Files");
    }

    #[test]
    fn program_generation_strips_fence_and_checks_syntax() {
        let g = gateway(|_| Ok("```python\nimport pandas\n```".into()));
        assert_eq!(g.generate_program("pandas", "x").unwrap(), ("import pandas".to_string(), true));
        let g = gateway(|_| Ok("def f(:".into()));
        assert!(!g.generate_program("pandas", "x").unwrap().1);
        let g = gateway(|_| Ok("   ".into()));
        assert!(matches!(g.generate_program("pandas", "x"), Err(LlmError::Malformed(_))));
    }

    #[test]
    fn selection_lines_reach_the_prompt() {
        let g = gateway(|r| Ok(r.text.clone()));
        let code = "a = 1\nb = 2\nc = 3\n";
        let prompt = g.explain_selection(code, &CodeSpan::new(0, 11)).unwrap();
        assert!(prompt.contains("Selected code:\na = 1\nb = 2"));
        assert!(matches!(g.explain_selection(code, &CodeSpan::new(3, 3)), Err(LlmError::Precondition(_))));
    }

    #[test]
    fn cluster_prompt_layout() {
        let text = cluster_text(&[("load", "x = 1\n"), ("", "y = 2")], "#");
        assert_eq!(text, "# load\nx = 1\n\ny = 2");
    }

    #[test]
    fn concurrency_is_bounded() {
        let g = gateway(|_| {
            thread::sleep(Duration::from_millis(5));
            Ok("OUTPUT:\n1".into())
        });
        thread::scope(|s| {
            for _ in 0..8 {
                let g = g.clone();
                s.spawn(move || g.predict_output("print(1)").unwrap());
            }
        });
        assert!(g.peak_in_flight() <= 2);
        assert!(g.peak_in_flight() >= 1);
    }
}

//! Splits subgoal-annotated programs into snippets and maps changeable
//! fragments back onto byte spans.
//!
//! A boundary is a maximal run of comment-only lines immediately followed by a
//! code line. The run becomes the snippet's goal; the lines after it, up to the
//! next boundary, become its code. Segmentation is lossless: [`render`] of a
//! [`segment`] result reproduces the input byte for byte.

use rustpython_parser::ast::Suite;
use rustpython_parser::Parse;
use serde::{Deserialize, Serialize};

use crate::metrics::tokenize::{classify_lines, physical_lines, LineClass, Lexicon};
use crate::model::CodeSpan;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    /// Comment text with markers stripped, lines joined by single spaces.
    pub goal: String,
    /// The comment lines exactly as they appeared.
    pub comment: String,
    pub code: String,
    /// Byte offset of `code` in the segmented source.
    pub code_offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SegmentedProgram {
    /// Code before the first boundary; absent when empty.
    pub preamble: Option<Segment>,
    pub snippets: Vec<Segment>,
}

impl SegmentedProgram {
    /// Preamble (if any) followed by the goal-carrying snippets.
    pub fn all(&self) -> impl Iterator<Item = &Segment> {
        self.preamble.iter().chain(&self.snippets)
    }
}

/// True iff `source` parses as a Python module. Never executes anything.
pub fn validate_syntax(source: &str) -> bool {
    Suite::parse(source, "<program>").is_ok()
}

pub fn segment(source: &str) -> SegmentedProgram {
    segment_with(source, &Lexicon::default())
}

pub fn segment_with(source: &str, lexicon: &Lexicon) -> SegmentedProgram {
    let lines = physical_lines(source);
    let classes = classify_lines(source, lexicon);

    // (comment start, code start, goal) per boundary
    let mut boundaries = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if classes[i] != LineClass::CommentOnly {
            i += 1;
            continue;
        }
        let run_start = i;
        while i < lines.len() && classes[i] == LineClass::CommentOnly {
            i += 1;
        }
        if i < lines.len() && classes[i] == LineClass::Code {
            let goal = lines[run_start..i]
                .iter()
                .map(|r| strip_marker(&source[r.clone()], &lexicon.comment_marker))
                .filter(|s| !s.is_empty())
                .collect::<Vec<_>>()
                .join(" ");
            boundaries.push((lines[run_start].start, lines[i].start, goal));
        }
    }

    let preamble_end = boundaries.first().map_or(source.len(), |b| b.0);
    let preamble = (preamble_end > 0).then(|| Segment {
        goal: String::new(),
        comment: String::new(),
        code: source[..preamble_end].to_string(),
        code_offset: 0,
    });
    let snippets = boundaries
        .iter()
        .enumerate()
        .map(|(k, (comment_start, code_start, goal))| {
            let end = boundaries.get(k + 1).map_or(source.len(), |b| b.0);
            Segment {
                goal: goal.clone(),
                comment: source[*comment_start..*code_start].to_string(),
                code: source[*code_start..end].to_string(),
                code_offset: *code_start,
            }
        })
        .collect();
    SegmentedProgram { preamble, snippets }
}

fn strip_marker<'a>(line: &'a str, marker: &str) -> &'a str {
    let t = line.trim_start();
    t.strip_prefix(marker).unwrap_or(t).trim()
}

pub fn render(program: &SegmentedProgram) -> String {
    let mut out = String::new();
    for seg in program.all() {
        out.push_str(&seg.comment);
        out.push_str(&seg.code);
    }
    out
}

/// Result of mapping fragments onto code.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Localized {
    /// Sorted, non-overlapping spans.
    pub spans: Vec<CodeSpan>,
    /// Fragments that were empty or did not occur in the code.
    pub discarded: Vec<String>,
}

/// Maps each fragment to its first exact occurrence in `code`, then merges
/// overlapping spans.
pub fn localize_fragments<S: AsRef<str>>(code: &str, fragments: &[S]) -> Localized {
    let mut raw = Vec::new();
    let mut discarded = Vec::new();
    for f in fragments {
        let f = f.as_ref();
        match (!f.is_empty()).then(|| code.find(f)).flatten() {
            Some(start) => raw.push(CodeSpan::new(start, start + f.len())),
            None => discarded.push(f.to_string()),
        }
    }
    raw.sort_by_key(|s| (s.start, s.end));
    let mut spans: Vec<CodeSpan> = Vec::with_capacity(raw.len());
    for s in raw {
        match spans.last_mut() {
            Some(last) if s.start < last.end => last.end = last.end.max(s.end),
            _ => spans.push(s),
        }
    }
    Localized { spans, discarded }
}

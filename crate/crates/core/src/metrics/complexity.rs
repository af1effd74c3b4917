//! Token-level complexity metrics: non-comment LOC, cyclomatic complexity,
//! Halstead volume, and a structural cognitive-complexity variant.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::tokenize::{classify_lines, tokenize, LineClass, Lexicon, Token, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityRecord {
    pub loc: usize,
    pub cyclomatic: usize,
    pub halstead_volume: f64,
    pub cognitive: usize,
}

pub fn measure(source: &str) -> ComplexityRecord {
    let tokens = tokenize(source);
    ComplexityRecord {
        loc: loc(source),
        cyclomatic: cyclomatic_of(&tokens),
        halstead_volume: halstead_of(&tokens).volume(),
        cognitive: cognitive_of(&tokens),
    }
}

/// Lines that are neither blank nor comment-only.
pub fn loc(source: &str) -> usize {
    classify_lines(source, &Lexicon::default())
        .into_iter()
        .filter(|c| *c == LineClass::Code)
        .count()
}

const DECISION_KEYWORDS: &[&str] = &["if", "elif", "while", "for", "except", "and", "or"];

/// One plus the number of decision keywords in the token stream.
pub fn cyclomatic(source: &str) -> usize {
    cyclomatic_of(&tokenize(source))
}

fn cyclomatic_of(tokens: &[Token<'_>]) -> usize {
    1 + tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Keyword && DECISION_KEYWORDS.contains(&t.text))
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HalsteadCounts {
    pub distinct_operators: usize,
    pub distinct_operands: usize,
    pub total_operators: usize,
    pub total_operands: usize,
}

impl HalsteadCounts {
    pub fn vocabulary(&self) -> usize {
        self.distinct_operators + self.distinct_operands
    }

    pub fn length(&self) -> usize {
        self.total_operators + self.total_operands
    }

    /// `N * log2(eta)`, zero for an empty vocabulary.
    pub fn volume(&self) -> f64 {
        let eta = self.vocabulary();
        if eta == 0 {
            return 0.0;
        }
        self.length() as f64 * (eta as f64).log2()
    }
}

pub fn halstead(source: &str) -> HalsteadCounts {
    halstead_of(&tokenize(source))
}

pub fn halstead_volume(source: &str) -> f64 {
    halstead(source).volume()
}

fn halstead_of(tokens: &[Token<'_>]) -> HalsteadCounts {
    let mut operators = HashSet::new();
    let mut operands = HashSet::new();
    let mut counts = HalsteadCounts::default();
    for t in tokens {
        match t.kind {
            TokenKind::Operator | TokenKind::Delimiter | TokenKind::Keyword => {
                counts.total_operators += 1;
                operators.insert(t.text);
            }
            TokenKind::Identifier | TokenKind::NumberLiteral | TokenKind::StringLiteral => {
                counts.total_operands += 1;
                operands.insert(t.text);
            }
            TokenKind::Comment | TokenKind::Newline | TokenKind::IndentMarker => {}
        }
    }
    counts.distinct_operators = operators.len();
    counts.distinct_operands = operands.len();
    counts
}

/// Structural cognitive complexity.
///
/// Statement-initial `if`/`for`/`while`/`except` add `1 + nesting`, where
/// nesting counts the enclosing blocks opened by `if`, `elif`, `else`, `for`,
/// `while` or `except` (read off indentation). Every `elif`/`else` and every
/// `and`/`or` adds one.
pub fn cognitive(source: &str) -> usize {
    cognitive_of(&tokenize(source))
}

const NESTING_KEYWORDS: &[&str] = &["if", "elif", "else", "for", "while", "except"];
const SCORED_KEYWORDS: &[&str] = &["if", "for", "while", "except"];

fn cognitive_of(tokens: &[Token<'_>]) -> usize {
    let mut score = 0;
    // indent widths of the open nesting blocks
    let mut blocks: Vec<usize> = Vec::new();
    let mut depth = 0usize;
    let mut at_statement_start = true;
    let mut indent = 0usize;

    for (i, t) in tokens.iter().enumerate() {
        match t.kind {
            TokenKind::Newline => {
                if depth == 0 {
                    at_statement_start = true;
                    indent = 0;
                }
                continue;
            }
            TokenKind::IndentMarker => {
                indent = indent_width(t.text);
                continue;
            }
            TokenKind::Comment => continue,
            _ => {}
        }

        if t.kind == TokenKind::Keyword {
            match t.text {
                "elif" | "else" => score += 1,
                "and" | "or" => score += 1,
                _ => {}
            }
        }

        if at_statement_start {
            at_statement_start = false;
            while blocks.last().is_some_and(|&w| w >= indent) {
                blocks.pop();
            }
            let mut head = t;
            if t.is_keyword("async") {
                if let Some(next) = tokens[i + 1..].iter().find(|n| !n.is_trivia()) {
                    head = next;
                }
            }
            if head.kind == TokenKind::Keyword {
                if SCORED_KEYWORDS.contains(&head.text) {
                    score += 1 + blocks.len();
                }
                if NESTING_KEYWORDS.contains(&head.text) {
                    blocks.push(indent);
                }
            }
        }

        if t.kind == TokenKind::Delimiter {
            match t.text {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth = depth.saturating_sub(1),
                ";" if depth == 0 => at_statement_start = true,
                _ => {}
            }
        }
    }
    score
}

fn indent_width(ws: &str) -> usize {
    ws.chars().fold(0, |w, c| if c == '\t' { (w / 8 + 1) * 8 } else { w + 1 })
}

/// Names called as methods: an identifier directly after `.` and directly
/// before `(`.
pub fn distinct_methods(source: &str) -> BTreeSet<String> {
    let tokens: Vec<_> = tokenize(source).into_iter().filter(|t| !t.is_trivia()).collect();
    tokens
        .windows(3)
        .filter(|w| {
            w[0].kind == TokenKind::Delimiter
                && w[0].text == "."
                && w[1].kind == TokenKind::Identifier
                && w[2].kind == TokenKind::Delimiter
                && w[2].text == "("
        })
        .map(|w| w[1].text.to_string())
        .collect()
}
